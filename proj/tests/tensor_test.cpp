#include <catch2/catch_amalgamated.hpp>

#include "rosgas/autodiff.hpp"
#include "rosgas/optim.hpp"
#include "rosgas/rng.hpp"
#include "testutil.hpp"

using namespace rosgas;

TEST_CASE("forward op values") {
    Tape t;

    SECTION("sigmoid(0) = 0.5") {
        Tape::Var v = t.sigmoid(t.leaf(Tensor::scalar(0.0)));
        CHECK(t.value(v).v[0] == 0.5);
    }

    SECTION("softmax of a singleton row is 1") {
        Tape::Var v = t.softmax_rows(t.leaf(Tensor::scalar(3.7)));
        CHECK(t.value(v).v[0] == 1.0);
    }

    SECTION("matmul by identity is identity") {
        Tensor eye(3, 3);
        for (int i = 0; i < 3; ++i) eye.at(i, i) = 1.0;
        Tensor x(3, 2);
        for (size_t i = 0; i < x.size(); ++i) x.v[i] = 0.5 * static_cast<double>(i) - 1.0;
        Tape::Var v = t.matmul(t.leaf(eye), t.leaf(x));
        CHECK(t.value(v).v == x.v);
    }

    SECTION("mean_rows averages") {
        Tensor x(2, 2);
        x.at(0, 0) = 0.0; x.at(0, 1) = 2.0;
        x.at(1, 0) = 2.0; x.at(1, 1) = 0.0;
        Tape::Var v = t.mean_rows(t.leaf(x));
        CHECK(t.value(v).v == std::vector<double>{1.0, 1.0});
    }

    SECTION("bce at logit 0 is ln 2") {
        Tape::Var v = t.bce_with_logits(t.leaf(Tensor::scalar(0.0)), 1.0);
        CHECK_THAT(t.value(v).v[0], Catch::Matchers::WithinAbs(std::log(2.0), 1e-15));
    }

    SECTION("shape mismatch throws") {
        CHECK_THROWS_AS(t.add(t.leaf(Tensor(2, 2)), t.leaf(Tensor(2, 3))), std::invalid_argument);
        CHECK_THROWS_AS(t.matmul(t.leaf(Tensor(2, 2)), t.leaf(Tensor(3, 2))), std::invalid_argument);
    }

    SECTION("non-finite input throws") {
        Tensor bad = Tensor::scalar(std::numeric_limits<double>::quiet_NaN());
        CHECK_THROWS_AS(t.leaf(bad), std::invalid_argument);
    }
}

TEST_CASE("backward basics") {
    SECTION("d sigmoid at 0 is 0.25") {
        Param p(Tensor::scalar(0.0));
        Tape t;
        Tape::Var loss = t.sigmoid(t.param(p));
        t.backward(loss);
        CHECK(p.grad.v[0] == 0.25);
    }

    SECTION("constant loss gives exactly zero grads") {
        Param p(Tensor::scalar(2.0));
        Tape t;
        Tape::Var loss = t.scale(t.param(p), 0.0);
        t.backward(loss);
        CHECK(p.grad.v[0] == 0.0);
    }

    SECTION("backward twice throws") {
        Param p(Tensor::scalar(1.0));
        Tape t;
        Tape::Var loss = t.sigmoid(t.param(p));
        t.backward(loss);
        CHECK_THROWS_AS(t.backward(loss), std::logic_error);
    }

    SECTION("shared param accumulates through both uses") {
        Param p(Tensor::scalar(3.0));
        Tape t;
        Tape::Var x = t.param(p);
        Tape::Var loss = t.dot(x, x);  // x^2, d/dx = 2x = 6
        t.backward(loss);
        CHECK(p.grad.v[0] == 6.0);
    }
}

TEST_CASE("three-layer MLP gradients match finite differences") {
    Rng rng(17);
    auto init = [&](int r, int c) {
        Tensor t(r, c);
        for (double& x : t.v) x = rng.normal(0.0, 0.5);
        return t;
    };
    Param w1(init(4, 5)), b1(init(1, 5));
    Param w2(init(5, 3)), b2(init(1, 3));
    Param w3(init(3, 1)), b3(init(1, 1));
    Tensor x = init(6, 4);

    std::vector<Param*> params{&w1, &b1, &w2, &b2, &w3, &b3};
    auto forward = [&](Tape& t) {
        Tape::Var h = t.leaf(x);
        h = t.relu(t.add_rowvec(t.matmul(h, t.param(w1)), t.param(b1)));
        h = t.sigmoid(t.add_rowvec(t.matmul(h, t.param(w2)), t.param(b2)));
        h = t.add_rowvec(t.matmul(h, t.param(w3)), t.param(b3));
        return t.sum_squares(h);
    };
    const double err = testutil::max_grad_rel_error(
        params,
        [&] { Tape t; return t.value(forward(t)).v[0]; },
        [&] { Tape t; Tape::Var l = forward(t); t.backward(l); });
    CHECK(err <= 1e-4);
}

TEST_CASE("composite op gradients match finite differences") {
    Rng rng(23);
    auto init = [&](int r, int c) {
        Tensor t(r, c);
        for (double& x : t.v) x = rng.normal(0.0, 0.7) + 0.05;
        return t;
    };
    Param a(init(1, 4)), b(init(1, 4)), c(init(1, 3)), m(init(4, 4));

    auto forward = [&](Tape& t) {
        Tape::Var va = t.param(a);
        Tape::Var vb = t.param(b);
        Tape::Var cat = t.row_concat(va, t.matmul(vb, t.param(m)));  // 1x8
        Tape::Var sm = t.softmax_rows(cat);
        Tape::Var lk = t.leaky_relu(t.scale(sm, 3.0), 0.2);
        Tape::Var d = t.dot(lk, lk);
        Tape::Var stacked = t.stack_scalars({d, t.sum_squares(t.param(c)), t.add_const(d, 1.0)});
        Tape::Var rows = t.concat_rows({stacked, t.scale(stacked, -0.5)});
        Tape::Var picked = t.select_per_row(rows, {2, 0});
        Tensor target(2, 1);
        target.v = {0.3, -0.4};
        Tape::Var mse = t.mse_to_const(picked, target);
        return t.add(mse, t.sqrt_scalar(t.sum_squares(t.mean_rows(rows))));
    };
    const double err = testutil::max_grad_rel_error(
        {&a, &b, &c, &m},
        [&] { Tape t; return t.value(forward(t)).v[0]; },
        [&] { Tape t; Tape::Var l = forward(t); t.backward(l); });
    CHECK(err <= 1e-4);
}

TEST_CASE("ops are deterministic") {
    Rng rng(5);
    Tensor x(8, 8);
    for (double& v : x.v) v = rng.normal();
    auto run = [&] {
        Tape t;
        Tape::Var v = t.softmax_rows(t.matmul(t.leaf(x), t.leaf(x)));
        return t.value(t.mean_rows(v)).v;
    };
    CHECK(run() == run());
}

TEST_CASE("adam updates") {
    SECTION("zero grad leaves value unchanged") {
        Param p(Tensor::scalar(1.5));
        adam_step({&p}, 0.05);
        CHECK(p.value.v[0] == 1.5);
    }

    SECTION("unit grad moves by about lr on the first step") {
        Param p(Tensor::scalar(1.0));
        p.grad.v[0] = 1.0;
        adam_step({&p}, 0.05);
        // bias-corrected m̂=1, v̂=1 -> step = lr/(1+eps)
        CHECK_THAT(1.0 - p.value.v[0], Catch::Matchers::WithinAbs(0.05, 1e-8));
        CHECK(p.grad.v[0] == 0.0);  // grads cleared
        CHECK(p.step == 1);
    }

    SECTION("identical params with identical grads update identically") {
        Param p(Tensor::scalar(0.7)), q(Tensor::scalar(0.7));
        for (int i = 0; i < 5; ++i) {
            p.grad.v[0] = 0.3 * (i + 1);
            q.grad.v[0] = 0.3 * (i + 1);
            adam_step({&p, &q}, 0.01);
        }
        CHECK(p.value.v[0] == q.value.v[0]);
    }
}
