#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <unordered_map>
#include <utility>
#include <vector>

#include "rosgas/optim.hpp"
#include "rosgas/tensor.hpp"

namespace rosgas {

/// Reverse-mode tape over dense Tensors.
///
/// A tape owns every intermediate of one forward computation. backward() runs
/// once, accumulates into the .grad of every leased Param, and consumes the
/// tape. Tapes are single-threaded; independent tapes may run concurrently.
class Tape {
public:
    struct Var {
        int idx = -1;
        bool valid() const { return idx >= 0; }
    };

    /// Introduces a constant (no gradient flows into it).
    Var leaf(Tensor t) {
        check_finite(t, "leaf");
        return push(std::move(t), nullptr);
    }

    /// Leases a Param onto the tape. Repeated leases of the same Param return
    /// the same Var, so shared parameters accumulate gradients naturally.
    Var param(Param& p) {
        auto it = param_ix_.find(&p);
        if (it != param_ix_.end()) return Var{it->second};
        check_finite(p.value, "param");
        Var v = push(p.value, nullptr);
        nodes_[v.idx].leased = &p;
        param_ix_[&p] = v.idx;
        return v;
    }

    const Tensor& value(Var v) const { return nodes_.at(v.idx).val; }

    Var matmul(Var a, Var b) {
        const Tensor& A = val(a);
        const Tensor& B = val(b);
        if (A.cols != B.rows)
            throw std::invalid_argument("matmul: " + A.shape_str() + " @ " + B.shape_str());
        Tensor C(A.rows, B.cols);
        matmul_into(A, B, C);
        return push(std::move(C), [a, b](Tape& t, int self) {
            const Tensor& g = t.grad(self);
            const Tensor& A = t.val(a);
            const Tensor& B = t.val(b);
            if (t.wants_grad(a)) {  // dA += g @ B^T
                Tensor& da = t.grad_mut(a);
                for (int i = 0; i < A.rows; ++i)
                    for (int j = 0; j < B.cols; ++j) {
                        const double gij = g.at(i, j);
                        if (gij == 0.0) continue;
                        for (int k = 0; k < A.cols; ++k) da.at(i, k) += gij * B.at(k, j);
                    }
            }
            if (t.wants_grad(b)) {  // dB += A^T @ g
                Tensor& db = t.grad_mut(b);
                for (int i = 0; i < A.rows; ++i)
                    for (int k = 0; k < A.cols; ++k) {
                        const double aik = A.at(i, k);
                        if (aik == 0.0) continue;
                        for (int j = 0; j < B.cols; ++j) db.at(k, j) += aik * g.at(i, j);
                    }
            }
        });
    }

    Var add(Var a, Var b) {
        const Tensor& A = val(a);
        const Tensor& B = val(b);
        if (!A.same_shape(B))
            throw std::invalid_argument("add: " + A.shape_str() + " + " + B.shape_str());
        Tensor C = A;
        for (size_t i = 0; i < C.size(); ++i) C.v[i] += B.v[i];
        return push(std::move(C), [a, b](Tape& t, int self) {
            const Tensor& g = t.grad(self);
            if (t.wants_grad(a)) {
                Tensor& da = t.grad_mut(a);
                for (size_t i = 0; i < g.size(); ++i) da.v[i] += g.v[i];
            }
            if (t.wants_grad(b)) {
                Tensor& db = t.grad_mut(b);
                for (size_t i = 0; i < g.size(); ++i) db.v[i] += g.v[i];
            }
        });
    }

    /// Adds a 1xC row vector to every row of an RxC matrix (bias broadcast).
    Var add_rowvec(Var a, Var b) {
        const Tensor& A = val(a);
        const Tensor& B = val(b);
        if (B.rows != 1 || B.cols != A.cols)
            throw std::invalid_argument("add_rowvec: " + A.shape_str() + " + " + B.shape_str());
        Tensor C = A;
        for (int i = 0; i < C.rows; ++i)
            for (int j = 0; j < C.cols; ++j) C.at(i, j) += B.at(0, j);
        return push(std::move(C), [a, b](Tape& t, int self) {
            const Tensor& g = t.grad(self);
            if (t.wants_grad(a)) {
                Tensor& da = t.grad_mut(a);
                for (size_t i = 0; i < g.size(); ++i) da.v[i] += g.v[i];
            }
            if (t.wants_grad(b)) {
                Tensor& db = t.grad_mut(b);
                for (int i = 0; i < g.rows; ++i)
                    for (int j = 0; j < g.cols; ++j) db.at(0, j) += g.at(i, j);
            }
        });
    }

    Var scale(Var a, double c) {
        Tensor C = val(a);
        for (double& x : C.v) x *= c;
        return push(std::move(C), [a, c](Tape& t, int self) {
            if (!t.wants_grad(a)) return;
            const Tensor& g = t.grad(self);
            Tensor& da = t.grad_mut(a);
            for (size_t i = 0; i < g.size(); ++i) da.v[i] += c * g.v[i];
        });
    }

    Var add_const(Var a, double c) {
        Tensor C = val(a);
        for (double& x : C.v) x += c;
        return push(std::move(C), [a](Tape& t, int self) {
            if (!t.wants_grad(a)) return;
            const Tensor& g = t.grad(self);
            Tensor& da = t.grad_mut(a);
            for (size_t i = 0; i < g.size(); ++i) da.v[i] += g.v[i];
        });
    }

    Var sub(Var a, Var b) { return add(a, scale(b, -1.0)); }

    Var relu(Var a) { return leaky_relu(a, 0.0); }

    Var leaky_relu(Var a, double slope) {
        Tensor C = val(a);
        for (double& x : C.v) x = x > 0.0 ? x : slope * x;
        return push(std::move(C), [a, slope](Tape& t, int self) {
            if (!t.wants_grad(a)) return;
            const Tensor& g = t.grad(self);
            const Tensor& A = t.val(a);
            Tensor& da = t.grad_mut(a);
            for (size_t i = 0; i < g.size(); ++i) da.v[i] += (A.v[i] > 0.0 ? 1.0 : slope) * g.v[i];
        });
    }

    Var sigmoid(Var a) {
        Tensor C = val(a);
        for (double& x : C.v) x = sigmoid_scalar(x);
        return push(std::move(C), [a](Tape& t, int self) {
            if (!t.wants_grad(a)) return;
            const Tensor& g = t.grad(self);
            const Tensor& S = t.val(self);
            Tensor& da = t.grad_mut(a);
            for (size_t i = 0; i < g.size(); ++i) da.v[i] += S.v[i] * (1.0 - S.v[i]) * g.v[i];
        });
    }

    Var softmax_rows(Var a) {
        Tensor C = val(a);
        for (int i = 0; i < C.rows; ++i) {
            double mx = C.at(i, 0);
            for (int j = 1; j < C.cols; ++j) mx = std::max(mx, C.at(i, j));
            double sum = 0.0;
            for (int j = 0; j < C.cols; ++j) {
                C.at(i, j) = std::exp(C.at(i, j) - mx);
                sum += C.at(i, j);
            }
            for (int j = 0; j < C.cols; ++j) C.at(i, j) /= sum;
        }
        return push(std::move(C), [a](Tape& t, int self) {
            if (!t.wants_grad(a)) return;
            const Tensor& g = t.grad(self);
            const Tensor& Y = t.val(self);
            Tensor& da = t.grad_mut(a);
            for (int i = 0; i < Y.rows; ++i) {
                double dot = 0.0;
                for (int j = 0; j < Y.cols; ++j) dot += g.at(i, j) * Y.at(i, j);
                for (int j = 0; j < Y.cols; ++j)
                    da.at(i, j) += Y.at(i, j) * (g.at(i, j) - dot);
            }
        });
    }

    /// RxC -> 1xC column means (the readout primitive).
    Var mean_rows(Var a) {
        const Tensor& A = val(a);
        if (A.rows == 0) throw std::invalid_argument("mean_rows: empty input");
        Tensor C(1, A.cols);
        for (int i = 0; i < A.rows; ++i)
            for (int j = 0; j < A.cols; ++j) C.at(0, j) += A.at(i, j);
        for (double& x : C.v) x /= A.rows;
        return push(std::move(C), [a](Tape& t, int self) {
            if (!t.wants_grad(a)) return;
            const Tensor& g = t.grad(self);
            const Tensor& A = t.val(a);
            Tensor& da = t.grad_mut(a);
            const double inv = 1.0 / A.rows;
            for (int i = 0; i < A.rows; ++i)
                for (int j = 0; j < A.cols; ++j) da.at(i, j) += inv * g.at(0, j);
        });
    }

    /// [a ‖ b] for 1-row vectors.
    Var row_concat(Var a, Var b) {
        const Tensor& A = val(a);
        const Tensor& B = val(b);
        if (A.rows != 1 || B.rows != 1)
            throw std::invalid_argument("row_concat: expects 1-row vectors");
        Tensor C(1, A.cols + B.cols);
        std::copy(A.v.begin(), A.v.end(), C.v.begin());
        std::copy(B.v.begin(), B.v.end(), C.v.begin() + A.cols);
        return push(std::move(C), [a, b](Tape& t, int self) {
            const Tensor& g = t.grad(self);
            const int ac = t.val(a).cols;
            if (t.wants_grad(a)) {
                Tensor& da = t.grad_mut(a);
                for (int j = 0; j < ac; ++j) da.v[j] += g.v[j];
            }
            if (t.wants_grad(b)) {
                Tensor& db = t.grad_mut(b);
                for (int j = ac; j < g.cols; ++j) db.v[j - ac] += g.v[j];
            }
        });
    }

    /// Stacks m 1xC vectors into an mxC matrix.
    Var concat_rows(const std::vector<Var>& rows) {
        if (rows.empty()) throw std::invalid_argument("concat_rows: empty");
        const int c = val(rows[0]).cols;
        Tensor C(static_cast<int>(rows.size()), c);
        for (size_t i = 0; i < rows.size(); ++i) {
            const Tensor& R = val(rows[i]);
            if (R.rows != 1 || R.cols != c)
                throw std::invalid_argument("concat_rows: ragged input");
            std::copy(R.v.begin(), R.v.end(), C.v.begin() + i * c);
        }
        return push(std::move(C), [rows](Tape& t, int self) {
            const Tensor& g = t.grad(self);
            for (size_t i = 0; i < rows.size(); ++i) {
                if (!t.wants_grad(rows[i])) continue;
                Tensor& dr = t.grad_mut(rows[i]);
                for (int j = 0; j < g.cols; ++j) dr.v[j] += g.at(static_cast<int>(i), j);
            }
        });
    }

    /// Stacks m scalars into a 1xm row.
    Var stack_scalars(const std::vector<Var>& xs) {
        if (xs.empty()) throw std::invalid_argument("stack_scalars: empty");
        Tensor C(1, static_cast<int>(xs.size()));
        for (size_t i = 0; i < xs.size(); ++i) {
            const Tensor& X = val(xs[i]);
            if (X.size() != 1) throw std::invalid_argument("stack_scalars: non-scalar input");
            C.v[i] = X.v[0];
        }
        return push(std::move(C), [xs](Tape& t, int self) {
            const Tensor& g = t.grad(self);
            for (size_t i = 0; i < xs.size(); ++i)
                if (t.wants_grad(xs[i])) t.grad_mut(xs[i]).v[0] += g.v[i];
        });
    }

    Var dot(Var a, Var b) {
        const Tensor& A = val(a);
        const Tensor& B = val(b);
        if (A.rows != 1 || B.rows != 1 || A.cols != B.cols)
            throw std::invalid_argument("dot: " + A.shape_str() + " . " + B.shape_str());
        double s = 0.0;
        for (int j = 0; j < A.cols; ++j) s += A.v[j] * B.v[j];
        return push(Tensor::scalar(s), [a, b](Tape& t, int self) {
            const double g = t.grad(self).v[0];
            const Tensor& A = t.val(a);
            const Tensor& B = t.val(b);
            if (t.wants_grad(a)) {
                Tensor& da = t.grad_mut(a);
                for (int j = 0; j < A.cols; ++j) da.v[j] += g * B.v[j];
            }
            if (t.wants_grad(b)) {
                Tensor& db = t.grad_mut(b);
                for (int j = 0; j < B.cols; ++j) db.v[j] += g * A.v[j];
            }
        });
    }

    /// Numerically stable binary cross-entropy on a raw logit.
    Var bce_with_logits(Var logit, double label) {
        const Tensor& X = val(logit);
        if (X.size() != 1) throw std::invalid_argument("bce_with_logits: logit must be scalar");
        const double x = X.v[0];
        const double loss = std::max(x, 0.0) - x * label + std::log1p(std::exp(-std::abs(x)));
        return push(Tensor::scalar(loss), [logit, label](Tape& t, int self) {
            if (!t.wants_grad(logit)) return;
            const double g = t.grad(self).v[0];
            const double x = t.val(logit).v[0];
            t.grad_mut(logit).v[0] += g * (sigmoid_scalar(x) - label);
        });
    }

    Var sum_squares(Var a) {
        const Tensor& A = val(a);
        double s = 0.0;
        for (double x : A.v) s += x * x;
        return push(Tensor::scalar(s), [a](Tape& t, int self) {
            if (!t.wants_grad(a)) return;
            const double g = t.grad(self).v[0];
            const Tensor& A = t.val(a);
            Tensor& da = t.grad_mut(a);
            for (size_t i = 0; i < A.size(); ++i) da.v[i] += 2.0 * A.v[i] * g;
        });
    }

    Var sqrt_scalar(Var a) {
        const Tensor& A = val(a);
        if (A.size() != 1 || A.v[0] < 0.0) throw std::invalid_argument("sqrt_scalar: bad input");
        const double r = std::sqrt(A.v[0]);
        return push(Tensor::scalar(r), [a, r](Tape& t, int self) {
            if (!t.wants_grad(a)) return;
            const double g = t.grad(self).v[0];
            t.grad_mut(a).v[0] += g * 0.5 / std::max(r, 1e-12);
        });
    }

    /// Q[i, actions[i]] for each row -> Bx1 (DQN action-value pick).
    Var select_per_row(Var q, std::vector<int> actions) {
        const Tensor& Q = val(q);
        if (static_cast<int>(actions.size()) != Q.rows)
            throw std::invalid_argument("select_per_row: batch size mismatch");
        Tensor C(Q.rows, 1);
        for (int i = 0; i < Q.rows; ++i) {
            if (actions[i] < 0 || actions[i] >= Q.cols)
                throw std::invalid_argument("select_per_row: action out of range");
            C.at(i, 0) = Q.at(i, actions[i]);
        }
        return push(std::move(C), [q, actions = std::move(actions)](Tape& t, int self) {
            if (!t.wants_grad(q)) return;
            const Tensor& g = t.grad(self);
            Tensor& dq = t.grad_mut(q);
            for (int i = 0; i < g.rows; ++i) dq.at(i, actions[i]) += g.at(i, 0);
        });
    }

    /// mean((pred - target)^2) against a constant target column.
    Var mse_to_const(Var pred, Tensor target) {
        const Tensor& P = val(pred);
        if (!P.same_shape(target)) throw std::invalid_argument("mse_to_const: shape mismatch");
        if (P.size() == 0) throw std::invalid_argument("mse_to_const: empty batch");
        double s = 0.0;
        for (size_t i = 0; i < P.size(); ++i) {
            const double d = P.v[i] - target.v[i];
            s += d * d;
        }
        s /= static_cast<double>(P.size());
        return push(Tensor::scalar(s), [pred, target = std::move(target)](Tape& t, int self) {
            if (!t.wants_grad(pred)) return;
            const double g = t.grad(self).v[0];
            const Tensor& P = t.val(pred);
            Tensor& dp = t.grad_mut(pred);
            const double c = 2.0 * g / static_cast<double>(P.size());
            for (size_t i = 0; i < P.size(); ++i) dp.v[i] += c * (P.v[i] - target.v[i]);
        });
    }

    /// Runs reverse accumulation from a scalar loss, then consumes the tape.
    void backward(Var loss) {
        if (consumed_) throw std::logic_error("Tape::backward called twice without re-forward");
        const Tensor& L = val(loss);
        if (L.size() != 1) throw std::invalid_argument("backward: loss must be scalar");
        consumed_ = true;
        grad_mut(loss).v[0] = 1.0;
        for (int i = loss.idx; i >= 0; --i) {
            Node& n = nodes_[i];
            if (n.back && n.grad_alloc) n.back(*this, i);
        }
        for (auto& [p, ix] : param_ix_) {
            Node& n = nodes_[ix];
            if (!n.grad_alloc) continue;
            for (size_t i = 0; i < n.grad.size(); ++i) p->grad.v[i] += n.grad.v[i];
        }
    }

    bool consumed() const { return consumed_; }
    size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        Tensor val;
        Tensor grad;
        bool grad_alloc = false;
        std::function<void(Tape&, int)> back;
        Param* leased = nullptr;
    };

    static double sigmoid_scalar(double x) {
        return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    }

    static void check_finite(const Tensor& t, const char* where) {
        if (!t.all_finite()) throw std::invalid_argument(std::string(where) + ": non-finite input");
    }

    Var push(Tensor t, std::function<void(Tape&, int)> back) {
        if (!t.all_finite()) throw std::invalid_argument("op produced non-finite output");
        nodes_.push_back(Node{std::move(t), Tensor{}, false, std::move(back), nullptr});
        return Var{static_cast<int>(nodes_.size()) - 1};
    }

    const Tensor& val(Var v) const { return nodes_[v.idx].val; }
    const Tensor& val(int i) const { return nodes_[i].val; }
    const Tensor& grad(int i) const { return nodes_[i].grad; }

    // Gradients are materialized lazily; a node nobody differentiates stays empty.
    bool wants_grad(Var v) const {
        const Node& n = nodes_[v.idx];
        return n.back != nullptr || n.leased != nullptr;
    }

    Tensor& grad_mut(Var v) { return grad_mut(v.idx); }
    Tensor& grad_mut(int i) {
        Node& n = nodes_[i];
        if (!n.grad_alloc) {
            n.grad = Tensor(n.val.rows, n.val.cols);
            n.grad_alloc = true;
        }
        return n.grad;
    }

    std::vector<Node> nodes_;
    std::unordered_map<Param*, int> param_ix_;
    bool consumed_ = false;
};

}  // namespace rosgas
