#include <catch2/catch_amalgamated.hpp>

#include <set>
#include <sstream>

#include "rosgas/io.hpp"
#include "rosgas/synthgen.hpp"

using namespace rosgas;

namespace {

// Tiny logistic regression on raw vectors, trained by full-batch gradient
// descent. Serves as the linear-probe oracle for separability checks.
struct LinearProbe {
    std::vector<double> w;
    double b = 0.0;

    void fit(const std::vector<std::vector<double>>& xs, const std::vector<int>& ys, int iters = 400,
             double lr = 0.5) {
        const int d = static_cast<int>(xs[0].size());
        const int n = static_cast<int>(xs.size());
        w.assign(d, 0.0);
        for (int it = 0; it < iters; ++it) {
            std::vector<double> gw(d, 0.0);
            double gb = 0.0;
            for (int i = 0; i < n; ++i) {
                double z = b;
                for (int j = 0; j < d; ++j) z += w[j] * xs[i][j];
                const double p = 1.0 / (1.0 + std::exp(-z));
                const double err = p - ys[i];
                for (int j = 0; j < d; ++j) gw[j] += err * xs[i][j];
                gb += err;
            }
            for (int j = 0; j < d; ++j) w[j] -= lr * gw[j] / n;
            b -= lr * gb / n;
        }
    }

    double accuracy(const std::vector<std::vector<double>>& xs, const std::vector<int>& ys) const {
        int correct = 0;
        for (size_t i = 0; i < xs.size(); ++i) {
            double z = b;
            for (size_t j = 0; j < xs[i].size(); ++j) z += w[j] * xs[i][j];
            correct += (z > 0.0 ? 1 : 0) == ys[i];
        }
        return static_cast<double>(correct) / xs.size();
    }
};

// Structural+feature oracle input: own features concatenated with the mean
// over the 1-hop neighborhood.
std::vector<double> hop_features(const HetGraph& g, int u) {
    std::vector<double> m = g.features[u];
    int count = 1;
    for (auto [v, e] : g.adj[u]) {
        (void)e;
        for (size_t j = 0; j < m.size(); ++j) m[j] += g.features[v][j];
        ++count;
    }
    for (double& x : m) x /= count;
    std::vector<double> out = g.features[u];
    out.insert(out.end(), m.begin(), m.end());
    return out;
}

// Equal-sized class sample so majority guessing sits at 0.5.
std::vector<int> balanced_users(const std::vector<int>& user_class) {
    std::vector<int> c0, c1;
    for (size_t u = 0; u < user_class.size(); ++u)
        (user_class[u] ? c1 : c0).push_back(static_cast<int>(u));
    const size_t n = std::min(c0.size(), c1.size());
    std::vector<int> out(c0.begin(), c0.begin() + n);
    out.insert(out.end(), c1.begin(), c1.begin() + n);
    return out;
}

}  // namespace

TEST_CASE("config validation and infeasible labelings") {
    SynthConfig cfg;
    cfg.n_users = 100;

    SECTION("labeled count below two") {
        cfg.labeled_fraction = 0.01;  // rounds to 1
        CHECK_THROWS_AS(generate(cfg), std::invalid_argument);
    }

    SECTION("class with no labelable member") {
        cfg.n_users = 40;
        cfg.bot_fraction = 0.01;  // rounds to zero bots
        CHECK_THROWS_AS(generate(cfg), std::invalid_argument);
    }

    SECTION("bad ranges") {
        SynthConfig bad = cfg;
        bad.bot_fraction = 1.0;
        CHECK_THROWS_AS(generate(bad), std::invalid_argument);
        bad = cfg;
        bad.feature_dim = 3;
        CHECK_THROWS_AS(generate(bad), std::invalid_argument);
        bad = cfg;
        bad.n_users = 5;
        CHECK_THROWS_AS(generate(bad), std::invalid_argument);
    }
}

TEST_CASE("label arithmetic") {
    SynthConfig cfg;
    cfg.n_users = 100;
    cfg.bot_fraction = 0.3;
    cfg.labeled_fraction = 0.1;
    HetGraph g = generate(cfg);
    CHECK(g.targets.size() == 10);
    int bots = 0, benign = 0;
    for (int t : g.targets) (g.label[t] == 1 ? bots : benign)++;
    CHECK(bots == 5);
    CHECK(benign == 5);
}

TEST_CASE("same seed reproduces byte-identical jsonl") {
    SynthConfig cfg;
    cfg.n_users = 120;
    cfg.seed = 777;
    std::ostringstream a, b;
    write_graph_jsonl(generate(cfg), a);
    write_graph_jsonl(generate(cfg), b);
    CHECK(a.str() == b.str());
    CHECK_FALSE(a.str().empty());

    cfg.seed = 778;
    std::ostringstream c;
    write_graph_jsonl(generate(cfg), c);
    CHECK(a.str() != c.str());
}

TEST_CASE("structure of the generated graph") {
    SynthConfig cfg;
    cfg.n_users = 500;
    cfg.seed = 3;
    SynthOutput out = generate_with_truth(cfg);
    const HetGraph& g = out.graph;

    SECTION("typed edge schema") {
        for (const TypedEdge& e : g.edges) {
            switch (e.rel) {
                case EdgeType::Follow:
                    CHECK(g.node_type[e.src] == NodeType::User);
                    CHECK(g.node_type[e.dst] == NodeType::User);
                    break;
                case EdgeType::Post:
                    CHECK(g.node_type[e.src] == NodeType::User);
                    CHECK(g.node_type[e.dst] == NodeType::Tweet);
                    break;
                case EdgeType::Contain:
                    CHECK(g.node_type[e.src] == NodeType::Tweet);
                    CHECK((g.node_type[e.dst] == NodeType::Hashtag ||
                           g.node_type[e.dst] == NodeType::Entity));
                    break;
                default:
                    FAIL("unexpected relation in synthetic graph");
            }
        }
    }

    SECTION("heavy-tailed follow degrees") {
        std::vector<int> deg(cfg.n_users, 0);
        for (const TypedEdge& e : g.edges)
            if (e.rel == EdgeType::Follow) {
                ++deg[e.src];
                ++deg[e.dst];
            }
        std::sort(deg.begin(), deg.end());
        const int median = deg[deg.size() / 2];
        const int max = deg.back();
        CHECK(max >= 5 * median);
    }

    SECTION("truth sidecar covers every user") {
        REQUIRE(static_cast<int>(out.user_class.size()) == cfg.n_users);
        for (int t : g.targets) CHECK(g.label[t] == out.user_class[t]);
    }

    SECTION("unlabeled regime") {
        SynthConfig sparse = cfg;
        sparse.n_users = 1000;
        sparse.labeled_fraction = 0.01;
        HetGraph h = generate(sparse);
        const double unlabeled =
            1.0 - static_cast<double>(h.targets.size()) / static_cast<double>(h.n_nodes);
        CHECK(unlabeled > 0.99);
    }
}

TEST_CASE("planted signal is recoverable and only when planted") {
    SynthConfig cfg;
    cfg.n_users = 400;
    cfg.seed = 11;  // probes read the truth sidecar, not the sparse labels

    SECTION("no leaked signal at zero separation") {
        cfg.class_separation = 0.0;
        SynthOutput out = generate_with_truth(cfg);
        std::vector<std::vector<double>> xs;
        std::vector<int> ys;
        for (int u : balanced_users(out.user_class)) {
            xs.push_back(out.graph.features[u]);
            ys.push_back(out.user_class[u]);
        }
        LinearProbe probe;
        probe.fit(xs, ys);
        CHECK(probe.accuracy(xs, ys) <= 0.6);
    }

    SECTION("recoverable at separation two") {
        cfg.class_separation = 2.0;
        SynthOutput out = generate_with_truth(cfg);
        std::vector<std::vector<double>> xs;
        std::vector<int> ys;
        for (int u : balanced_users(out.user_class)) {
            xs.push_back(hop_features(out.graph, u));
            ys.push_back(out.user_class[u]);
        }
        LinearProbe probe;
        probe.fit(xs, ys);
        CHECK(probe.accuracy(xs, ys) >= 0.9);
    }
}

TEST_CASE("make_folds") {
    SynthConfig cfg;
    cfg.n_users = 100;
    cfg.labeled_fraction = 0.1;  // |D| = 10
    HetGraph g = generate(cfg);
    REQUIRE(g.targets.size() == 10);

    SECTION("ten folds of a ten-element target set") {
        auto folds = make_folds(g, 10, 5);
        std::set<int> union_test;
        for (const FoldMasks& f : folds) {
            CHECK(f.test.size() == 1);
            union_test.insert(f.test.begin(), f.test.end());
        }
        CHECK(union_test == std::set<int>(g.targets.begin(), g.targets.end()));
    }

    SECTION("twenty targets over ten folds") {
        SynthConfig big = cfg;
        big.labeled_fraction = 0.2;
        HetGraph h = generate(big);
        REQUIRE(h.targets.size() == 20);
        auto folds = make_folds(h, 10, 5);
        std::set<int> union_test;
        for (const FoldMasks& f : folds) {
            CHECK(f.test.size() == 2);
            union_test.insert(f.test.begin(), f.test.end());
            // disjointness inside a fold
            std::set<int> all(f.train.begin(), f.train.end());
            for (int v : f.val) CHECK(all.insert(v).second);
            for (int t : f.test) CHECK(all.insert(t).second);
            CHECK(all.size() == h.targets.size());
        }
        CHECK(union_test == std::set<int>(h.targets.begin(), h.targets.end()));
    }

    SECTION("deterministic") {
        auto a = make_folds(g, 5, 42);
        auto b = make_folds(g, 5, 42);
        for (size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].train == b[i].train);
            CHECK(a[i].val == b[i].val);
            CHECK(a[i].test == b[i].test);
        }
    }

    SECTION("too few labeled users") {
        CHECK_THROWS_AS(make_folds(g, 11, 1), std::invalid_argument);
    }
}
