#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "rosgas/hetgraph.hpp"
#include "rosgas/rng.hpp"

namespace rosgas {

/// Configuration of the seeded benchmark-graph generator.
struct SynthConfig {
    int n_users = 1000;
    double bot_fraction = 0.3;
    double labeled_fraction = 0.05;
    int feature_dim = 16;
    double class_separation = 1.5;  // mean shift between class feature distributions
    double camouflage_rate = 0.5;   // P(bot wires an extra edge to a benign hub)
    double tweets_per_user = 3.0;
    int hashtag_pool = 64;
    uint64_t seed = 1;

    void validate() const {
        if (n_users < 10) throw std::invalid_argument("synth: n_users must be >= 10");
        if (!(bot_fraction > 0.0 && bot_fraction < 1.0))
            throw std::invalid_argument("synth: bot_fraction must be in (0,1)");
        if (!(labeled_fraction > 0.0 && labeled_fraction <= 1.0))
            throw std::invalid_argument("synth: labeled_fraction must be in (0,1]");
        if (feature_dim < 4) throw std::invalid_argument("synth: feature_dim must be >= 4");
        if (class_separation < 0.0) throw std::invalid_argument("synth: class_separation must be >= 0");
        if (camouflage_rate < 0.0 || camouflage_rate > 1.0)
            throw std::invalid_argument("synth: camouflage_rate must be in [0,1]");
        if (tweets_per_user < 0.0) throw std::invalid_argument("synth: tweets_per_user must be >= 0");
        if (hashtag_pool < 1) throw std::invalid_argument("synth: hashtag_pool must be >= 1");
    }
};

struct SynthOutput {
    HetGraph graph;
    std::vector<int> user_class;  // ground truth for every user, 0 benign / 1 bot
};

namespace detail {

// Zipf(s) over {0..n-1} via precomputed CDF.
class ZipfSampler {
public:
    ZipfSampler(int n, double s) : cdf_(n) {
        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
            acc += 1.0 / std::pow(static_cast<double>(i + 1), s);
            cdf_[i] = acc;
        }
        for (double& x : cdf_) x /= acc;
    }
    int sample(Rng& rng) const {
        const double u = rng.uniform();
        return static_cast<int>(std::lower_bound(cdf_.begin(), cdf_.end(), u) - cdf_.begin());
    }

private:
    std::vector<double> cdf_;
};

}  // namespace detail

/// Builds the heterogeneous graph with planted bot/benign structure:
/// preferential-attachment follow edges, Poisson tweet counts, Zipf hashtag
/// and entity selection, camouflage links from bots to high-degree benign
/// users, and class-balanced sparse labels. Pure function of the config.
inline SynthOutput generate_with_truth(const SynthConfig& cfg) {
    cfg.validate();
    Rng rng(derive_seed(cfg.seed, "synthgen"));
    const int n = cfg.n_users;
    const int d = cfg.feature_dim;

    // Class assignment.
    const int n_bots = static_cast<int>(std::lround(cfg.bot_fraction * n));
    if (n_bots < 1 || n_bots >= n) throw std::invalid_argument("synth: degenerate class split");
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    std::vector<int> user_class(n, 0);
    for (int i = 0; i < n_bots; ++i) user_class[order[i]] = 1;

    // Labels: class-balanced within rounding.
    const int n_lab = static_cast<int>(std::lround(cfg.labeled_fraction * n));
    const int lab_bots = n_lab / 2;
    const int lab_benign = n_lab - lab_bots;
    if (n_lab < 2) throw std::invalid_argument("synth: infeasible config, labeled count < 2");
    if (lab_bots < 1 || lab_benign < 1)
        throw std::invalid_argument("synth: infeasible config, a class would have no labels");
    if (lab_bots > n_bots || lab_benign > n - n_bots)
        throw std::invalid_argument("synth: infeasible config, not enough users in a class to label");

    std::vector<int> bots, benign;
    for (int u = 0; u < n; ++u) (user_class[u] ? bots : benign).push_back(u);
    rng.shuffle(bots);
    rng.shuffle(benign);
    std::vector<std::pair<int, int>> labels;
    for (int i = 0; i < lab_bots; ++i) labels.emplace_back(bots[i], 1);
    for (int i = 0; i < lab_benign; ++i) labels.emplace_back(benign[i], 0);

    // Follow edges by preferential attachment (m = 2), heavy-tailed degrees.
    constexpr int kAttach = 2;
    std::vector<TypedEdge> edges;
    std::vector<int> endpoint_pool;  // node repeated once per incident follow edge
    std::vector<int> follow_degree(n, 0);
    auto add_follow = [&](int a, int b) {
        edges.push_back(TypedEdge{a, b, EdgeType::Follow});
        endpoint_pool.push_back(a);
        endpoint_pool.push_back(b);
        ++follow_degree[a];
        ++follow_degree[b];
    };
    const int seed_users = std::min(n, kAttach + 1);
    for (int a = 0; a < seed_users; ++a)
        for (int b = a + 1; b < seed_users; ++b) add_follow(a, b);
    for (int u = seed_users; u < n; ++u) {
        std::vector<int> chosen;
        int guard = 0;
        while (static_cast<int>(chosen.size()) < kAttach && guard++ < 64) {
            const int pick = endpoint_pool[static_cast<size_t>(
                rng.uniform_int(0, static_cast<int>(endpoint_pool.size()) - 1))];
            if (pick == u) continue;
            if (std::find(chosen.begin(), chosen.end(), pick) != chosen.end()) continue;
            chosen.push_back(pick);
        }
        for (int v : chosen) add_follow(u, v);
    }

    // Camouflage: bots follow a top-decile-degree benign user.
    {
        std::vector<int> benign_by_degree = benign;
        std::sort(benign_by_degree.begin(), benign_by_degree.end(), [&](int a, int b) {
            return follow_degree[a] != follow_degree[b] ? follow_degree[a] > follow_degree[b] : a < b;
        });
        const int n_hubs = std::max(1, static_cast<int>(benign_by_degree.size()) / 10);
        for (int u = 0; u < n; ++u) {
            if (!user_class[u]) continue;
            if (!rng.bernoulli(cfg.camouflage_rate)) continue;
            const int hub = benign_by_degree[static_cast<size_t>(rng.uniform_int(0, n_hubs - 1))];
            add_follow(u, hub);
        }
    }

    // Features. Bot users sit at delta along a fixed unit direction; their
    // tweets inherit half the shift (content echoes its author).
    const double unit = 1.0 / std::sqrt(static_cast<double>(d));
    auto gauss_row = [&](double shift) {
        std::vector<double> x(d);
        for (int j = 0; j < d; ++j) x[j] = rng.normal(shift * unit, 1.0);
        return x;
    };

    std::vector<NodeType> node_types(n, NodeType::User);
    std::vector<std::vector<double>> features(n);
    for (int u = 0; u < n; ++u)
        features[u] = gauss_row(user_class[u] ? cfg.class_separation : 0.0);

    // Tweets with hashtag/entity attachments.
    detail::ZipfSampler hashtag_zipf(cfg.hashtag_pool, 1.2);
    const int entity_pool = std::max(4, cfg.hashtag_pool / 4);
    detail::ZipfSampler entity_zipf(entity_pool, 1.2);
    struct PendingTweet {
        int owner;
        std::vector<int> hashtags;
        int entity;  // -1 if none
    };
    std::vector<PendingTweet> tweets;
    for (int u = 0; u < n; ++u) {
        const int count = rng.poisson(cfg.tweets_per_user);
        for (int t = 0; t < count; ++t) {
            PendingTweet tw;
            tw.owner = u;
            const int n_tags = 1 + (rng.bernoulli(0.5) ? 1 : 0);
            for (int h = 0; h < n_tags; ++h) tw.hashtags.push_back(hashtag_zipf.sample(rng));
            tw.entity = rng.bernoulli(0.5) ? entity_zipf.sample(rng) : -1;
            tweets.push_back(std::move(tw));
        }
    }

    // Materialize tweet nodes, then only the hashtags/entities actually used.
    std::vector<int> tweet_node(tweets.size());
    for (size_t t = 0; t < tweets.size(); ++t) {
        tweet_node[t] = static_cast<int>(node_types.size());
        node_types.push_back(NodeType::Tweet);
        features.push_back(gauss_row(user_class[tweets[t].owner] ? cfg.class_separation * 0.5 : 0.0));
        edges.push_back(TypedEdge{tweets[t].owner, tweet_node[t], EdgeType::Post});
    }
    std::vector<int> hashtag_node(cfg.hashtag_pool, -1), entity_node(entity_pool, -1);
    auto intern = [&](std::vector<int>& table, int ix, NodeType type) {
        if (table[ix] < 0) {
            table[ix] = static_cast<int>(node_types.size());
            node_types.push_back(type);
            features.push_back(gauss_row(0.0));
        }
        return table[ix];
    };
    for (size_t t = 0; t < tweets.size(); ++t) {
        for (int h : tweets[t].hashtags)
            edges.push_back(
                TypedEdge{tweet_node[t], intern(hashtag_node, h, NodeType::Hashtag), EdgeType::Contain});
        if (tweets[t].entity >= 0)
            edges.push_back(TypedEdge{tweet_node[t],
                                      intern(entity_node, tweets[t].entity, NodeType::Entity),
                                      EdgeType::Contain});
    }

    SynthOutput out;
    out.graph = build_graph(std::move(node_types), std::move(edges), std::move(features), labels);
    out.user_class = std::move(user_class);
    return out;
}

inline HetGraph generate(const SynthConfig& cfg) { return generate_with_truth(cfg).graph; }

struct FoldMasks {
    std::vector<int> train, val, test;
};

/// Partitions the target set D into n_folds blocks; fold i tests on block i,
/// validates on block i+1 (mod n_folds) and trains on the rest. Test sets
/// cover D exactly once.
inline std::vector<FoldMasks> make_folds(const HetGraph& g, int n_folds, uint64_t seed) {
    if (n_folds < 2) throw std::invalid_argument("make_folds: n_folds must be >= 2");
    if (static_cast<int>(g.targets.size()) < n_folds)
        throw std::invalid_argument("make_folds: too few labeled users");
    std::vector<int> order = g.targets;
    Rng rng(derive_seed(seed, "folds"));
    rng.shuffle(order);

    std::vector<std::vector<int>> blocks(n_folds);
    for (size_t i = 0; i < order.size(); ++i) blocks[i % n_folds].push_back(order[i]);

    std::vector<FoldMasks> folds(n_folds);
    for (int f = 0; f < n_folds; ++f) {
        folds[f].test = blocks[f];
        folds[f].val = blocks[(f + 1) % n_folds];
        for (int b = 0; b < n_folds; ++b)
            if (b != f && b != (f + 1) % n_folds)
                folds[f].train.insert(folds[f].train.end(), blocks[b].begin(), blocks[b].end());
        std::sort(folds[f].train.begin(), folds[f].train.end());
        std::sort(folds[f].val.begin(), folds[f].val.end());
        std::sort(folds[f].test.begin(), folds[f].test.end());
    }
    return folds;
}

}  // namespace rosgas
