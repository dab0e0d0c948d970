#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>
#include <vector>

#include "rosgas/trainer.hpp"

namespace rosgas {

/// Homogeneity score 1 - H(class|cluster)/H(class): 1 when every cluster is
/// single-class, ~0 when clusters carry no class information. A single-class
/// input scores 1 by definition.
inline double homogeneity_score(const std::vector<int>& classes, const std::vector<int>& clusters) {
    if (classes.size() != clusters.size() || classes.empty())
        throw std::invalid_argument("homogeneity_score: bad input");
    const int n = static_cast<int>(classes.size());
    const int n_classes = *std::max_element(classes.begin(), classes.end()) + 1;
    const int n_clusters = *std::max_element(clusters.begin(), clusters.end()) + 1;

    std::vector<double> class_count(n_classes, 0.0), cluster_count(n_clusters, 0.0);
    std::vector<std::vector<double>> joint(n_clusters, std::vector<double>(n_classes, 0.0));
    for (int i = 0; i < n; ++i) {
        class_count[classes[i]] += 1.0;
        cluster_count[clusters[i]] += 1.0;
        joint[clusters[i]][classes[i]] += 1.0;
    }

    double h_class = 0.0;
    for (double c : class_count)
        if (c > 0.0) h_class -= (c / n) * std::log(c / n);
    if (h_class == 0.0) return 1.0;

    double h_cond = 0.0;
    for (int k = 0; k < n_clusters; ++k) {
        if (cluster_count[k] == 0.0) continue;
        for (int c = 0; c < n_classes; ++c) {
            if (joint[k][c] == 0.0) continue;
            h_cond -= (joint[k][c] / n) * std::log(joint[k][c] / cluster_count[k]);
        }
    }
    return 1.0 - h_cond / h_class;
}

/// Seeded Lloyd 2-means with restarts, best inertia wins.
inline std::vector<int> kmeans2(const std::vector<std::vector<double>>& points, uint64_t seed,
                                int restarts = 10) {
    const int n = static_cast<int>(points.size());
    if (n < 2) throw std::invalid_argument("kmeans2: need at least 2 points");
    const int d = static_cast<int>(points[0].size());
    Rng rng(derive_seed(seed, "kmeans"));

    std::vector<int> best_assign(n, 0);
    double best_inertia = std::numeric_limits<double>::infinity();
    for (int r = 0; r < restarts; ++r) {
        int i0 = rng.uniform_int(0, n - 1);
        int i1 = rng.uniform_int(0, n - 1);
        int guard = 0;
        while (points[i1] == points[i0] && guard++ < 32) i1 = rng.uniform_int(0, n - 1);
        std::vector<std::vector<double>> centers{points[i0], points[i1]};
        std::vector<int> assign(n, 0);
        for (int iter = 0; iter < 100; ++iter) {
            bool changed = false;
            for (int i = 0; i < n; ++i) {
                double d0 = 0.0, d1 = 0.0;
                for (int j = 0; j < d; ++j) {
                    const double a = points[i][j] - centers[0][j];
                    const double b = points[i][j] - centers[1][j];
                    d0 += a * a;
                    d1 += b * b;
                }
                const int c = d1 < d0 ? 1 : 0;
                if (c != assign[i]) changed = true;
                assign[i] = c;
            }
            for (int c = 0; c < 2; ++c) {
                std::vector<double> mean(d, 0.0);
                int count = 0;
                for (int i = 0; i < n; ++i)
                    if (assign[i] == c) {
                        ++count;
                        for (int j = 0; j < d; ++j) mean[j] += points[i][j];
                    }
                if (count > 0) {
                    for (double& x : mean) x /= count;
                    centers[c] = mean;
                }
            }
            if (!changed) break;
        }
        double inertia = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < d; ++j) {
                const double a = points[i][j] - centers[assign[i]][j];
                inertia += a * a;
            }
        if (inertia < best_inertia) {
            best_inertia = inertia;
            best_assign = assign;
        }
    }
    return best_assign;
}

/// 2-means the embeddings and scores cluster/label agreement.
inline double embedding_quality(const std::vector<std::vector<double>>& embeddings,
                                const std::vector<int>& labels, uint64_t seed) {
    if (embeddings.size() != labels.size() || embeddings.size() < 2)
        throw std::invalid_argument("embedding_quality: bad input");
    const bool single_class =
        std::all_of(labels.begin(), labels.end(), [&](int y) { return y == labels[0]; });
    if (single_class) return 1.0;
    return homogeneity_score(labels, kmeans2(embeddings, seed));
}

/// Final post-attention embeddings for a set of targets (one shared attention
/// batch), architecture chosen per target by the greedy policies.
inline std::vector<std::vector<double>> compute_embeddings(const HetGraph& g, GnnStack& stack,
                                                           const PolicyPair& policies,
                                                           const std::vector<int>& targets_set,
                                                           int k_init = 1) {
    if (targets_set.empty()) throw std::invalid_argument("compute_embeddings: empty target set");
    SubgraphCache cache(g, k_init);
    Tape tape;
    std::vector<SubgraphEmbedding> items;
    for (int t : targets_set) {
        auto [k, l] = policies.choose(cache.state(t));
        const Subgraph& sub = cache.get(t, k);
        items.push_back(SubgraphEmbedding{readout(tape, forward_stack(tape, stack, sub, l)), &sub, t});
    }
    std::vector<Tape::Var> zs = attention_aggregate(tape, stack, items);
    std::vector<std::vector<double>> out;
    out.reserve(zs.size());
    for (Tape::Var z : zs) out.push_back(tape.value(z).v);
    return out;
}

struct ProbeRow {
    int target = -1;
    std::vector<double> ratios;  // correct-classification ratio per depth 1..L_max
    int agent_choice = 0;
    bool match = false;
};

/// Trains fixed-depth stacks `runs` times under distinct seeds, counts how
/// often each probe target is classified correctly per depth, and checks
/// whether the agent's greedy depth choice lies in the per-target argmax set.
inline std::vector<ProbeRow> layer_probe(const HetGraph& g, const std::vector<int>& probe_targets,
                                         int runs, const TrainConfig& cfg,
                                         const PolicyPair& policies, int n_threads = 1) {
    if (probe_targets.empty() || runs < 1) throw std::invalid_argument("layer_probe: bad input");
    for (int t : probe_targets)
        if (t < 0 || t >= g.n_nodes || g.label[t] == kUnlabeled)
            throw std::invalid_argument("layer_probe: probe targets must be labeled");

    const int n_depths = cfg.l_max;
    // counts[run][target][depth]
    std::vector<std::vector<std::vector<int>>> counts(
        runs, std::vector<std::vector<int>>(probe_targets.size(), std::vector<int>(n_depths, 0)));

    auto do_run = [&](int r) {
        SubgraphCache cache(g, cfg.k_init);
        for (int depth = 1; depth <= n_depths; ++depth) {
            TrainConfig run_cfg = cfg;
            run_cfg.variant = Variant::BASELINE;
            run_cfg.l_fixed = depth;
            run_cfg.seed = derive_seed(cfg.seed, 0xab000000ULL + static_cast<uint64_t>(r) * 8 + depth);
            GnnConfig gc;
            gc.input_dim = g.feature_dim();
            gc.hidden = cfg.hidden;
            gc.l_max = cfg.l_max;
            gc.attention_heads = cfg.attention_heads;
            gc.classifier_hidden = cfg.classifier_hidden;
            gc.seed = derive_seed(run_cfg.seed, "stack");
            GnnStack stack(gc);
            std::vector<std::pair<int, int>> arch(g.train_mask.size(), {cfg.k_fixed, depth});
            detail::train_epochs(stack, g, cache, g.train_mask, arch, run_cfg, false,
                                 derive_seed(run_cfg.seed, "probe-train"));

            Tape tape;
            std::vector<SubgraphEmbedding> items;
            for (int t : probe_targets) {
                const Subgraph& sub = cache.get(t, cfg.k_fixed);
                items.push_back(
                    SubgraphEmbedding{readout(tape, forward_stack(tape, stack, sub, depth)), &sub, t});
            }
            std::vector<Tape::Var> zs = attention_aggregate(tape, stack, items);
            for (size_t i = 0; i < probe_targets.size(); ++i) {
                const double logit = tape.value(classify(tape, stack, zs[i])).v[0];
                const int pred = logit > 0.0 ? 1 : 0;
                if (pred == g.label[probe_targets[i]]) counts[r][i][depth - 1] = 1;
            }
        }
    };

    if (n_threads <= 1) {
        for (int r = 0; r < runs; ++r) do_run(r);
    } else {
        std::vector<std::thread> pool;
        std::atomic<int> next{0};
        for (int w = 0; w < n_threads; ++w)
            pool.emplace_back([&] {
                for (int r = next.fetch_add(1); r < runs; r = next.fetch_add(1)) do_run(r);
            });
        for (auto& th : pool) th.join();
    }

    std::vector<ProbeRow> rows;
    SubgraphCache cache(g, cfg.k_init);
    for (size_t i = 0; i < probe_targets.size(); ++i) {
        ProbeRow row;
        row.target = probe_targets[i];
        std::vector<int> total(n_depths, 0);
        for (int r = 0; r < runs; ++r)
            for (int d = 0; d < n_depths; ++d) total[d] += counts[r][i][d];
        for (int d = 0; d < n_depths; ++d)
            row.ratios.push_back(static_cast<double>(total[d]) / runs);
        const int best = *std::max_element(total.begin(), total.end());
        row.agent_choice = policies.choose(cache.state(probe_targets[i])).second;
        row.match = total[row.agent_choice - 1] == best;  // tie rule: choice in argmax set
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace rosgas
