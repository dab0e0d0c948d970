#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "rosgas/gnn.hpp"
#include "rosgas/hetgraph.hpp"
#include "rosgas/metapath.hpp"
#include "rosgas/rl.hpp"
#include "rosgas/rng.hpp"
#include "rosgas/synthgen.hpp"

namespace rosgas {

enum class Variant { K, L, KL, KL_NN, FULL, BASELINE };

inline const char* to_string(Variant v) {
    switch (v) {
        case Variant::K: return "K";
        case Variant::L: return "L";
        case Variant::KL: return "KL";
        case Variant::KL_NN: return "KL-NN";
        case Variant::FULL: return "FULL";
        case Variant::BASELINE: return "BASELINE";
    }
    return "?";
}

inline std::optional<Variant> variant_from(const std::string& s) {
    if (s == "K") return Variant::K;
    if (s == "L") return Variant::L;
    if (s == "KL") return Variant::KL;
    if (s == "KL-NN" || s == "KL_NN") return Variant::KL_NN;
    if (s == "FULL") return Variant::FULL;
    if (s == "BASELINE") return Variant::BASELINE;
    return std::nullopt;
}

inline bool searches_width(Variant v) {
    return v == Variant::K || v == Variant::KL || v == Variant::KL_NN || v == Variant::FULL;
}
inline bool searches_layers(Variant v) {
    return v == Variant::L || v == Variant::KL || v == Variant::KL_NN || v == Variant::FULL;
}
inline bool uses_nearest_neighbor(Variant v) { return v == Variant::KL_NN || v == Variant::FULL; }
inline bool uses_ssl(Variant v) { return v == Variant::FULL; }

struct TrainConfig {
    Variant variant = Variant::FULL;
    // search space
    int k_init = 1;
    int k_max = 2;
    int l_max = 3;
    int k_fixed = 2;  // width when not searched
    int l_fixed = 3;  // depth when not searched
    // gnn
    int gnn_batch = 64;  // B_G, embedding-buffer flush threshold
    double gnn_lr = 0.05;
    double lambda = 0.01;
    int gnn_epochs = 30;  // final retrain epochs
    double margin = 0.1;
    SslForm ssl_form = SslForm::AsPrinted;
    int hidden = 64;
    int attention_heads = 2;
    int classifier_hidden = 32;
    // rl
    int dqn_batch = 64;  // B_D
    int dqn_steps_per_env = 1;
    double agent_lr = 1e-3;
    double gamma = 0.95;
    int replay_capacity = 2048;
    int target_sync = 10;
    int nn_capacity = 512;
    double eps_start = 1.0;
    double eps_end = 0.05;
    double eps_decay_frac = 0.5;  // fraction of total env steps for linear decay
    double l_corr = 7.0;
    double alpha0 = 0.5;
    double beta = 0.05;
    int reward_window = 5;  // b
    RewardMeanForm reward_form = RewardMeanForm::AsPrinted;
    // loop
    int episodes = 20;
    int steps_per_episode = 0;  // 0 -> max(1, |train| / 4)
    int val_probe = 64;
    uint64_t seed = 1;

    void validate() const {
        if (k_init < 0 || k_max < 1 || l_max < 1) throw std::invalid_argument("train: bad search space");
        if (uses_ssl(variant) && k_max < 2)
            throw std::invalid_argument("train: FULL variant needs K_max >= 2 for SSL sampling");
        if (k_fixed < 0 || l_fixed < 1 || l_fixed > l_max)
            throw std::invalid_argument("train: fixed action out of range");
        if (gnn_batch < 1 || dqn_batch < 1 || episodes < 1)
            throw std::invalid_argument("train: bad batch/episode counts");
    }
};

/// Memoizes subgraph extraction and the k_init state encoding per target.
class SubgraphCache {
public:
    SubgraphCache(const HetGraph& g, int k_init) : g_(&g), k_init_(k_init) {}

    const Subgraph& get(int center, int k) {
        const int64_t key = static_cast<int64_t>(center) * 64 + k;
        auto it = subs_.find(key);
        if (it != subs_.end()) return it->second;
        return subs_.emplace(key, extract_subgraph(*g_, center, k)).first->second;
    }

    const std::vector<double>& state(int center) {
        auto it = states_.find(center);
        if (it != states_.end()) return it->second;
        return states_.emplace(center, encode_state(get(center, k_init_))).first->second;
    }

private:
    const HetGraph* g_;
    int k_init_;
    std::unordered_map<int64_t, Subgraph> subs_;
    std::unordered_map<int, std::vector<double>> states_;
};

/// Greedy (width, depth) selection backed by trained agents where a dimension
/// is searched and by the fixed values elsewhere.
struct PolicyPair {
    DqnAgent* width_agent = nullptr;
    DqnAgent* layer_agent = nullptr;
    int k_fixed = 2;
    int l_fixed = 3;

    std::pair<int, int> choose(const std::vector<double>& state) const {
        const int k = width_agent ? width_agent->greedy_action(state) + 1 : k_fixed;
        const int l = layer_agent ? layer_agent->greedy_action(state) + 1 : l_fixed;
        return {k, l};
    }
};

struct MetricsLog {
    std::vector<ordered_json> records;
    double test_accuracy = 0.0;
    double runtime_seconds = 0.0;

    void write_jsonl(const std::string& path) const {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot open for write: " + path);
        for (const ordered_json& r : records) f << r.dump() << '\n';
    }
};

struct TrainOutcome {
    std::unique_ptr<GnnStack> stack;
    std::unique_ptr<DqnAgent> width_agent;
    std::unique_ptr<DqnAgent> layer_agent;
    MetricsLog log;
};

namespace detail {

struct BatchItem {
    int target = -1;
    int width = 0;
    const Subgraph* sub = nullptr;
};

/// One training step on a batch of subgraphs at a common depth: forward the
/// shared stack, attend across the batch, add SSL terms when enabled, and take
/// a single Adam step on the total loss.
inline double train_on_batch(GnnStack& stack, const HetGraph& g, SubgraphCache& cache,
                             const std::vector<BatchItem>& batch, int depth,
                             const TrainConfig& cfg, bool with_ssl, uint64_t ssl_seed) {
    Tape tape;
    std::vector<SubgraphEmbedding> items;
    items.reserve(batch.size());
    for (const BatchItem& it : batch) {
        Tape::Var h = forward_stack(tape, stack, *it.sub, depth);
        items.push_back(SubgraphEmbedding{readout(tape, h), it.sub, it.target});
    }
    std::vector<Tape::Var> zs = attention_aggregate(tape, stack, items);

    std::vector<Tape::Var> logits;
    std::vector<double> labels;
    for (size_t i = 0; i < batch.size(); ++i) {
        logits.push_back(classify(tape, stack, zs[i]));
        labels.push_back(static_cast<double>(g.label[batch[i].target]));
    }

    std::vector<Tape::Var> ssl_terms;
    if (with_ssl) {
        const int heads = stack.config().attention_heads;
        for (size_t i = 0; i < batch.size(); ++i) {
            auto [pos, neg] = ssl_sample(g, batch[i].target, batch[i].width, g.targets, cfg.k_max,
                                         derive_seed(ssl_seed, static_cast<uint64_t>(i)));
            // Singleton attention for the sampled pair: z = (1/K) Σ_k W_k z_pre.
            auto self_attend = [&](const Subgraph& s) {
                Tape::Var zp = readout(tape, forward_stack(tape, stack, s, depth));
                Tape::Var acc;
                for (int k = 0; k < heads; ++k) {
                    Tape::Var m = tape.matmul(zp, tape.param(stack.attention_w(k)));
                    acc = acc.valid() ? tape.add(acc, m) : m;
                }
                return tape.scale(acc, 1.0 / heads);
            };
            ssl_terms.push_back(
                ssl_loss(tape, zs[i], self_attend(pos), self_attend(neg), cfg.margin, cfg.ssl_form));
        }
    }

    Tape::Var loss = total_loss(tape, logits, labels, ssl_terms, cfg.lambda, stack);
    const double loss_value = tape.value(loss).v[0];
    tape.backward(loss);
    adam_step(stack.params(), cfg.gnn_lr);
    (void)cache;
    return loss_value;
}

/// Classifies a set of targets with a shared attention batch and returns
/// accuracy. Width/depth per target come from `choose`.
template <typename ChooseFn>
double batch_accuracy(GnnStack& stack, const HetGraph& g, SubgraphCache& cache,
                      const std::vector<int>& targets_set, ChooseFn&& choose) {
    if (targets_set.empty()) throw std::invalid_argument("batch_accuracy: empty mask");
    Tape tape;
    std::vector<SubgraphEmbedding> items;
    items.reserve(targets_set.size());
    for (int t : targets_set) {
        auto [k, l] = choose(t);
        const Subgraph& sub = cache.get(t, k);
        Tape::Var h = forward_stack(tape, stack, sub, l);
        items.push_back(SubgraphEmbedding{readout(tape, h), &sub, t});
    }
    std::vector<Tape::Var> zs = attention_aggregate(tape, stack, items);
    int correct = 0;
    for (size_t i = 0; i < items.size(); ++i) {
        const double logit = tape.value(classify(tape, stack, zs[i])).v[0];
        const int pred = logit > 0.0 ? 1 : 0;
        correct += pred == g.label[targets_set[i]];
    }
    return static_cast<double>(correct) / static_cast<double>(targets_set.size());
}

/// Epoch-style training over a fixed per-target architecture assignment,
/// batched by depth. Used by BASELINE runs and the final retrain.
inline std::vector<double> train_epochs(GnnStack& stack, const HetGraph& g, SubgraphCache& cache,
                                        const std::vector<int>& train_targets,
                                        const std::vector<std::pair<int, int>>& arch,
                                        const TrainConfig& cfg, bool with_ssl, uint64_t seed) {
    std::map<int, std::vector<BatchItem>> by_depth;
    for (size_t i = 0; i < train_targets.size(); ++i) {
        const auto [k, l] = arch[i];
        by_depth[l].push_back(BatchItem{train_targets[i], k, &cache.get(train_targets[i], k)});
    }
    std::vector<double> epoch_losses;
    for (int epoch = 0; epoch < cfg.gnn_epochs; ++epoch) {
        double total = 0.0;
        int batches = 0;
        for (auto& [depth, items] : by_depth) {
            for (size_t off = 0; off < items.size(); off += cfg.gnn_batch) {
                const size_t end = std::min(items.size(), off + cfg.gnn_batch);
                std::vector<BatchItem> chunk(items.begin() + off, items.begin() + end);
                total += train_on_batch(stack, g, cache, chunk, depth, cfg, with_ssl,
                                        derive_seed(seed, (static_cast<uint64_t>(epoch) << 20) ^
                                                              (static_cast<uint64_t>(depth) << 16) ^
                                                              off));
                ++batches;
            }
        }
        epoch_losses.push_back(batches ? total / batches : 0.0);
    }
    return epoch_losses;
}

}  // namespace detail

/// Executes the full training loop: per env step the two agents pick
/// (width, depth), the subgraph is buffered per depth action, full buffers
/// trigger one shared-stack training step, the validation probe yields the
/// windowed reward, and both agents learn from the shared transition stream.
inline TrainOutcome run_training(const HetGraph& g, const TrainConfig& cfg) {
    cfg.validate();
    const Variant variant = cfg.variant;
    if (g.train_mask.empty() || g.val_mask.empty())
        throw std::invalid_argument("run_training: graph needs train/val masks");

    GnnConfig gc;
    gc.input_dim = g.feature_dim();
    gc.hidden = cfg.hidden;
    gc.l_max = cfg.l_max;
    gc.attention_heads = cfg.attention_heads;
    gc.classifier_hidden = cfg.classifier_hidden;
    gc.seed = derive_seed(cfg.seed, "stack");

    TrainOutcome out;
    out.stack = std::make_unique<GnnStack>(gc);
    SubgraphCache cache(g, cfg.k_init);

    // Fixed seeded validation probe, up to val_probe targets.
    std::vector<int> probe = g.val_mask;
    {
        Rng rng(derive_seed(cfg.seed, "probe-sel"));
        rng.shuffle(probe);
        if (static_cast<int>(probe.size()) > cfg.val_probe) probe.resize(cfg.val_probe);
        std::sort(probe.begin(), probe.end());
    }

    if (variant == Variant::BASELINE) {
        std::vector<std::pair<int, int>> arch(g.train_mask.size(), {cfg.k_fixed, cfg.l_fixed});
        const std::vector<double> losses =
            detail::train_epochs(*out.stack, g, cache, g.train_mask, arch, cfg, false,
                                 derive_seed(cfg.seed, "baseline"));
        for (size_t e = 0; e < losses.size(); ++e) {
            ordered_json rec;
            rec["epoch"] = e;
            rec["gnn_loss"] = losses[e];
            out.log.records.push_back(std::move(rec));
        }
        return out;
    }

    const int t_steps = cfg.steps_per_episode > 0
                            ? cfg.steps_per_episode
                            : std::max<int>(1, static_cast<int>(g.train_mask.size()) / 4);
    const long total_steps = static_cast<long>(cfg.episodes) * t_steps;

    AgentConfig ac;
    ac.state_dim = g.feature_dim();
    ac.gamma = cfg.gamma;
    ac.eps_start = cfg.eps_start;
    ac.eps_end = cfg.eps_end;
    ac.eps_decay_steps = std::max<long>(1, static_cast<long>(cfg.eps_decay_frac * total_steps));
    ac.lr = cfg.agent_lr;
    ac.replay_capacity = cfg.replay_capacity;
    ac.batch = cfg.dqn_batch;
    ac.steps_per_env = cfg.dqn_steps_per_env;
    ac.target_sync = cfg.target_sync;
    ac.l_corr = cfg.l_corr;
    ac.alpha0 = cfg.alpha0;
    ac.beta = cfg.beta;
    ac.reward_window = cfg.reward_window;
    ac.nn_capacity = cfg.nn_capacity;
    ac.use_nn = uses_nearest_neighbor(variant);

    if (searches_width(variant)) {
        AgentConfig a = ac;
        a.n_actions = cfg.k_max;
        a.seed = derive_seed(cfg.seed, "agent-width");
        out.width_agent = std::make_unique<DqnAgent>(a);
    }
    if (searches_layers(variant)) {
        AgentConfig a = ac;
        a.n_actions = cfg.l_max;
        a.seed = derive_seed(cfg.seed, "agent-layer");
        out.layer_agent = std::make_unique<DqnAgent>(a);
    }

    Rng env_rng(derive_seed(cfg.seed, "env"));
    std::map<int, std::vector<detail::BatchItem>> buffer;  // depth action -> pending items
    std::vector<double> acc_history;
    double r_prev = 0.0;
    long env_step = 0;
    uint64_t flush_counter = 0;
    double last_gnn_loss = 0.0;
    bool has_gnn_loss = false;

    for (int episode = 0; episode < cfg.episodes; ++episode) {
        const double alpha_k = alpha_for_episode(cfg.alpha0, cfg.beta, episode);
        int current =
            g.train_mask[static_cast<size_t>(env_rng.uniform_int(
                0, static_cast<int>(g.train_mask.size()) - 1))];
        std::vector<double> state = cache.state(current);

        for (int step = 0; step < t_steps; ++step, ++env_step) {
            const double eps = out.width_agent   ? out.width_agent->epsilon_at(env_step)
                               : out.layer_agent ? out.layer_agent->epsilon_at(env_step)
                                                 : 0.0;
            const int a_width =
                out.width_agent ? out.width_agent->select_action(state, eps) + 1 : cfg.k_fixed;
            const int a_layer =
                out.layer_agent ? out.layer_agent->select_action(state, eps) + 1 : cfg.l_fixed;

            const Subgraph& sub = cache.get(current, a_width);
            buffer[a_layer].push_back(detail::BatchItem{current, a_width, &sub});

            if (static_cast<int>(buffer[a_layer].size()) >= cfg.gnn_batch) {
                last_gnn_loss = detail::train_on_batch(
                    *out.stack, g, cache, buffer[a_layer], a_layer, cfg, uses_ssl(variant),
                    derive_seed(cfg.seed, 0xf1000000ULL + flush_counter++));
                has_gnn_loss = true;
                buffer[a_layer].clear();
            }

            // Validation probe at the chosen action pair: ACC(s_t, a_t).
            const double acc = detail::batch_accuracy(
                *out.stack, g, cache, probe, [&](int) { return std::pair{a_width, a_layer}; });
            const double r_measure = reward_measure(acc_history, acc, cfg.reward_window, cfg.reward_form);
            const int reward = binary_reward(r_measure, r_prev);
            acc_history.push_back(acc);
            r_prev = r_measure;

            // Jump to the next target along the reachability distribution.
            const std::vector<double> trans = transition_distribution(g, sub, g.targets);
            const int next = g.targets[static_cast<size_t>(env_rng.categorical(trans))];
            const std::vector<double> next_state = cache.state(next);

            double dqn_loss_w = 0.0, dqn_loss_l = 0.0;
            bool trained_w = false, trained_l = false;
            if (out.width_agent) {
                out.width_agent->observe(Transition{state, a_width - 1, next_state, reward});
                if (out.width_agent->ready())
                    for (int s = 0; s < cfg.dqn_steps_per_env; ++s) {
                        dqn_loss_w = out.width_agent->dqn_step(alpha_k);
                        trained_w = true;
                    }
            }
            if (out.layer_agent) {
                out.layer_agent->observe(Transition{state, a_layer - 1, next_state, reward});
                if (out.layer_agent->ready())
                    for (int s = 0; s < cfg.dqn_steps_per_env; ++s) {
                        dqn_loss_l = out.layer_agent->dqn_step(alpha_k);
                        trained_l = true;
                    }
            }

            ordered_json rec;
            rec["episode"] = episode;
            rec["step"] = step;
            rec["a1"] = a_width;
            rec["a2"] = a_layer;
            rec["val_acc"] = acc;
            rec["R"] = r_measure;
            rec["reward"] = reward;
            if (trained_w) rec["dqn_loss1"] = dqn_loss_w;
            if (trained_l) rec["dqn_loss2"] = dqn_loss_l;
            if (has_gnn_loss) rec["gnn_loss"] = last_gnn_loss;
            out.log.records.push_back(std::move(rec));

            current = next;
            state = next_state;
        }
    }

    // Drain leftover buffers so every buffered subgraph trains exactly once.
    for (auto& [depth, items] : buffer) {
        if (items.empty()) continue;
        detail::train_on_batch(*out.stack, g, cache, items, depth, cfg, uses_ssl(variant),
                               derive_seed(cfg.seed, 0xf2000000ULL + flush_counter++));
        items.clear();
    }
    return out;
}

/// Re-initializes the stack and trains it for gnn_epochs with the frozen
/// greedy policies choosing each training target's (width, depth).
inline std::unique_ptr<GnnStack> final_retrain(const HetGraph& g, const TrainConfig& cfg,
                                               const PolicyPair& policies) {
    GnnConfig gc;
    gc.input_dim = g.feature_dim();
    gc.hidden = cfg.hidden;
    gc.l_max = cfg.l_max;
    gc.attention_heads = cfg.attention_heads;
    gc.classifier_hidden = cfg.classifier_hidden;
    gc.seed = derive_seed(cfg.seed, "retrain");
    auto stack = std::make_unique<GnnStack>(gc);

    SubgraphCache cache(g, cfg.k_init);
    std::vector<std::pair<int, int>> arch;
    arch.reserve(g.train_mask.size());
    for (int t : g.train_mask) arch.push_back(policies.choose(cache.state(t)));
    detail::train_epochs(*stack, g, cache, g.train_mask, arch, cfg, uses_ssl(cfg.variant),
                         derive_seed(cfg.seed, "retrain-ssl"));
    return stack;
}

/// Accuracy (TP+TN)/(TP+FP+FN+TN) over a mask, with per-target architecture
/// from the greedy policies.
inline double evaluate(const HetGraph& g, GnnStack& stack, const PolicyPair& policies,
                       const std::vector<int>& mask, int k_init = 1) {
    if (mask.empty()) throw std::invalid_argument("evaluate: empty mask");
    SubgraphCache cache(g, k_init);
    return detail::batch_accuracy(stack, g, cache, mask,
                                  [&](int t) { return policies.choose(cache.state(t)); });
}

}  // namespace rosgas
