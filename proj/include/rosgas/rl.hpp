#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rosgas/autodiff.hpp"
#include "rosgas/hetgraph.hpp"
#include "rosgas/io.hpp"
#include "rosgas/rng.hpp"

namespace rosgas {

enum class RewardMeanForm { AsPrinted, TrueMean };

struct AgentConfig {
    int n_actions = 2;
    int state_dim = 0;
    double gamma = 0.95;
    double eps_start = 1.0;
    double eps_end = 0.05;
    long eps_decay_steps = 1;  // linear decay horizon in env steps
    double lr = 1e-3;
    int replay_capacity = 2048;
    int batch = 64;            // B_D
    int steps_per_env = 1;     // S
    int target_sync = 10;      // C
    double l_corr = 7.0;
    double alpha0 = 0.5;
    double beta = 0.05;
    int reward_window = 5;     // b
    int nn_capacity = 512;
    bool use_nn = false;
    uint64_t seed = 1;
};

/// State of the environment: mean of the raw feature rows of the initial
/// subgraph. No learned parameters, so states are stable across training.
inline std::vector<double> encode_state(const Subgraph& sub) {
    if (sub.size() == 0) throw std::invalid_argument("encode_state: empty subgraph");
    const int d = static_cast<int>(sub.local_features[0].size());
    std::vector<double> s(d, 0.0);
    for (const auto& row : sub.local_features)
        for (int j = 0; j < d; ++j) s[j] += row[j];
    for (double& x : s) x /= sub.size();
    return s;
}

/// Improvement measure over the recent accuracy window. AsPrinted divides the
/// b-term sum by (b-1), matching the published formula; TrueMean divides by b.
/// During warm-up the rule is applied to whatever history exists, and an empty
/// history contributes 0.
inline double reward_measure(const std::vector<double>& acc_history, double acc_t, int b,
                             RewardMeanForm form = RewardMeanForm::AsPrinted) {
    if (b < 1) throw std::invalid_argument("reward_measure: window must be >= 1");
    const int have = std::min<int>(b, static_cast<int>(acc_history.size()));
    if (have == 0) return acc_t;
    double sum = 0.0;
    for (int i = 0; i < have; ++i) sum += acc_history[acc_history.size() - 1 - i];
    const double denom =
        form == RewardMeanForm::AsPrinted ? std::max(have - 1, 1) : have;
    return acc_t - sum / denom;
}

inline int binary_reward(double r_t, double r_prev) { return r_t > r_prev ? 1 : -1; }

struct Transition {
    std::vector<double> s;
    int a = 0;
    std::vector<double> s_next;
    int r = 0;  // ±1
};

class ReplayBuffer {
public:
    explicit ReplayBuffer(int capacity) : capacity_(capacity) {
        if (capacity < 1) throw std::invalid_argument("ReplayBuffer: capacity must be >= 1");
    }

    void push(Transition t) {
        if (static_cast<int>(buf_.size()) < capacity_) {
            buf_.push_back(std::move(t));
        } else {
            buf_[head_] = std::move(t);
            head_ = (head_ + 1) % capacity_;
        }
    }

    size_t size() const { return buf_.size(); }
    const Transition& at(size_t i) const { return buf_[i]; }

    std::vector<size_t> sample_indices(int batch, Rng& rng) const {
        std::vector<size_t> ix(batch);
        for (int i = 0; i < batch; ++i)
            ix[i] = static_cast<size_t>(rng.uniform_int(0, static_cast<int>(buf_.size()) - 1));
        return ix;
    }

private:
    int capacity_;
    size_t head_ = 0;
    std::vector<Transition> buf_;
};

/// Observation experience set B: explored (state, action) pairs with the
/// observed binary reward as value label. FIFO eviction.
class NNMemory {
public:
    struct Record {
        std::vector<double> s;
        int a = 0;
        int q = 0;  // ±1
    };

    explicit NNMemory(int capacity) : capacity_(capacity) {}

    void push(std::vector<double> s, int a, int q) {
        if (q != 1 && q != -1) throw std::invalid_argument("NNMemory: value label must be ±1");
        records_.push_back(Record{std::move(s), a, q});
        if (static_cast<int>(records_.size()) > capacity_) records_.pop_front();
    }

    size_t size() const { return records_.size(); }
    const std::deque<Record>& records() const { return records_; }

private:
    int capacity_;
    std::deque<Record> records_;
};

inline double cosine_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 1.0;  // cosine undefined at zero norm
    return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

/// Q̂(τ) = min over same-action records of q_i + L_corr · d(s, s_i),
/// d = 1 - cosine. Nothing to estimate when no same-action record exists.
inline std::optional<double> nn_estimate(const NNMemory& mem, const std::vector<double>& s, int a,
                                         double l_corr) {
    std::optional<double> best;
    for (const NNMemory::Record& rec : mem.records()) {
        if (rec.a != a) continue;
        const double v = rec.q + l_corr * cosine_distance(s, rec.s);
        if (!best || v < *best) best = v;
    }
    return best;
}

/// α_k · Q̂_nn + (1-α_k) · (r + γ max_a Q_target(s')), falling back to the pure
/// DQN target when no neighbor estimate exists.
inline double mixed_target(int r, double max_q_next, double gamma, double alpha_k,
                           std::optional<double> nn_value) {
    const double base = r + gamma * max_q_next;
    if (!nn_value) return base;
    return alpha_k * *nn_value + (1.0 - alpha_k) * base;
}

/// Exponentially decaying nearest-neighbor mixing weight, α_0(1-β)^episode.
inline double alpha_for_episode(double alpha0, double beta, int episode) {
    return alpha0 * std::pow(1.0 - beta, episode);
}

/// Q-approximator: fixed 64-128-256-128-64 hidden trunk with ReLU.
class QNet {
public:
    QNet(int in_dim, int out_dim, uint64_t seed) {
        const int widths[] = {in_dim, 64, 128, 256, 128, 64, out_dim};
        Rng rng(derive_seed(seed, "qnet-init"));
        for (int i = 0; i + 1 < 7; ++i) {
            ws_.emplace_back(glorot(widths[i], widths[i + 1], rng));
            bs_.emplace_back(Tensor(1, widths[i + 1]));
        }
    }

    Tape::Var forward(Tape& tape, Tape::Var states) {
        Tape::Var h = states;
        for (size_t i = 0; i < ws_.size(); ++i) {
            h = tape.add_rowvec(tape.matmul(h, tape.param(ws_[i])), tape.param(bs_[i]));
            if (i + 1 < ws_.size()) h = tape.relu(h);
        }
        return h;
    }

    /// Forward values without touching any persistent tape.
    Tensor values(const Tensor& states) {
        Tape tape;
        return tape.value(forward(tape, tape.leaf(states)));
    }

    std::vector<Param*> params() {
        std::vector<Param*> ps;
        for (Param& p : ws_) ps.push_back(&p);
        for (Param& p : bs_) ps.push_back(&p);
        return ps;
    }

    NamedParams named_params(const std::string& prefix) {
        NamedParams np;
        for (size_t i = 0; i < ws_.size(); ++i) {
            np.add(prefix + "_w" + std::to_string(i + 1), ws_[i]);
            np.add(prefix + "_b" + std::to_string(i + 1), bs_[i]);
        }
        return np;
    }

    void copy_values_from(QNet& other) {
        for (size_t i = 0; i < ws_.size(); ++i) {
            ws_[i].value = other.ws_[i].value;
            bs_[i].value = other.bs_[i].value;
        }
    }

private:
    static Tensor glorot(int rows, int cols, Rng& rng) {
        Tensor t(rows, cols);
        const double limit = std::sqrt(6.0 / (rows + cols));
        for (double& x : t.v) x = (rng.uniform() * 2.0 - 1.0) * limit;
        return t;
    }

    std::vector<Param> ws_, bs_;
};

/// One DQN agent: prediction/target nets, replay memory, nearest-neighbor
/// memory and its own RNG stream.
class DqnAgent {
public:
    explicit DqnAgent(const AgentConfig& cfg)
        : cfg_(cfg),
          pred_(cfg.state_dim, cfg.n_actions, derive_seed(cfg.seed, "pred")),
          target_(cfg.state_dim, cfg.n_actions, derive_seed(cfg.seed, "pred")),
          replay_(cfg.replay_capacity),
          nn_mem_(cfg.nn_capacity),
          rng_(derive_seed(cfg.seed, "agent-rng")) {
        if (cfg.state_dim < 1 || cfg.n_actions < 1) throw std::invalid_argument("DqnAgent: bad config");
        target_.copy_values_from(pred_);
    }

    const AgentConfig& config() const { return cfg_; }
    ReplayBuffer& replay() { return replay_; }
    NNMemory& nn_memory() { return nn_mem_; }
    QNet& prediction_net() { return pred_; }
    QNet& target_net() { return target_; }

    /// ε-greedy on the prediction net; argmax ties break to the lowest index.
    int select_action(const std::vector<double>& s, double eps) {
        if (eps > 0.0 && rng_.uniform() < eps) return rng_.uniform_int(0, cfg_.n_actions - 1);
        return greedy_action(s);
    }

    int greedy_action(const std::vector<double>& s) {
        const Tensor q = pred_.values(Tensor::row(s));
        int best = 0;
        for (int a = 1; a < cfg_.n_actions; ++a)
            if (q.v[a] > q.v[best]) best = a;
        return best;
    }

    double epsilon_at(long env_step) const {
        if (cfg_.eps_decay_steps <= 0) return cfg_.eps_end;
        const double frac = std::min(1.0, static_cast<double>(env_step) /
                                              static_cast<double>(cfg_.eps_decay_steps));
        return cfg_.eps_start + (cfg_.eps_end - cfg_.eps_start) * frac;
    }

    void observe(Transition t) {
        if (cfg_.use_nn) nn_mem_.push(t.s, t.a, t.r);
        replay_.push(std::move(t));
    }

    bool ready() const { return static_cast<int>(replay_.size()) >= cfg_.batch; }

    /// One optimization step of the prediction network against mixed targets.
    /// Returns the batch loss. The target net syncs every C calls.
    double dqn_step(double alpha_k) {
        if (replay_.size() == 0) throw std::invalid_argument("dqn_step: empty replay");
        const int batch = std::min<int>(cfg_.batch, static_cast<int>(replay_.size()));
        const std::vector<size_t> ix = replay_.sample_indices(batch, rng_);

        Tensor states(batch, cfg_.state_dim), next_states(batch, cfg_.state_dim);
        std::vector<int> actions(batch);
        for (int i = 0; i < batch; ++i) {
            const Transition& t = replay_.at(ix[i]);
            std::copy(t.s.begin(), t.s.end(), states.v.begin() + i * cfg_.state_dim);
            std::copy(t.s_next.begin(), t.s_next.end(), next_states.v.begin() + i * cfg_.state_dim);
            actions[i] = t.a;
        }

        const Tensor q_next = target_.values(next_states);
        Tensor targets(batch, 1);
        for (int i = 0; i < batch; ++i) {
            const Transition& t = replay_.at(ix[i]);
            double mx = q_next.at(i, 0);
            for (int a = 1; a < cfg_.n_actions; ++a) mx = std::max(mx, q_next.at(i, a));
            std::optional<double> nn;
            if (cfg_.use_nn) nn = nn_estimate(nn_mem_, t.s, t.a, cfg_.l_corr);
            targets.at(i, 0) = mixed_target(t.r, mx, cfg_.gamma, alpha_k, nn);
        }

        Tape tape;
        Tape::Var q = pred_.forward(tape, tape.leaf(states));
        Tape::Var q_sa = tape.select_per_row(q, actions);
        Tape::Var loss = tape.mse_to_const(q_sa, targets);
        const double loss_value = tape.value(loss).v[0];
        tape.backward(loss);
        adam_step(pred_.params(), cfg_.lr);

        ++train_steps_;
        if (cfg_.target_sync > 0 && train_steps_ % cfg_.target_sync == 0) sync_target();
        return loss_value;
    }

    void sync_target() { target_.copy_values_from(pred_); }

    long train_steps() const { return train_steps_; }

    void save(const std::string& path) {
        NamedParams np = pred_.named_params("pred");
        NamedParams nt = target_.named_params("target");
        for (auto& it : nt.items) np.items.push_back(it);
        ordered_json j = params_to_json(np);
        ordered_json mem = ordered_json::array();
        for (const NNMemory::Record& r : nn_mem_.records())
            mem.push_back({{"s", r.s}, {"a", r.a}, {"q", r.q}});
        j["__nn_memory__"] = std::move(mem);
        j["__train_steps__"] = train_steps_;
        std::ofstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot open for write: " + path);
        f << j.dump(2) << '\n';
    }

    void load(const std::string& path) {
        ordered_json j = load_json_file(path);
        NamedParams np = pred_.named_params("pred");
        NamedParams nt = target_.named_params("target");
        for (auto& it : nt.items) np.items.push_back(it);
        params_from_json(j, np);
        if (j.contains("__nn_memory__"))
            for (const auto& r : j.at("__nn_memory__"))
                nn_mem_.push(r.at("s").get<std::vector<double>>(), r.at("a").get<int>(),
                             r.at("q").get<int>());
        if (j.contains("__train_steps__")) train_steps_ = j.at("__train_steps__").get<long>();
    }

private:
    AgentConfig cfg_;
    QNet pred_, target_;
    ReplayBuffer replay_;
    NNMemory nn_mem_;
    Rng rng_;
    long train_steps_ = 0;
};

}  // namespace rosgas
