#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rosgas/autodiff.hpp"
#include "rosgas/hetgraph.hpp"
#include "rosgas/io.hpp"
#include "rosgas/rng.hpp"

namespace rosgas {

enum class SslForm { AsPrinted, StandardHinge };

struct GnnConfig {
    int input_dim = 0;
    int hidden = 64;
    int l_max = 3;
    int attention_heads = 2;
    int classifier_hidden = 32;
    double leaky_slope = 0.2;
    uint64_t seed = 1;
};

/// Shared pool of GCN layers plus residual projection, attention heads and the
/// classifier head. The stack for depth action l is exactly the first l layers
/// in initialization order, so every depth choice trains the same pool.
class GnnStack {
public:
    explicit GnnStack(const GnnConfig& cfg) : cfg_(cfg) {
        if (cfg.input_dim < 1 || cfg.l_max < 1 || cfg.attention_heads < 1)
            throw std::invalid_argument("GnnStack: bad config");
        Rng rng(derive_seed(cfg.seed, "gnn-init"));
        for (int l = 0; l < cfg.l_max; ++l)
            layers_.emplace_back(glorot(l == 0 ? cfg.input_dim : cfg.hidden, cfg.hidden, rng));
        residual_ = Param(glorot(cfg.input_dim, cfg.hidden, rng));
        for (int k = 0; k < cfg.attention_heads; ++k) {
            att_w_.emplace_back(glorot(cfg.hidden, cfg.hidden, rng));
            att_a_.emplace_back(glorot(1, 2 * cfg.hidden, rng));
        }
        cls_w1_ = Param(glorot(cfg.hidden, cfg.classifier_hidden, rng));
        cls_b1_ = Param(Tensor(1, cfg.classifier_hidden));
        cls_w2_ = Param(glorot(cfg.classifier_hidden, 1, rng));
        cls_b2_ = Param(Tensor(1, 1));
    }

    const GnnConfig& config() const { return cfg_; }

    std::vector<Param*> params() {
        std::vector<Param*> ps;
        for (Param& p : layers_) ps.push_back(&p);
        ps.push_back(&residual_);
        for (Param& p : att_w_) ps.push_back(&p);
        for (Param& p : att_a_) ps.push_back(&p);
        ps.push_back(&cls_w1_);
        ps.push_back(&cls_b1_);
        ps.push_back(&cls_w2_);
        ps.push_back(&cls_b2_);
        return ps;
    }

    NamedParams named_params() {
        NamedParams np;
        for (size_t l = 0; l < layers_.size(); ++l) np.add("gcn_w" + std::to_string(l + 1), layers_[l]);
        np.add("residual_p", residual_);
        for (size_t k = 0; k < att_w_.size(); ++k) {
            np.add("att_w" + std::to_string(k + 1), att_w_[k]);
            np.add("att_a" + std::to_string(k + 1), att_a_[k]);
        }
        np.add("cls_w1", cls_w1_);
        np.add("cls_b1", cls_b1_);
        np.add("cls_w2", cls_w2_);
        np.add("cls_b2", cls_b2_);
        return np;
    }

    Param& layer(int l) { return layers_.at(l); }
    Param& residual() { return residual_; }
    Param& attention_w(int k) { return att_w_.at(k); }
    Param& attention_a(int k) { return att_a_.at(k); }
    Param& classifier_w1() { return cls_w1_; }
    Param& classifier_b1() { return cls_b1_; }
    Param& classifier_w2() { return cls_w2_; }
    Param& classifier_b2() { return cls_b2_; }

private:
    static Tensor glorot(int rows, int cols, Rng& rng) {
        Tensor t(rows, cols);
        const double limit = std::sqrt(6.0 / (rows + cols));
        for (double& x : t.v) x = (rng.uniform() * 2.0 - 1.0) * limit;
        return t;
    }

    GnnConfig cfg_;
    std::vector<Param> layers_;
    Param residual_;
    std::vector<Param> att_w_, att_a_;
    Param cls_w1_, cls_b1_, cls_w2_, cls_b2_;
};

/// Symmetric GCN normalization D̃^(-1/2)(A+I)D̃^(-1/2) over the collapsed
/// undirected 0/1 adjacency (relation types are exploited during meta-path
/// filtering, not inside the convolution).
inline Tensor normalize_adjacency(const Subgraph& sub) {
    const int n = sub.size();
    if (n == 0) throw std::invalid_argument("normalize_adjacency: empty subgraph");
    Tensor a(n, n);
    for (int i = 0; i < n; ++i) a.at(i, i) = 1.0;
    for (const TypedEdge& e : sub.local_adjacency) {
        a.at(e.src, e.dst) = 1.0;
        a.at(e.dst, e.src) = 1.0;
    }
    std::vector<double> deg(n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) deg[i] += a.at(i, j);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (a.at(i, j) != 0.0) a.at(i, j) /= std::sqrt(deg[i] * deg[j]);
    return a;
}

/// H^(0) = X; H^(i) = ReLU(Â H^(i-1) W_i) through the first l shared layers;
/// the residual projection X P is re-added to every node row at the end.
inline Tape::Var forward_stack(Tape& tape, GnnStack& stack, const Subgraph& sub, int l,
                               const Tensor* cached_adj = nullptr) {
    if (l < 1 || l > stack.config().l_max)
        throw std::invalid_argument("forward_stack: layer count out of range");
    const Tensor norm_adj = cached_adj ? *cached_adj : normalize_adjacency(sub);
    Tape::Var a_hat = tape.leaf(norm_adj);
    Tape::Var x = tape.leaf(Tensor::from_rows(sub.local_features));
    Tape::Var h = x;
    for (int i = 0; i < l; ++i)
        h = tape.relu(tape.matmul(tape.matmul(a_hat, h), tape.param(stack.layer(i))));
    return tape.add(h, tape.matmul(x, tape.param(stack.residual())));
}

/// Mean-pool node embeddings into one subgraph vector.
inline Tape::Var readout(Tape& tape, Tape::Var node_embeddings) {
    return tape.mean_rows(node_embeddings);
}

struct SubgraphEmbedding {
    Tape::Var z_pre;          // post-readout
    const Subgraph* sub = nullptr;
    int target = -1;
};

inline bool subgraphs_overlap(const Subgraph& a, const Subgraph& b) {
    // local_nodes is sorted from index 1; fold the center in during the scan.
    size_t i = 1, j = 1;
    auto item = [](const Subgraph& s, size_t ix) { return s.local_nodes[ix]; };
    if (std::binary_search(b.local_nodes.begin() + 1, b.local_nodes.end(), a.center) ||
        b.center == a.center)
        return true;
    if (std::binary_search(a.local_nodes.begin() + 1, a.local_nodes.end(), b.center)) return true;
    while (i < a.local_nodes.size() && j < b.local_nodes.size()) {
        if (item(a, i) == item(b, j)) return true;
        if (item(a, i) < item(b, j))
            ++i;
        else
            ++j;
    }
    return false;
}

/// GAT-style attention across relevant subgraphs in the batch:
/// e^k_ij = LeakyReLU(a_k · [W_k z_i ‖ W_k z_j]), softmax over J(i),
/// z_i = (1/K) Σ_k Σ_j α^k_ij W_k z_j. J(i) is self plus every batch member
/// whose subgraph shares a node.
inline std::vector<Tape::Var> attention_aggregate(
    Tape& tape, GnnStack& stack, const std::vector<SubgraphEmbedding>& batch,
    const std::function<bool(size_t, size_t)>& relevant) {
    if (batch.empty()) throw std::invalid_argument("attention_aggregate: empty batch");
    const size_t n = batch.size();
    const int heads = stack.config().attention_heads;
    const double slope = stack.config().leaky_slope;

    std::vector<std::vector<size_t>> neighborhood(n);
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j < n; ++j)
            if (i == j || relevant(i, j)) neighborhood[i].push_back(j);
    }

    std::vector<Tape::Var> out(n);
    std::vector<Tape::Var> projected(n);
    for (int k = 0; k < heads; ++k) {
        Tape::Var w = tape.param(stack.attention_w(k));
        Tape::Var a = tape.param(stack.attention_a(k));
        for (size_t j = 0; j < n; ++j) projected[j] = tape.matmul(batch[j].z_pre, w);
        for (size_t i = 0; i < n; ++i) {
            const auto& nbr = neighborhood[i];
            std::vector<Tape::Var> scores(nbr.size());
            for (size_t t = 0; t < nbr.size(); ++t)
                scores[t] = tape.leaky_relu(
                    tape.dot(a, tape.row_concat(projected[i], projected[nbr[t]])), slope);
            Tape::Var alpha = tape.softmax_rows(tape.stack_scalars(scores));
            std::vector<Tape::Var> rows(nbr.size());
            for (size_t t = 0; t < nbr.size(); ++t) rows[t] = projected[nbr[t]];
            Tape::Var mixed = tape.matmul(alpha, tape.concat_rows(rows));
            out[i] = out[i].valid() ? tape.add(out[i], mixed) : mixed;
        }
    }
    for (size_t i = 0; i < n; ++i) out[i] = tape.scale(out[i], 1.0 / heads);
    return out;
}

inline std::vector<Tape::Var> attention_aggregate(Tape& tape, GnnStack& stack,
                                                  const std::vector<SubgraphEmbedding>& batch) {
    return attention_aggregate(tape, stack, batch, [&](size_t i, size_t j) {
        return subgraphs_overlap(*batch[i].sub, *batch[j].sub);
    });
}

/// Raw logit of the bot classifier; predict bot iff sigmoid(logit) > 0.5.
inline Tape::Var classify(Tape& tape, GnnStack& stack, Tape::Var z) {
    Tape::Var h = tape.relu(tape.add(tape.matmul(z, tape.param(stack.classifier_w1())),
                                     tape.param(stack.classifier_b1())));
    return tape.add(tape.matmul(h, tape.param(stack.classifier_w2())),
                    tape.param(stack.classifier_b2()));
}

/// Positive sample: same center at a different width drawn from [1,K_max]\{k}.
/// Negative sample: another target user at the same width.
inline std::pair<Subgraph, Subgraph> ssl_sample(const HetGraph& g, int center, int k,
                                                const std::vector<int>& targets, int k_max,
                                                uint64_t seed) {
    if (k_max < 2) throw std::invalid_argument("ssl_sample: K_max must be >= 2");
    if (targets.size() < 2) throw std::invalid_argument("ssl_sample: need at least two targets");
    Rng rng(derive_seed(seed, "ssl"));

    std::vector<int> widths;
    for (int w = 1; w <= k_max; ++w)
        if (w != k) widths.push_back(w);
    const int pos_width = widths[static_cast<size_t>(
        rng.uniform_int(0, static_cast<int>(widths.size()) - 1))];

    std::vector<int> others;
    for (int t : targets)
        if (t != center) others.push_back(t);
    const int neg_center =
        others[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(others.size()) - 1))];

    return {extract_subgraph(g, center, pos_width), extract_subgraph(g, neg_center, k)};
}

/// Margin triplet loss over sigmoid similarities. AsPrinted keeps the leading
/// minus sign of the published form, -max(σ(z·z⁺) - σ(z·z̄) + ε, 0);
/// StandardHinge is the conventional max(σ(z·z̄) - σ(z·z⁺) + ε, 0).
inline Tape::Var ssl_loss(Tape& tape, Tape::Var z, Tape::Var z_pos, Tape::Var z_neg, double margin,
                          SslForm form = SslForm::AsPrinted) {
    Tape::Var sim_pos = tape.sigmoid(tape.dot(z, z_pos));
    Tape::Var sim_neg = tape.sigmoid(tape.dot(z, z_neg));
    if (form == SslForm::AsPrinted)
        return tape.scale(tape.relu(tape.add_const(tape.sub(sim_pos, sim_neg), margin)), -1.0);
    return tape.relu(tape.add_const(tape.sub(sim_neg, sim_pos), margin));
}

/// Σ_i [BCE(logit_i, y_i) + ssl_i] + λ·‖Θ‖₂ with Θ the full stack parameter
/// vector. ssl_terms may be empty (ablated variants).
inline Tape::Var total_loss(Tape& tape, const std::vector<Tape::Var>& logits,
                            const std::vector<double>& labels,
                            const std::vector<Tape::Var>& ssl_terms, double lambda,
                            GnnStack& stack) {
    if (logits.empty() || logits.size() != labels.size())
        throw std::invalid_argument("total_loss: empty or mismatched batch");
    if (!ssl_terms.empty() && ssl_terms.size() != logits.size())
        throw std::invalid_argument("total_loss: ssl term count mismatch");
    Tape::Var loss;
    for (size_t i = 0; i < logits.size(); ++i) {
        Tape::Var term = tape.bce_with_logits(logits[i], labels[i]);
        if (!ssl_terms.empty()) term = tape.add(term, ssl_terms[i]);
        loss = loss.valid() ? tape.add(loss, term) : term;
    }
    if (lambda != 0.0) {
        Tape::Var sq;
        for (Param* p : stack.params()) {
            Tape::Var s = tape.sum_squares(tape.param(*p));
            sq = sq.valid() ? tape.add(sq, s) : s;
        }
        loss = tape.add(loss, tape.scale(tape.sqrt_scalar(sq), lambda));
    }
    return loss;
}

inline void save_gnn_checkpoint(GnnStack& stack, const std::string& path) {
    NamedParams np = stack.named_params();
    ordered_json j = params_to_json(np);
    j["__config__"] = {{"input_dim", stack.config().input_dim},
                       {"hidden", stack.config().hidden},
                       {"l_max", stack.config().l_max},
                       {"attention_heads", stack.config().attention_heads},
                       {"classifier_hidden", stack.config().classifier_hidden}};
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for write: " + path);
    f << j.dump(2) << '\n';
}

inline GnnStack load_gnn_checkpoint(const std::string& path) {
    ordered_json j = load_json_file(path);
    const ordered_json& c = j.at("__config__");
    GnnConfig cfg;
    cfg.input_dim = c.at("input_dim").get<int>();
    cfg.hidden = c.at("hidden").get<int>();
    cfg.l_max = c.at("l_max").get<int>();
    cfg.attention_heads = c.at("attention_heads").get<int>();
    cfg.classifier_hidden = c.at("classifier_hidden").get<int>();
    GnnStack stack(cfg);
    NamedParams np = stack.named_params();
    params_from_json(j, np);
    return stack;
}

}  // namespace rosgas
