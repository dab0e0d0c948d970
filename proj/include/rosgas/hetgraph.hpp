#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace rosgas {

enum class NodeType : uint8_t { User, Tweet, Comment, Hashtag, Entity };
enum class EdgeType : uint8_t { Follow, Post, Write, Reply, Retweet, Contain };

constexpr int kNodeTypeCount = 5;
constexpr int kEdgeTypeCount = 6;

inline const char* to_string(NodeType t) {
    switch (t) {
        case NodeType::User: return "User";
        case NodeType::Tweet: return "Tweet";
        case NodeType::Comment: return "Comment";
        case NodeType::Hashtag: return "Hashtag";
        case NodeType::Entity: return "Entity";
    }
    return "?";
}

inline const char* to_string(EdgeType t) {
    switch (t) {
        case EdgeType::Follow: return "Follow";
        case EdgeType::Post: return "Post";
        case EdgeType::Write: return "Write";
        case EdgeType::Reply: return "Reply";
        case EdgeType::Retweet: return "Retweet";
        case EdgeType::Contain: return "Contain";
    }
    return "?";
}

inline std::optional<NodeType> node_type_from(const std::string& s) {
    if (s == "User") return NodeType::User;
    if (s == "Tweet") return NodeType::Tweet;
    if (s == "Comment") return NodeType::Comment;
    if (s == "Hashtag") return NodeType::Hashtag;
    if (s == "Entity") return NodeType::Entity;
    return std::nullopt;
}

inline std::optional<EdgeType> edge_type_from(const std::string& s) {
    if (s == "Follow") return EdgeType::Follow;
    if (s == "Post") return EdgeType::Post;
    if (s == "Write") return EdgeType::Write;
    if (s == "Reply") return EdgeType::Reply;
    if (s == "Retweet") return EdgeType::Retweet;
    if (s == "Contain") return EdgeType::Contain;
    return std::nullopt;
}

struct TypedEdge {
    int src;
    int dst;
    EdgeType rel;
};

constexpr int8_t kUnlabeled = -1;

/// Typed multi-relational graph. Immutable after build; all reads are
/// thread-safe. The label vector uses -1 for unlabeled, 0/1 for labeled users.
struct HetGraph {
    int n_nodes = 0;
    std::vector<NodeType> node_type;
    std::vector<TypedEdge> edges;
    std::vector<std::vector<double>> features;
    std::vector<int8_t> label;
    std::vector<int> targets;  // labeled User ids, ascending (the set D)
    std::vector<int> train_mask, val_mask, test_mask;
    // Provenance of each node in the graph this one was filtered from
    // (identity after build_graph).
    std::vector<int> orig_id;
    // Undirected incidence: per node, (neighbor, edge index) sorted by edge index.
    std::vector<std::vector<std::pair<int, int>>> adj;

    int feature_dim() const { return features.empty() ? 0 : static_cast<int>(features[0].size()); }

    bool is_target(int v) const {
        return std::binary_search(targets.begin(), targets.end(), v);
    }
};

/// k-hop induced neighborhood of a target user. Nodes are global ids with the
/// center first and the rest ascending; local_adjacency uses local indices.
struct Subgraph {
    int center = -1;
    int width = 0;
    std::vector<int> local_nodes;
    std::vector<TypedEdge> local_adjacency;
    std::vector<std::vector<double>> local_features;

    int size() const { return static_cast<int>(local_nodes.size()); }
};

namespace detail {

inline void build_adjacency(HetGraph& g) {
    g.adj.assign(g.n_nodes, {});
    for (int e = 0; e < static_cast<int>(g.edges.size()); ++e) {
        const TypedEdge& ed = g.edges[e];
        g.adj[ed.src].emplace_back(ed.dst, e);
        if (ed.dst != ed.src) g.adj[ed.dst].emplace_back(ed.src, e);
    }
}

}  // namespace detail

inline HetGraph build_graph(std::vector<NodeType> nodes, std::vector<TypedEdge> edges,
                            std::vector<std::vector<double>> features,
                            const std::vector<std::pair<int, int>>& labels) {
    HetGraph g;
    g.n_nodes = static_cast<int>(nodes.size());
    if (features.size() != nodes.size())
        throw std::invalid_argument("build_graph: features/nodes size mismatch");
    const size_t d = features.empty() ? 0 : features[0].size();
    for (const auto& f : features)
        if (f.size() != d) throw std::invalid_argument("build_graph: feature dimension mismatch");
    for (const TypedEdge& e : edges)
        if (e.src < 0 || e.src >= g.n_nodes || e.dst < 0 || e.dst >= g.n_nodes)
            throw std::invalid_argument("build_graph: edge references unknown node");
    g.node_type = std::move(nodes);
    g.edges = std::move(edges);
    g.features = std::move(features);
    g.label.assign(g.n_nodes, kUnlabeled);
    for (auto [id, y] : labels) {
        if (id < 0 || id >= g.n_nodes) throw std::invalid_argument("build_graph: label on unknown node");
        if (g.node_type[id] != NodeType::User)
            throw std::invalid_argument("build_graph: label on non-User node");
        if (y != 0 && y != 1) throw std::invalid_argument("build_graph: label must be 0 or 1");
        g.label[id] = static_cast<int8_t>(y);
    }
    for (int i = 0; i < g.n_nodes; ++i)
        if (g.label[i] != kUnlabeled) g.targets.push_back(i);
    g.orig_id.resize(g.n_nodes);
    for (int i = 0; i < g.n_nodes; ++i) g.orig_id[i] = i;
    detail::build_adjacency(g);
    return g;
}

/// All nodes within undirected hop distance <= k of center, induced edges
/// included, center first then ascending global id.
inline Subgraph extract_subgraph(const HetGraph& g, int center, int k) {
    if (center < 0 || center >= g.n_nodes)
        throw std::invalid_argument("extract_subgraph: unknown center id");
    if (k < 0) throw std::invalid_argument("extract_subgraph: negative hop count");

    std::vector<int> dist(g.n_nodes, -1);
    std::deque<int> queue{center};
    dist[center] = 0;
    std::vector<int> members{center};
    while (!queue.empty()) {
        const int u = queue.front();
        queue.pop_front();
        if (dist[u] == k) continue;
        for (auto [v, e] : g.adj[u]) {
            if (dist[v] >= 0) continue;
            dist[v] = dist[u] + 1;
            members.push_back(v);
            queue.push_back(v);
        }
    }

    Subgraph sub;
    sub.center = center;
    sub.width = k;
    std::sort(members.begin() + 1, members.end());
    sub.local_nodes = std::move(members);

    std::unordered_map<int, int> local_ix;
    local_ix.reserve(sub.local_nodes.size());
    for (int i = 0; i < sub.size(); ++i) local_ix[sub.local_nodes[i]] = i;

    // Induced edges: walk members' incidence lists, dedupe by edge index.
    std::vector<int> edge_ids;
    for (int v : sub.local_nodes)
        for (auto [_, e] : g.adj[v]) edge_ids.push_back(e);
    std::sort(edge_ids.begin(), edge_ids.end());
    edge_ids.erase(std::unique(edge_ids.begin(), edge_ids.end()), edge_ids.end());
    for (int e : edge_ids) {
        const TypedEdge& ed = g.edges[e];
        auto si = local_ix.find(ed.src);
        auto di = local_ix.find(ed.dst);
        if (si == local_ix.end() || di == local_ix.end()) continue;
        sub.local_adjacency.push_back(TypedEdge{si->second, di->second, ed.rel});
    }

    sub.local_features.reserve(sub.local_nodes.size());
    for (int v : sub.local_nodes) sub.local_features.push_back(g.features[v]);
    return sub;
}

/// Connection strength from the subgraph's center to every target in D:
/// the number of distinct walks of length <= 2k inside the subgraph (capped at
/// 1e6 per pair), L1-normalized. Targets outside the subgraph get 0; when
/// nothing is reachable the distribution falls back to uniform over
/// D \ {center} so the environment never stalls.
inline std::vector<double> transition_distribution(const HetGraph& g, const Subgraph& sub,
                                                   const std::vector<int>& targets) {
    if (targets.empty()) throw std::invalid_argument("transition_distribution: empty target set");
    (void)g;
    constexpr double kPairCap = 1e6;

    const int n = sub.size();
    // Collapsed undirected 0/1 adjacency in local ids (parallel edges merge).
    std::vector<std::vector<int>> nbr(n);
    {
        std::vector<std::pair<int, int>> pairs;
        pairs.reserve(sub.local_adjacency.size());
        for (const TypedEdge& e : sub.local_adjacency) {
            if (e.src == e.dst) continue;
            pairs.emplace_back(std::min(e.src, e.dst), std::max(e.src, e.dst));
        }
        std::sort(pairs.begin(), pairs.end());
        pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
        for (auto [a, b] : pairs) {
            nbr[a].push_back(b);
            nbr[b].push_back(a);
        }
    }

    std::unordered_map<int, int> local_ix;
    for (int i = 0; i < n; ++i) local_ix[sub.local_nodes[i]] = i;

    // Walk counts from the center, truncated at 2k steps.
    std::vector<double> walks(n, 0.0);
    std::vector<double> cur(n, 0.0), next(n, 0.0);
    cur[0] = 1.0;  // center is local index 0
    const int max_len = 2 * sub.width;
    for (int step = 0; step < max_len; ++step) {
        std::fill(next.begin(), next.end(), 0.0);
        for (int u = 0; u < n; ++u) {
            if (cur[u] == 0.0) continue;
            for (int v : nbr[u]) next[v] += cur[u];
        }
        for (int v = 0; v < n; ++v) {
            next[v] = std::min(next[v], kPairCap);  // keep counts exact in double
            walks[v] += next[v];
        }
        cur.swap(next);
    }

    std::vector<double> w(targets.size(), 0.0);
    double total = 0.0;
    for (size_t t = 0; t < targets.size(); ++t) {
        if (targets[t] == sub.center) continue;
        auto it = local_ix.find(targets[t]);
        if (it == local_ix.end()) continue;
        w[t] = std::min(walks[it->second], kPairCap);
        total += w[t];
    }
    if (total == 0.0) {
        int others = 0;
        for (int t : targets) others += (t != sub.center);
        if (others == 0) {
            w.assign(targets.size(), 1.0 / static_cast<double>(targets.size()));
            return w;  // degenerate single-target set: self-loop
        }
        for (size_t t = 0; t < targets.size(); ++t)
            w[t] = targets[t] == sub.center ? 0.0 : 1.0 / others;
        return w;
    }
    for (double& x : w) x /= total;
    return w;
}

}  // namespace rosgas
