#pragma once

#include <stdexcept>
#include <vector>

#include "rosgas/hetgraph.hpp"

namespace rosgas {

struct MetaPathStep {
    NodeType src;
    EdgeType rel;
    NodeType dst;
};

/// Typed path pattern over the schema. Steps chain: dst type of step i equals
/// src type of step i+1. Instances traverse edges in either direction as long
/// as the node and relation types match, mirroring the undirected hop
/// traversal used for subgraph extraction.
struct MetaPath {
    std::vector<MetaPathStep> steps;

    bool well_formed() const {
        if (steps.empty()) return false;
        for (size_t i = 1; i < steps.size(); ++i)
            if (steps[i - 1].dst != steps[i].src) return false;
        return true;
    }

    size_t length() const { return steps.size(); }
};

/// The default path set: friendship, retweet interaction, comment interaction,
/// shared hashtag and shared entity between two users.
inline std::vector<MetaPath> default_meta_paths() {
    using N = NodeType;
    using E = EdgeType;
    std::vector<MetaPath> paths;
    paths.push_back({{{N::User, E::Follow, N::User}}});
    paths.push_back({{{N::User, E::Post, N::Tweet},
                      {N::Tweet, E::Retweet, N::Tweet},
                      {N::Tweet, E::Post, N::User}}});
    paths.push_back({{{N::User, E::Write, N::Comment},
                      {N::Comment, E::Reply, N::Tweet},
                      {N::Tweet, E::Post, N::User}}});
    paths.push_back({{{N::User, E::Post, N::Tweet},
                      {N::Tweet, E::Contain, N::Hashtag},
                      {N::Hashtag, E::Contain, N::Tweet},
                      {N::Tweet, E::Post, N::User}}});
    paths.push_back({{{N::User, E::Post, N::Tweet},
                      {N::Tweet, E::Contain, N::Entity},
                      {N::Entity, E::Contain, N::Tweet},
                      {N::Tweet, E::Post, N::User}}});
    return paths;
}

namespace detail {

// Position-indexed reachability for one meta-path: forward[i] marks nodes with
// a prefix instance ending there, backward[i] those with a suffix instance
// starting there. A node sits on a full instance iff both hold at some
// position; an edge does iff its endpoints bridge consecutive positions.
inline void mark_path_members(const HetGraph& g, const MetaPath& p, std::vector<char>& keep_node,
                              std::vector<char>& keep_edge) {
    const size_t L = p.length();
    std::vector<std::vector<char>> fwd(L + 1, std::vector<char>(g.n_nodes, 0));
    std::vector<std::vector<char>> bwd(L + 1, std::vector<char>(g.n_nodes, 0));

    for (int v = 0; v < g.n_nodes; ++v) {
        fwd[0][v] = g.node_type[v] == p.steps[0].src;
        bwd[L][v] = g.node_type[v] == p.steps[L - 1].dst;
    }
    for (size_t i = 1; i <= L; ++i) {
        const MetaPathStep& st = p.steps[i - 1];
        for (const TypedEdge& e : g.edges) {
            if (e.rel != st.rel) continue;
            if (fwd[i - 1][e.src] && g.node_type[e.src] == st.src && g.node_type[e.dst] == st.dst)
                fwd[i][e.dst] = 1;
            if (fwd[i - 1][e.dst] && g.node_type[e.dst] == st.src && g.node_type[e.src] == st.dst)
                fwd[i][e.src] = 1;
        }
    }
    for (size_t i = L; i >= 1; --i) {
        const MetaPathStep& st = p.steps[i - 1];
        for (const TypedEdge& e : g.edges) {
            if (e.rel != st.rel) continue;
            if (bwd[i][e.dst] && g.node_type[e.src] == st.src && g.node_type[e.dst] == st.dst)
                bwd[i - 1][e.src] = 1;
            if (bwd[i][e.src] && g.node_type[e.dst] == st.src && g.node_type[e.src] == st.dst)
                bwd[i - 1][e.dst] = 1;
        }
    }

    for (size_t i = 0; i <= L; ++i)
        for (int v = 0; v < g.n_nodes; ++v)
            if (fwd[i][v] && bwd[i][v]) keep_node[v] = 1;

    for (size_t e = 0; e < g.edges.size(); ++e) {
        const TypedEdge& ed = g.edges[e];
        for (size_t i = 1; i <= L; ++i) {
            const MetaPathStep& st = p.steps[i - 1];
            if (ed.rel != st.rel) continue;
            const bool fwd_use = g.node_type[ed.src] == st.src && g.node_type[ed.dst] == st.dst &&
                                 fwd[i - 1][ed.src] && bwd[i][ed.dst];
            const bool rev_use = g.node_type[ed.dst] == st.src && g.node_type[ed.src] == st.dst &&
                                 fwd[i - 1][ed.dst] && bwd[i][ed.src];
            if (fwd_use || rev_use) {
                keep_edge[e] = 1;
                break;
            }
        }
    }
}

}  // namespace detail

/// Keeps exactly the nodes and edges that lie on at least one instance of some
/// path. Target users survive unconditionally so every detection problem keeps
/// its subject. Node ids are compacted; orig_id records provenance.
inline HetGraph filter_by_metapaths(const HetGraph& g, const std::vector<MetaPath>& paths) {
    if (paths.empty()) throw std::invalid_argument("filter_by_metapaths: empty path set");
    for (const MetaPath& p : paths)
        if (!p.well_formed()) throw std::invalid_argument("filter_by_metapaths: malformed path");

    std::vector<char> keep_node(g.n_nodes, 0);
    std::vector<char> keep_edge(g.edges.size(), 0);
    for (const MetaPath& p : paths) detail::mark_path_members(g, p, keep_node, keep_edge);
    for (int t : g.targets) keep_node[t] = 1;

    std::vector<int> new_id(g.n_nodes, -1);
    HetGraph out;
    for (int v = 0; v < g.n_nodes; ++v) {
        if (!keep_node[v]) continue;
        new_id[v] = out.n_nodes++;
        out.node_type.push_back(g.node_type[v]);
        out.features.push_back(g.features[v]);
        out.label.push_back(g.label[v]);
        out.orig_id.push_back(g.orig_id[v]);
        if (g.label[v] != kUnlabeled) out.targets.push_back(new_id[v]);
    }
    for (size_t e = 0; e < g.edges.size(); ++e) {
        if (!keep_edge[e]) continue;
        const TypedEdge& ed = g.edges[e];
        out.edges.push_back(TypedEdge{new_id[ed.src], new_id[ed.dst], ed.rel});
    }
    auto remap = [&](const std::vector<int>& mask) {
        std::vector<int> m;
        for (int v : mask)
            if (new_id[v] >= 0) m.push_back(new_id[v]);
        return m;
    };
    out.train_mask = remap(g.train_mask);
    out.val_mask = remap(g.val_mask);
    out.test_mask = remap(g.test_mask);
    detail::build_adjacency(out);
    return out;
}

}  // namespace rosgas
