#pragma once

// Independent oracles used across the test suites. These deliberately avoid
// the library's own data structures and algorithms wherever they check one.

#include <algorithm>
#include <functional>
#include <map>
#include <set>
#include <vector>

#include "rosgas/hetgraph.hpp"
#include "rosgas/metapath.hpp"
#include "rosgas/optim.hpp"
#include "rosgas/rng.hpp"

namespace testutil {

using rosgas::EdgeType;
using rosgas::HetGraph;
using rosgas::NodeType;
using rosgas::TypedEdge;

// Plain BFS over an explicit undirected adjacency list, independent of the
// library's adjacency index.
inline std::set<int> bfs_oracle(int n_nodes, const std::vector<TypedEdge>& edges, int center,
                                int k) {
    std::vector<std::vector<int>> adj(n_nodes);
    for (const TypedEdge& e : edges) {
        adj[e.src].push_back(e.dst);
        adj[e.dst].push_back(e.src);
    }
    std::set<int> seen{center};
    std::vector<int> frontier{center};
    for (int hop = 0; hop < k && !frontier.empty(); ++hop) {
        std::vector<int> next;
        for (int u : frontier)
            for (int v : adj[u])
                if (seen.insert(v).second) next.push_back(v);
        frontier = std::move(next);
    }
    return seen;
}

// Exhaustive walk counting by recursive enumeration (collapsed undirected
// simple adjacency, walks of length 1..max_len), capped like the library.
inline std::map<int, double> walk_count_oracle(int n_nodes, const std::vector<TypedEdge>& edges,
                                               int start, int max_len) {
    std::set<std::pair<int, int>> pairset;
    for (const TypedEdge& e : edges) {
        if (e.src == e.dst) continue;
        pairset.insert({std::min(e.src, e.dst), std::max(e.src, e.dst)});
    }
    std::vector<std::vector<int>> adj(n_nodes);
    for (auto [a, b] : pairset) {
        adj[a].push_back(b);
        adj[b].push_back(a);
    }
    std::map<int, double> counts;
    std::function<void(int, int)> walk = [&](int u, int remaining) {
        if (remaining == 0) return;
        for (int v : adj[u]) {
            counts[v] += 1.0;
            walk(v, remaining - 1);
        }
    };
    walk(start, max_len);
    return counts;
}

// Enumerates every walk instance of a meta-path by DFS over (position, node),
// recording visited nodes per position and used edges. Type-checked edges may
// be traversed in either direction, matching the library's definition.
struct PathInstanceSets {
    std::set<int> nodes;
    std::set<size_t> edges;
};

inline PathInstanceSets metapath_oracle(const HetGraph& g, const rosgas::MetaPath& path) {
    PathInstanceSets out;
    const size_t L = path.steps.size();
    std::vector<int> node_stack;
    std::vector<size_t> edge_stack;

    std::function<void(int, size_t)> dfs = [&](int u, size_t pos) {
        if (pos == L) {
            out.nodes.insert(node_stack.begin(), node_stack.end());
            out.edges.insert(edge_stack.begin(), edge_stack.end());
            return;
        }
        const rosgas::MetaPathStep& st = path.steps[pos];
        for (size_t e = 0; e < g.edges.size(); ++e) {
            const TypedEdge& ed = g.edges[e];
            if (ed.rel != st.rel) continue;
            int next = -1;
            if (ed.src == u && g.node_type[u] == st.src && g.node_type[ed.dst] == st.dst)
                next = ed.dst;
            else if (ed.dst == u && g.node_type[u] == st.src && g.node_type[ed.src] == st.dst)
                next = ed.src;
            if (next < 0) continue;
            node_stack.push_back(next);
            edge_stack.push_back(e);
            dfs(next, pos + 1);
            node_stack.pop_back();
            edge_stack.pop_back();
        }
    };

    for (int v = 0; v < g.n_nodes; ++v) {
        if (g.node_type[v] != path.steps[0].src) continue;
        node_stack.push_back(v);
        dfs(v, 0);
        node_stack.pop_back();
    }
    return out;
}

// Random schema-conformant typed graph for property tests.
inline HetGraph random_het_graph(rosgas::Rng& rng, int max_nodes, double edge_density = 0.15,
                                 int feature_dim = 4) {
    const int n = rng.uniform_int(2, max_nodes);
    std::vector<NodeType> nodes(n);
    for (int i = 0; i < n; ++i)
        nodes[i] = static_cast<NodeType>(rng.uniform_int(0, rosgas::kNodeTypeCount - 1));
    // Force at least two users so targets exist.
    nodes[0] = NodeType::User;
    nodes[1] = NodeType::User;

    auto legal_rel = [](NodeType a, NodeType b) -> std::vector<EdgeType> {
        std::vector<EdgeType> rels;
        auto pair_is = [&](NodeType x, NodeType y) {
            return (a == x && b == y) || (a == y && b == x);
        };
        if (pair_is(NodeType::User, NodeType::User)) rels.push_back(EdgeType::Follow);
        if (pair_is(NodeType::User, NodeType::Tweet)) rels.push_back(EdgeType::Post);
        if (pair_is(NodeType::User, NodeType::Comment)) rels.push_back(EdgeType::Write);
        if (pair_is(NodeType::Comment, NodeType::Tweet)) rels.push_back(EdgeType::Reply);
        if (pair_is(NodeType::Tweet, NodeType::Tweet)) rels.push_back(EdgeType::Retweet);
        if (pair_is(NodeType::Tweet, NodeType::Hashtag) || pair_is(NodeType::Tweet, NodeType::Entity))
            rels.push_back(EdgeType::Contain);
        return rels;
    };

    std::vector<TypedEdge> edges;
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            if (a == b || !rng.bernoulli(edge_density)) continue;
            const auto rels = legal_rel(nodes[a], nodes[b]);
            if (rels.empty()) continue;
            edges.push_back(TypedEdge{a, b, rels[rng.uniform_int(0, (int)rels.size() - 1)]});
        }

    std::vector<std::vector<double>> features(n, std::vector<double>(feature_dim));
    for (auto& row : features)
        for (double& x : row) x = rng.normal();

    std::vector<std::pair<int, int>> labels;
    for (int i = 0; i < n; ++i)
        if (nodes[i] == NodeType::User && rng.bernoulli(0.6))
            labels.emplace_back(i, rng.bernoulli(0.5) ? 1 : 0);
    if (labels.empty()) labels.emplace_back(0, 1);

    return rosgas::build_graph(std::move(nodes), std::move(edges), std::move(features), labels);
}

// Central finite differences through an arbitrary re-runnable loss.
// Returns the max relative error across every element of every param.
inline double max_grad_rel_error(const std::vector<rosgas::Param*>& params,
                                 const std::function<double()>& loss_fn,
                                 const std::function<void()>& backward_fn, double h = 1e-4) {
    for (rosgas::Param* p : params) p->zero_grad();
    backward_fn();
    std::vector<std::vector<double>> analytic;
    for (rosgas::Param* p : params) analytic.push_back(p->grad.v);

    double worst = 0.0;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        rosgas::Param* p = params[pi];
        for (size_t i = 0; i < p->value.size(); ++i) {
            const double keep = p->value.v[i];
            p->value.v[i] = keep + h;
            const double up = loss_fn();
            p->value.v[i] = keep - h;
            const double down = loss_fn();
            p->value.v[i] = keep;
            const double fd = (up - down) / (2.0 * h);
            const double a = analytic[pi][i];
            const double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-6});
            worst = std::max(worst, rel);
        }
    }
    for (rosgas::Param* p : params) p->zero_grad();
    return worst;
}

}  // namespace testutil
