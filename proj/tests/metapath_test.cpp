#include <catch2/catch_amalgamated.hpp>

#include <set>
#include <tuple>

#include "rosgas/metapath.hpp"
#include "testutil.hpp"

using namespace rosgas;

namespace {

using EdgeKey = std::tuple<int, int, EdgeType>;

std::set<int> node_orig_set(const HetGraph& g) {
    return {g.orig_id.begin(), g.orig_id.end()};
}

std::multiset<EdgeKey> edge_orig_set(const HetGraph& g) {
    std::multiset<EdgeKey> out;
    for (const TypedEdge& e : g.edges) out.insert({g.orig_id[e.src], g.orig_id[e.dst], e.rel});
    return out;
}

}  // namespace

TEST_CASE("meta path validation") {
    MetaPath good{{{NodeType::User, EdgeType::Post, NodeType::Tweet},
                   {NodeType::Tweet, EdgeType::Retweet, NodeType::Tweet}}};
    CHECK(good.well_formed());
    MetaPath broken{{{NodeType::User, EdgeType::Post, NodeType::Tweet},
                     {NodeType::User, EdgeType::Follow, NodeType::User}}};
    CHECK_FALSE(broken.well_formed());
    CHECK_FALSE(MetaPath{}.well_formed());

    for (const MetaPath& p : default_meta_paths()) CHECK(p.well_formed());
    CHECK(default_meta_paths().size() == 5);

    HetGraph g = build_graph({NodeType::User}, {}, {{1.0}}, {});
    CHECK_THROWS_AS(filter_by_metapaths(g, {}), std::invalid_argument);
    CHECK_THROWS_AS(filter_by_metapaths(g, {broken}), std::invalid_argument);
}

TEST_CASE("follow-only path drops the post edge") {
    HetGraph g = build_graph({NodeType::User, NodeType::User, NodeType::Tweet},
                             {{0, 1, EdgeType::Follow}, {0, 2, EdgeType::Post}},
                             {{1.0}, {2.0}, {3.0}}, {});
    MetaPath follow{{{NodeType::User, EdgeType::Follow, NodeType::User}}};
    HetGraph f = filter_by_metapaths(g, {follow});
    CHECK(node_orig_set(f) == std::set<int>{0, 1});
    REQUIRE(f.edges.size() == 1);
    CHECK(f.edges[0].rel == EdgeType::Follow);
}

TEST_CASE("empty graph filters to empty graph") {
    HetGraph g = build_graph({}, {}, {}, {});
    HetGraph f = filter_by_metapaths(g, default_meta_paths());
    CHECK(f.n_nodes == 0);
    CHECK(f.edges.empty());
}

TEST_CASE("targets survive filtering even when isolated") {
    HetGraph g = build_graph({NodeType::User, NodeType::User, NodeType::User},
                             {{0, 1, EdgeType::Follow}}, {{1.0}, {2.0}, {3.0}}, {{2, 1}});
    MetaPath follow{{{NodeType::User, EdgeType::Follow, NodeType::User}}};
    HetGraph f = filter_by_metapaths(g, {follow});
    CHECK(node_orig_set(f) == std::set<int>{0, 1, 2});
    REQUIRE(f.targets.size() == 1);
    CHECK(f.orig_id[f.targets[0]] == 2);
}

TEST_CASE("matches the DFS instance-enumeration oracle") {
    Rng rng(61);
    const auto paths = default_meta_paths();
    int nonempty = 0;
    for (int trial = 0; trial < 150; ++trial) {
        HetGraph g = testutil::random_het_graph(rng, 12, 0.35);
        HetGraph f = filter_by_metapaths(g, paths);

        std::set<int> oracle_nodes;
        std::set<size_t> oracle_edges;
        for (const MetaPath& p : paths) {
            auto sets = testutil::metapath_oracle(g, p);
            oracle_nodes.insert(sets.nodes.begin(), sets.nodes.end());
            oracle_edges.insert(sets.edges.begin(), sets.edges.end());
        }
        for (int t : g.targets) oracle_nodes.insert(t);  // D-retention rule

        CHECK(node_orig_set(f) == oracle_nodes);
        std::multiset<EdgeKey> expected;
        for (size_t e : oracle_edges)
            expected.insert({g.edges[e].src, g.edges[e].dst, g.edges[e].rel});
        CHECK(edge_orig_set(f) == expected);
        if (!oracle_edges.empty()) ++nonempty;
    }
    CHECK(nonempty > 30);  // the corpus actually exercises path matching
}

TEST_CASE("filtering is idempotent") {
    Rng rng(67);
    const auto paths = default_meta_paths();
    for (int trial = 0; trial < 60; ++trial) {
        HetGraph g = testutil::random_het_graph(rng, 15, 0.3);
        HetGraph once = filter_by_metapaths(g, paths);
        HetGraph twice = filter_by_metapaths(once, paths);
        CHECK(node_orig_set(once) == node_orig_set(twice));
        CHECK(edge_orig_set(once) == edge_orig_set(twice));
        CHECK(once.n_nodes == twice.n_nodes);
    }
}

TEST_CASE("features, labels and masks carry over") {
    HetGraph g = build_graph(
        {NodeType::User, NodeType::User, NodeType::Tweet, NodeType::Hashtag},
        {{0, 1, EdgeType::Follow}, {0, 2, EdgeType::Post}, {2, 3, EdgeType::Contain}},
        {{1.0, 0.0}, {2.0, 0.0}, {3.0, 0.0}, {4.0, 0.0}}, {{0, 1}, {1, 0}});
    g.train_mask = {0};
    g.val_mask = {1};
    MetaPath follow{{{NodeType::User, EdgeType::Follow, NodeType::User}}};
    HetGraph f = filter_by_metapaths(g, {follow});
    REQUIRE(f.n_nodes == 2);
    CHECK(f.features[0] == std::vector<double>{1.0, 0.0});
    CHECK(f.label[0] == 1);
    CHECK(f.label[1] == 0);
    CHECK(f.train_mask == std::vector<int>{0});
    CHECK(f.val_mask == std::vector<int>{1});
}
