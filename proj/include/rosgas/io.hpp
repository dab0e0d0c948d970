#pragma once

#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rosgas/hetgraph.hpp"
#include "rosgas/optim.hpp"

namespace rosgas {

using ordered_json = nlohmann::ordered_json;

/// Writes the graph as JSON Lines: node records first, then edges, so every
/// edge only references ids already declared.
inline void write_graph_jsonl(const HetGraph& g, std::ostream& os) {
    for (int i = 0; i < g.n_nodes; ++i) {
        ordered_json rec;
        rec["t"] = "node";
        rec["id"] = i;
        rec["type"] = to_string(g.node_type[i]);
        rec["x"] = g.features[i];
        if (g.label[i] != kUnlabeled) rec["y"] = static_cast<int>(g.label[i]);
        os << rec.dump() << '\n';
    }
    for (const TypedEdge& e : g.edges) {
        ordered_json rec;
        rec["t"] = "edge";
        rec["src"] = e.src;
        rec["dst"] = e.dst;
        rec["rel"] = to_string(e.rel);
        os << rec.dump() << '\n';
    }
}

inline HetGraph read_graph_jsonl(std::istream& is) {
    std::vector<NodeType> nodes;
    std::vector<TypedEdge> edges;
    std::vector<std::vector<double>> features;
    std::vector<std::pair<int, int>> labels;
    std::string line;
    size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        ordered_json rec = ordered_json::parse(line, nullptr, true);
        const std::string kind = rec.at("t").get<std::string>();
        if (kind == "node") {
            const int id = rec.at("id").get<int>();
            if (id != static_cast<int>(nodes.size()))
                throw std::invalid_argument("graph jsonl line " + std::to_string(lineno) +
                                            ": node ids must be dense and in order");
            auto nt = node_type_from(rec.at("type").get<std::string>());
            if (!nt)
                throw std::invalid_argument("graph jsonl line " + std::to_string(lineno) +
                                            ": unknown node type");
            nodes.push_back(*nt);
            features.push_back(rec.at("x").get<std::vector<double>>());
            if (rec.contains("y")) labels.emplace_back(id, rec.at("y").get<int>());
        } else if (kind == "edge") {
            auto et = edge_type_from(rec.at("rel").get<std::string>());
            if (!et)
                throw std::invalid_argument("graph jsonl line " + std::to_string(lineno) +
                                            ": unknown edge type");
            const int src = rec.at("src").get<int>();
            const int dst = rec.at("dst").get<int>();
            if (src >= static_cast<int>(nodes.size()) || dst >= static_cast<int>(nodes.size()))
                throw std::invalid_argument("graph jsonl line " + std::to_string(lineno) +
                                            ": edge precedes its nodes");
            edges.push_back(TypedEdge{src, dst, *et});
        } else {
            throw std::invalid_argument("graph jsonl line " + std::to_string(lineno) +
                                        ": unknown record kind");
        }
    }
    return build_graph(std::move(nodes), std::move(edges), std::move(features), labels);
}

inline void write_graph_file(const HetGraph& g, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for write: " + path);
    write_graph_jsonl(g, f);
}

inline HetGraph read_graph_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open graph file: " + path);
    return read_graph_jsonl(f);
}

/// Checkpoints are flat JSON maps of named arrays with explicit shapes.
struct NamedParams {
    std::vector<std::pair<std::string, Param*>> items;

    void add(std::string name, Param& p) { items.emplace_back(std::move(name), &p); }
};

inline ordered_json params_to_json(const NamedParams& np) {
    ordered_json out;
    for (const auto& [name, p] : np.items) {
        ordered_json entry;
        entry["shape"] = {p->value.rows, p->value.cols};
        entry["data"] = p->value.v;
        out[name] = std::move(entry);
    }
    return out;
}

inline void params_from_json(const ordered_json& j, NamedParams& np) {
    for (auto& [name, p] : np.items) {
        if (!j.contains(name)) throw std::invalid_argument("checkpoint: missing tensor " + name);
        const ordered_json& entry = j.at(name);
        const auto shape = entry.at("shape").get<std::vector<int>>();
        if (shape.size() != 2 || shape[0] != p->value.rows || shape[1] != p->value.cols)
            throw std::invalid_argument("checkpoint: shape mismatch for " + name);
        auto data = entry.at("data").get<std::vector<double>>();
        if (data.size() != p->value.size())
            throw std::invalid_argument("checkpoint: data length mismatch for " + name);
        p->value.v = std::move(data);
    }
}

inline void save_params_file(const NamedParams& np, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for write: " + path);
    f << params_to_json(np).dump(2) << '\n';
}

inline ordered_json load_json_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open file: " + path);
    return ordered_json::parse(f);
}

}  // namespace rosgas
