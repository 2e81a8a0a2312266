#include "krca/meta_graph.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <set>
#include <sstream>

#include "krca/error.hpp"

namespace krca {

bool operator==(const MetaEdge& a, const MetaEdge& b) {
    return a.src_kind == b.src_kind && a.dest_kind == b.dest_kind && a.key == b.key &&
           a.type == b.type && a.frequency == b.frequency;
}

const char* vertex_category_name(VertexCategory category) {
    switch (category) {
        case VertexCategory::NativeEntity: return "NativeEntity";
        case VertexCategory::ExternalEntity: return "ExternalEntity";
        case VertexCategory::Snapshot: return "Snapshot";
    }
    return "?";
}

VertexCategory MetaGraph::category(const std::string& kind) const {
    auto it = vertices_.find(kind);
    if (it == vertices_.end()) fail(ErrorCode::UnknownKind, "kind '" + kind + "' not in meta graph");
    return it->second;
}

std::vector<std::string> MetaGraph::entity_kinds() const {
    std::vector<std::string> out;
    for (const auto& [kind, category] : vertices_)
        if (category != VertexCategory::Snapshot) out.push_back(kind);
    return out;
}

Json MetaGraph::to_json() const {
    Json doc = Json::object();
    doc["format"] = "krca-metagraph";
    doc["version"] = 1;
    Json vertices = Json::array();
    for (const auto& [kind, category] : vertices_) {
        Json v = Json::object();
        v["kind"] = kind;
        v["category"] = vertex_category_name(category);
        vertices.push_back(std::move(v));
    }
    doc["vertices"] = std::move(vertices);
    Json edges = Json::array();
    for (const auto& e : edges_) {
        Json j = Json::object();
        j["srcKind"] = e.src_kind;
        j["destKind"] = e.dest_kind;
        j["key"] = e.key;
        j["type"] = edge_type_name(e.type);
        j["frequency"] = e.frequency;
        edges.push_back(std::move(j));
    }
    doc["edges"] = std::move(edges);
    return doc;
}

MetaGraph MetaGraph::from_json(const Json& doc) {
    if (doc.value("format", "") != "krca-metagraph")
        fail(ErrorCode::Parse, "not a serialized meta graph");
    MetaGraph meta;
    for (const auto& v : doc.at("vertices")) {
        std::string name = v.at("category").get<std::string>();
        VertexCategory category = VertexCategory::NativeEntity;
        if (name == "ExternalEntity") category = VertexCategory::ExternalEntity;
        else if (name == "Snapshot") category = VertexCategory::Snapshot;
        meta.vertices_[v.at("kind").get<std::string>()] = category;
    }
    for (const auto& e : doc.at("edges")) {
        MetaEdge edge;
        edge.src_kind = e.at("srcKind").get<std::string>();
        edge.dest_kind = e.at("destKind").get<std::string>();
        edge.key = e.at("key").get<std::string>();
        edge.type = edge_type_from_name(e.at("type").get<std::string>());
        edge.frequency = e.at("frequency").get<std::int64_t>();
        meta.edges_.push_back(std::move(edge));
    }
    return meta;
}

std::string MetaGraph::to_dot() const {
    std::ostringstream out;
    out << "digraph metagraph {\n";
    for (const auto& [kind, category] : vertices_) {
        out << "  \"" << kind << "\" [";
        switch (category) {
            case VertexCategory::NativeEntity: out << "shape=box"; break;
            case VertexCategory::ExternalEntity: out << "shape=ellipse, style=dashed"; break;
            case VertexCategory::Snapshot: out << "shape=note"; break;
        }
        out << "];\n";
    }
    for (const auto& e : edges_) {
        out << "  \"" << e.src_kind << "\" -> \"" << e.dest_kind << "\" [label=\""
            << edge_type_name(e.type) << "\\n" << e.key << " (" << e.frequency << ")\"];\n";
    }
    out << "}\n";
    return out.str();
}

std::vector<MetaEdge> extract_quadruplets(const StateGraph& graph) {
    std::map<std::tuple<std::string, std::string, FlatKey, EdgeType>, std::int64_t> counts;
    for (const auto& [key, edge] : graph.edges()) {
        auto quad = std::make_tuple(graph.vertex_kind(edge.src), graph.vertex_kind(edge.dst),
                                    edge.key, edge.type);
        ++counts[quad];
    }
    std::vector<MetaEdge> out;
    for (const auto& [quad, frequency] : counts) {
        MetaEdge e;
        e.src_kind = std::get<0>(quad);
        e.dest_kind = std::get<1>(quad);
        e.key = std::get<2>(quad);
        e.type = std::get<3>(quad);
        e.frequency = frequency;
        out.push_back(std::move(e));
    }
    return out;  // map iteration keeps this sorted
}

MetaGraph build_meta_graph(const std::vector<MetaEdge>& quadruplets, const Config& config) {
    MetaGraph meta;
    auto categorize = [&config](const std::string& kind) {
        if (config.is_external_kind(kind)) return VertexCategory::ExternalEntity;
        if (!kind.empty() && kind == uppercase_kind(kind)) return VertexCategory::Snapshot;
        return VertexCategory::NativeEntity;
    };
    for (const auto& e : quadruplets) {
        meta.vertices_.emplace(e.src_kind, categorize(e.src_kind));
        meta.vertices_.emplace(e.dest_kind, categorize(e.dest_kind));
    }
    for (const auto& e : quadruplets) {
        auto src_cat = meta.vertices_.at(e.src_kind);
        auto dest_cat = meta.vertices_.at(e.dest_kind);
        if (e.type == EdgeType::ReferInternal &&
            (src_cat == VertexCategory::ExternalEntity || dest_cat == VertexCategory::ExternalEntity))
            fail(ErrorCode::Config, "kind '" +
                                        (src_cat == VertexCategory::ExternalEntity ? e.src_kind
                                                                                   : e.dest_kind) +
                                        "' is declared external but appears in a native-to-native edge");
        if (e.type == EdgeType::UseExternal && dest_cat != VertexCategory::ExternalEntity)
            fail(ErrorCode::Config,
                 "UseExternal edge targets '" + e.dest_kind + "', which is not declared external");
    }
    meta.edges_ = quadruplets;
    std::sort(meta.edges_.begin(), meta.edges_.end(), [](const MetaEdge& a, const MetaEdge& b) {
        return std::tie(a.src_kind, a.dest_kind, a.key, a.type) <
               std::tie(b.src_kind, b.dest_kind, b.key, b.type);
    });
    return meta;
}

MetaGraph build_meta_graph(const StateGraph& graph, const Config& config) {
    return build_meta_graph(extract_quadruplets(graph), config);
}

std::string step_from_kind(const MetapathStep& step) {
    return step.direction == StepDirection::Forward ? step.src_kind : step.dest_kind;
}

std::string step_to_kind(const MetapathStep& step) {
    return step.direction == StepDirection::Forward ? step.dest_kind : step.src_kind;
}

std::vector<std::string> path_kind_sequence(const Metapath& path, const std::string& start) {
    std::vector<std::string> out{start};
    for (const auto& step : path.steps) out.push_back(step_to_kind(step));
    return out;
}

namespace {

struct Ranked {
    Metapath path;
    int inter_count = 0;
    std::int64_t min_freq = 0;
    std::vector<std::string> keys;
    std::string serialized;
};

bool ranked_less(const Ranked& a, const Ranked& b) {
    if (a.inter_count != b.inter_count) return a.inter_count > b.inter_count;
    if (a.path.size() != b.path.size()) return a.path.size() < b.path.size();
    if (a.min_freq != b.min_freq) return a.min_freq > b.min_freq;
    if (a.keys != b.keys) return a.keys < b.keys;
    return a.serialized < b.serialized;
}

}  // namespace

std::vector<Metapath> find_metapaths(const MetaGraph& meta, const std::string& src_kind,
                                     const std::string& dest_kind,
                                     const std::vector<std::string>& inter_kinds,
                                     const MetapathLimits& limits) {
    if (!meta.has_kind(dest_kind))
        fail(ErrorCode::UnknownKind, "destKind '" + dest_kind + "' not in meta graph");
    if (!meta.has_kind(src_kind))
        fail(ErrorCode::UnknownKind, "srcKind '" + src_kind + "' not in meta graph");

    // Adjacency over entity kinds only; self-loops are traversed forward only.
    struct Hop {
        const MetaEdge* edge;
        StepDirection direction;
    };
    std::map<std::string, std::vector<Hop>> adjacency;
    for (const auto& e : meta.edges()) {
        if (meta.category(e.src_kind) == VertexCategory::Snapshot ||
            meta.category(e.dest_kind) == VertexCategory::Snapshot)
            continue;
        adjacency[e.src_kind].push_back({&e, StepDirection::Forward});
        if (e.dest_kind != e.src_kind)
            adjacency[e.dest_kind].push_back({&e, StepDirection::Reverse});
    }

    std::vector<Metapath> found;
    std::vector<MetapathStep> current;
    std::set<std::string> visited{src_kind};

    std::function<void(const std::string&)> dfs = [&](const std::string& kind) {
        auto it = adjacency.find(kind);
        if (it == adjacency.end()) return;
        for (const Hop& hop : it->second) {
            MetapathStep step;
            step.type = hop.edge->type;
            step.src_kind = hop.edge->src_kind;
            step.dest_kind = hop.edge->dest_kind;
            step.key = hop.edge->key;
            step.direction = hop.direction;
            std::string next = step_to_kind(step);
            if (next == dest_kind) {
                current.push_back(step);
                found.push_back(Metapath{current});
                current.pop_back();
                continue;
            }
            if (visited.count(next)) continue;
            if (static_cast<int>(current.size()) + 1 >= limits.max_len) continue;
            current.push_back(step);
            visited.insert(next);
            dfs(next);
            visited.erase(next);
            current.pop_back();
        }
    };
    if (limits.max_len > 0) dfs(src_kind);

    std::map<std::tuple<std::string, std::string, FlatKey, EdgeType>, std::int64_t> freq;
    for (const auto& e : meta.edges())
        freq[{e.src_kind, e.dest_kind, e.key, e.type}] = e.frequency;

    std::vector<Ranked> ranked;
    ranked.reserve(found.size());
    for (auto& path : found) {
        Ranked r;
        std::set<std::string> on_path;
        for (const auto& k : path_kind_sequence(path, src_kind)) on_path.insert(k);
        std::set<std::string> distinct_inter(inter_kinds.begin(), inter_kinds.end());
        for (const auto& inter : distinct_inter)
            if (on_path.count(inter)) ++r.inter_count;
        r.min_freq = std::numeric_limits<std::int64_t>::max();
        for (const auto& step : path.steps) {
            auto it = freq.find({step.src_kind, step.dest_kind, step.key, step.type});
            r.min_freq = std::min(r.min_freq, it == freq.end() ? 0 : it->second);
            r.keys.push_back(step.key);
        }
        r.serialized = serialize_metapath(path);
        r.path = std::move(path);
        ranked.push_back(std::move(r));
    }
    std::sort(ranked.begin(), ranked.end(), ranked_less);

    std::vector<Metapath> out;
    for (auto& r : ranked) {
        out.push_back(std::move(r.path));
        if (static_cast<int>(out.size()) >= limits.max_paths) break;
    }
    return out;
}

Metapath extend_metapath(const Metapath& path, const std::string& src_kind) {
    if (!path.empty() && step_from_kind(path.steps.front()) != src_kind)
        fail(ErrorCode::Contract, "metapath does not start at srcKind '" + src_kind + "'");
    Metapath out;
    out.steps.push_back({EdgeType::HasEvent, "Event", "EVENT", kSnapshotEdgeKey,
                         StepDirection::Reverse});
    out.steps.push_back({EdgeType::ReferInternal, "Event", src_kind, "involvedObject_uid",
                         StepDirection::Forward});
    out.steps.insert(out.steps.end(), path.steps.begin(), path.steps.end());
    return out;
}

std::string serialize_metapath(const Metapath& path) {
    std::ostringstream out;
    for (const auto& step : path.steps)
        out << edge_type_name(step.type) << ", " << step.src_kind << ", " << step.dest_kind << ", "
            << step.key << ";\n";
    return out.str();
}

Metapath parse_metapath(const std::string& text) {
    Metapath path;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        size_t a = line.find_first_not_of(" \t\r");
        if (a == std::string::npos) continue;
        size_t b = line.find_last_not_of(" \t\r");
        std::string s = line.substr(a, b - a + 1);
        if (!s.empty() && s.back() == ';') s.pop_back();
        if (s.empty()) continue;
        std::vector<std::string> fields;
        std::istringstream fs(s);
        std::string field;
        while (std::getline(fs, field, ',')) {
            size_t fa = field.find_first_not_of(" \t");
            size_t fb = field.find_last_not_of(" \t");
            fields.push_back(fa == std::string::npos ? "" : field.substr(fa, fb - fa + 1));
        }
        if (fields.size() != 4)
            fail(ErrorCode::Parse, "metapath line needs 'type, srcKind, destKind, key;': " + s);
        MetapathStep step;
        step.type = edge_type_from_name(fields[0]);
        step.src_kind = fields[1];
        step.dest_kind = fields[2];
        step.key = fields[3];
        path.steps.push_back(std::move(step));
    }

    // Recover traversal directions from step-to-step connectivity.
    std::string current;
    for (size_t i = 0; i < path.steps.size(); ++i) {
        MetapathStep& step = path.steps[i];
        if (i == 0) {
            if (path.steps.size() == 1) {
                step.direction = StepDirection::Forward;
            } else {
                const MetapathStep& next = path.steps[1];
                auto touches = [&next](const std::string& kind) {
                    return next.src_kind == kind || next.dest_kind == kind;
                };
                if (touches(step.dest_kind))
                    step.direction = StepDirection::Forward;
                else if (touches(step.src_kind))
                    step.direction = StepDirection::Reverse;
                else
                    fail(ErrorCode::Parse, "metapath steps are not connected");
            }
        } else {
            if (step.src_kind == current)
                step.direction = StepDirection::Forward;
            else if (step.dest_kind == current)
                step.direction = StepDirection::Reverse;
            else
                fail(ErrorCode::Parse, "metapath step " + std::to_string(i + 1) +
                                           " does not touch kind '" + current + "'");
        }
        current = step_to_kind(step);
    }
    return path;
}

}  // namespace krca
