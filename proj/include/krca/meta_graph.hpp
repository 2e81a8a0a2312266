#pragma once

#include <map>
#include <string>
#include <vector>

#include "krca/state_graph.hpp"

namespace krca {

// Kind-level quadruplet (srcKind, destKind, key, type) with the number of
// StateGraph edges it covers.
struct MetaEdge {
    std::string src_kind;
    std::string dest_kind;
    FlatKey key;
    EdgeType type = EdgeType::ReferInternal;
    std::int64_t frequency = 0;
};

bool operator==(const MetaEdge& a, const MetaEdge& b);

enum class VertexCategory { NativeEntity, ExternalEntity, Snapshot };

const char* vertex_category_name(VertexCategory category);

class MetaGraph {
public:
    const std::map<std::string, VertexCategory>& vertices() const { return vertices_; }
    const std::vector<MetaEdge>& edges() const { return edges_; }

    bool has_kind(const std::string& kind) const { return vertices_.count(kind) > 0; }
    VertexCategory category(const std::string& kind) const;

    // Entity kinds only (Snapshot vertices excluded), sorted.
    std::vector<std::string> entity_kinds() const;

    Json to_json() const;
    static MetaGraph from_json(const Json& doc);
    std::string to_dot() const;

private:
    friend MetaGraph build_meta_graph(const std::vector<MetaEdge>&, const Config&);
    std::map<std::string, VertexCategory> vertices_;
    std::vector<MetaEdge> edges_;  // sorted by (src, dest, key, type)
};

std::vector<MetaEdge> extract_quadruplets(const StateGraph& graph);

MetaGraph build_meta_graph(const std::vector<MetaEdge>& quadruplets, const Config& config);
MetaGraph build_meta_graph(const StateGraph& graph, const Config& config);

enum class StepDirection { Forward, Reverse };

// One metapath step; (src_kind, dest_kind) is the edge's canonical direction,
// `direction` is how the path walks it.
struct MetapathStep {
    EdgeType type = EdgeType::ReferInternal;
    std::string src_kind;
    std::string dest_kind;
    FlatKey key;
    StepDirection direction = StepDirection::Forward;
};

struct Metapath {
    std::vector<MetapathStep> steps;

    bool empty() const { return steps.empty(); }
    std::size_t size() const { return steps.size(); }
};

std::string step_from_kind(const MetapathStep& step);  // kind the walk leaves
std::string step_to_kind(const MetapathStep& step);    // kind the walk enters

// Kind sequence visited by the walk, starting from `start`.
std::vector<std::string> path_kind_sequence(const Metapath& path, const std::string& start);

struct MetapathLimits {
    int max_len = 4;
    int max_paths = 10;
};

// Simple paths from srcKind to destKind over entity-kind vertices, traversed
// ignoring edge direction. Ranked by interKinds covered (desc), length (asc),
// minimum step frequency (desc), then step keys; fully deterministic.
std::vector<Metapath> find_metapaths(const MetaGraph& meta, const std::string& src_kind,
                                     const std::string& dest_kind,
                                     const std::vector<std::string>& inter_kinds,
                                     const MetapathLimits& limits);

// Prepends EVENT -> Event -> srcKind so a query can anchor at the incident's
// event vertex.
Metapath extend_metapath(const Metapath& path, const std::string& src_kind);

// One step per line: "type, srcKind, destKind, key;".
std::string serialize_metapath(const Metapath& path);

// Inverse of serialize_metapath; traversal directions are recovered from the
// connectivity of consecutive steps.
Metapath parse_metapath(const std::string& text);

}  // namespace krca
