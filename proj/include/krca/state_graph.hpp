#pragma once

#include <json.hpp>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "krca/config.hpp"
#include "krca/entity.hpp"
#include "krca/incident.hpp"
#include "krca/snapshot.hpp"

namespace krca {

// Stable identifier: "e|<canonical entity key>" for entity vertices,
// "s|<canonical entity key>|<t_min>" for snapshot vertices.
using VertexId = std::string;

VertexId entity_vertex_id(const EntityRef& ref);
VertexId snapshot_vertex_id(const EntityRef& owner, Timestamp t_min);

struct EntityVertex {
    EntityRef ref;
};

// One observed state (or event) of its owning entity; the payload is the
// StateJSON consumed by diagnostics.
struct SnapshotVertex {
    EntityRef owner;
    std::string label;  // uppercased kind, e.g. POD, RESOURCEQUOTA, EVENT
    Timestamp t_min = 0;
    Timestamp t_max = 0;
    Json state_json;
};

struct Edge {
    VertexId src;
    VertexId dst;
    EdgeType type = EdgeType::ReferInternal;
    FlatKey key;  // reference key, or the fixed snapshot-edge marker
    Timestamp t_min = 0;
    Timestamp t_max = 0;
};

// Key carried by HasState/HasEvent edges; matches the uid key that anchors
// the event extension of a metapath.
inline const char* kSnapshotEdgeKey = "metadata_uid";

std::string uppercase_kind(const std::string& kind);

class StateGraph {
public:
    using EdgeKey = std::tuple<VertexId, VertexId, EdgeType, FlatKey>;

    const std::map<VertexId, EntityVertex>& entities() const { return entities_; }
    const std::map<VertexId, SnapshotVertex>& snapshots() const { return snapshots_; }
    const std::map<EdgeKey, Edge>& edges() const { return edges_; }

    const EntityVertex* entity(const VertexId& id) const;
    const SnapshotVertex* snapshot(const VertexId& id) const;
    bool has_vertex(const VertexId& id) const;

    // Kind of either vertex flavor: entity kind, or snapshot label.
    std::string vertex_kind(const VertexId& id) const;

    std::vector<const Edge*> out_edges(const VertexId& src) const;
    std::vector<const Edge*> in_edges(const VertexId& dst) const;

    std::size_t edge_count() const { return edges_.size(); }

    // Checks endpoint existence and the per-type endpoint constraints;
    // throws on violation.
    void validate() const;

    Json to_json() const;
    static StateGraph from_json(const Json& doc, const Config& config);

    // One CREATE statement per vertex, one MATCH..CREATE per edge.
    std::string to_cypher() const;

private:
    friend class StateGraphBuilder;
    std::map<VertexId, EntityVertex> entities_;
    std::map<VertexId, SnapshotVertex> snapshots_;
    std::map<EdgeKey, Edge> edges_;
    std::map<VertexId, std::vector<EdgeKey>> out_index_;
    std::map<VertexId, std::vector<EdgeKey>> in_index_;
    std::vector<std::string> external_kinds_;
};

// Mutable assembly stage; the finished graph is immutable.
class StateGraphBuilder {
public:
    explicit StateGraphBuilder(const Config& config) : config_(config) {}

    void add_entity(const EntityRef& ref);
    void add_snapshot(const EntityRef& owner, Timestamp t_min, Timestamp t_max, Json state_json);
    // Consolidates into an existing edge with the same (src, dst, type, key).
    void add_edge(const VertexId& src, const VertexId& dst, EdgeType type, const FlatKey& key,
                  Timestamp t_min, Timestamp t_max);

    StateGraph build();

private:
    const Config& config_;
    StateGraph graph_;
};

// Envelope union of two ranges of the same logical edge.
Edge consolidate_edge(const Edge& existing, const Edge& incoming);

struct BuildResult {
    StateGraph graph;
    std::vector<std::string> warnings;
};

BuildResult build_state_graph(const std::vector<DedupedSnapshot>& deduped,
                              const EntityKeyCatalog& catalog, const Config& config);

// The snapshot vertex valid at `at`: range containment first, otherwise the
// latest one that ended before `at`. Absence is a first-class answer.
std::optional<SnapshotVertex> latest_state(const StateGraph& graph, const EntityRef& entity,
                                           Timestamp at);

struct IncidentMatch {
    EntityRef event;
    SnapshotVertex event_state;
    std::string src_kind;
    std::vector<std::string> warnings;
};

// Strips "(combined from similar events):" prefixes and "(repeated N times)"
// suffixes; used as the fallback comparison in incident matching.
std::string normalize_event_message(const std::string& message);

IncidentMatch match_incident_event(const StateGraph& graph, const Incident& incident,
                                   const Config& config);

}  // namespace krca
