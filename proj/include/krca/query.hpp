#pragma once

#include <optional>
#include <string>
#include <vector>

#include "krca/meta_graph.hpp"
#include "krca/state_graph.hpp"

namespace krca {

struct PlanStep {
    EdgeType type = EdgeType::ReferInternal;
    FlatKey key;
    StepDirection direction = StepDirection::Forward;
    std::string from_kind;  // kind of the vertex the walk leaves
    std::string to_kind;    // kind of the vertex the walk enters
};

// Executable form of an extended metapath: one constraint per step, anchored
// at the matched incident's EVENT snapshot vertex.
struct QueryPlan {
    std::vector<PlanStep> steps;
    VertexId anchor;  // EVENT snapshot vertex
    std::string anchor_event_uid;
    Timestamp at = 0;
    std::int64_t window_seconds = 0;
    Metapath source;  // the extended metapath this plan realizes
};

// An instantiated metapath: entity vertices only; the anchoring event is kept
// aside, not as a path member.
struct Statepath {
    std::vector<EntityRef> entities;
    Metapath binding;
    EntityRef anchor_event;
};

Json statepath_to_json(const Statepath& path);

struct StateBundleEntry {
    EntityRef entity;
    bool absent = false;
    Json fragments;       // object holding spec/status (or the whole payload)
    Timestamp t_min = 0;  // snapshot window when present
    Timestamp t_max = 0;
};

// Per-statepath-entity state fragments; `absent` is a first-class outcome.
struct StateBundle {
    std::vector<StateBundleEntry> entries;
};

QueryPlan compile_plan(const Metapath& extended_path, const EntityRef& incident_anchor,
                       Timestamp anchor_t_min, Timestamp at, const Config& config);

// All bindings of the plan in the graph, deterministically ordered by the
// entity vertex-id sequence. Empty output is a valid retry signal.
std::vector<Statepath> execute_plan(const QueryPlan& plan, const StateGraph& graph);

StateBundle fetch_states(const Statepath& statepath, const StateGraph& graph, Timestamp at);

// MATCH-WHERE per step plus a RETURN of every alias; byte-deterministic.
std::string emit_cypher(const Metapath& extended_path, const EntityRef& incident_anchor);

// Alias for a kind in emitted Cypher (pv, pvc, pod, e, else lowercase).
std::string cypher_alias(const std::string& kind);

}  // namespace krca
