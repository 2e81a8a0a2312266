#include "krca/state_graph.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <sstream>

#include "krca/error.hpp"

namespace krca {

VertexId entity_vertex_id(const EntityRef& ref) { return "e|" + ref.canonical_key(); }

VertexId snapshot_vertex_id(const EntityRef& owner, Timestamp t_min) {
    return "s|" + owner.canonical_key() + "|" + std::to_string(t_min);
}

std::string uppercase_kind(const std::string& kind) {
    std::string out;
    out.reserve(kind.size());
    for (char c : kind) out += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return out;
}

const EntityVertex* StateGraph::entity(const VertexId& id) const {
    auto it = entities_.find(id);
    return it == entities_.end() ? nullptr : &it->second;
}

const SnapshotVertex* StateGraph::snapshot(const VertexId& id) const {
    auto it = snapshots_.find(id);
    return it == snapshots_.end() ? nullptr : &it->second;
}

bool StateGraph::has_vertex(const VertexId& id) const {
    return entities_.count(id) > 0 || snapshots_.count(id) > 0;
}

std::string StateGraph::vertex_kind(const VertexId& id) const {
    if (const auto* e = entity(id)) return e->ref.kind;
    if (const auto* s = snapshot(id)) return s->label;
    fail(ErrorCode::Contract, "vertex_kind: no such vertex '" + id + "'");
}

std::vector<const Edge*> StateGraph::out_edges(const VertexId& src) const {
    std::vector<const Edge*> out;
    auto it = out_index_.find(src);
    if (it == out_index_.end()) return out;
    for (const auto& key : it->second) out.push_back(&edges_.at(key));
    return out;
}

std::vector<const Edge*> StateGraph::in_edges(const VertexId& dst) const {
    std::vector<const Edge*> out;
    auto it = in_index_.find(dst);
    if (it == in_index_.end()) return out;
    for (const auto& key : it->second) out.push_back(&edges_.at(key));
    return out;
}

void StateGraph::validate() const {
    auto is_external = [this](const std::string& kind) {
        return std::find(external_kinds_.begin(), external_kinds_.end(), kind) !=
               external_kinds_.end();
    };
    for (const auto& [key, edge] : edges_) {
        if (edge.t_min > edge.t_max)
            fail(ErrorCode::Contract, "edge with inverted time range: " + edge.src + " -> " + edge.dst);
        const EntityVertex* src = entity(edge.src);
        if (!src) fail(ErrorCode::Contract, "edge source is not an entity vertex: " + edge.src);
        switch (edge.type) {
            case EdgeType::ReferInternal: {
                const EntityVertex* dst = entity(edge.dst);
                if (!dst) fail(ErrorCode::Contract, "ReferInternal destination missing: " + edge.dst);
                if (src->ref.external || is_external(src->ref.kind))
                    fail(ErrorCode::Contract, "ReferInternal from external entity: " + edge.src);
                if (dst->ref.external || is_external(dst->ref.kind))
                    fail(ErrorCode::Contract, "ReferInternal to external entity: " + edge.dst);
                break;
            }
            case EdgeType::UseExternal: {
                const EntityVertex* dst = entity(edge.dst);
                if (!dst) fail(ErrorCode::Contract, "UseExternal destination missing: " + edge.dst);
                if (!dst->ref.external && !is_external(dst->ref.kind))
                    fail(ErrorCode::Contract, "UseExternal to non-external entity: " + edge.dst);
                break;
            }
            case EdgeType::HasState:
            case EdgeType::HasEvent: {
                const SnapshotVertex* dst = snapshot(edge.dst);
                if (!dst) fail(ErrorCode::Contract, "snapshot edge destination missing: " + edge.dst);
                if (entity_vertex_id(dst->owner) != edge.src)
                    fail(ErrorCode::Contract, "snapshot edge source is not the owner: " + edge.src);
                bool is_event = src->ref.kind == "Event";
                if (edge.type == EdgeType::HasEvent && !is_event)
                    fail(ErrorCode::Contract, "HasEvent from non-Event entity: " + edge.src);
                if (edge.type == EdgeType::HasState && is_event)
                    fail(ErrorCode::Contract, "HasState from Event entity: " + edge.src);
                break;
            }
        }
    }
    for (const auto& [id, sv] : snapshots_) {
        if (sv.t_min > sv.t_max)
            fail(ErrorCode::Contract, "snapshot vertex with inverted time range: " + id);
        if (sv.label != uppercase_kind(sv.owner.kind))
            fail(ErrorCode::Contract, "snapshot label does not match owner kind: " + id);
    }
}

Json StateGraph::to_json() const {
    Json doc = Json::object();
    doc["format"] = "krca-stategraph";
    doc["version"] = 1;
    doc["external_kinds"] = external_kinds_;
    Json entities = Json::array();
    for (const auto& [id, v] : entities_) {
        Json e = Json::object();
        e["id"] = id;
        e["ref"] = entity_ref_to_json(v.ref);
        entities.push_back(std::move(e));
    }
    doc["entities"] = std::move(entities);
    Json snapshots = Json::array();
    for (const auto& [id, v] : snapshots_) {
        Json s = Json::object();
        s["id"] = id;
        s["owner"] = entity_ref_to_json(v.owner);
        s["label"] = v.label;
        s["t_min"] = format_rfc3339(v.t_min);
        s["t_max"] = format_rfc3339(v.t_max);
        s["state"] = v.state_json;
        snapshots.push_back(std::move(s));
    }
    doc["snapshots"] = std::move(snapshots);
    Json edges = Json::array();
    for (const auto& [key, e] : edges_) {
        Json j = Json::object();
        j["src"] = e.src;
        j["dst"] = e.dst;
        j["type"] = edge_type_name(e.type);
        j["key"] = e.key;
        j["t_min"] = format_rfc3339(e.t_min);
        j["t_max"] = format_rfc3339(e.t_max);
        edges.push_back(std::move(j));
    }
    doc["edges"] = std::move(edges);
    return doc;
}

StateGraph StateGraph::from_json(const Json& doc, const Config& config) {
    if (doc.value("format", "") != "krca-stategraph")
        fail(ErrorCode::Parse, "not a serialized state graph");
    StateGraphBuilder builder(config);
    for (const auto& e : doc.at("entities")) builder.add_entity(entity_ref_from_json(e.at("ref")));
    for (const auto& s : doc.at("snapshots")) {
        auto t_min = parse_rfc3339(s.at("t_min").get<std::string>());
        auto t_max = parse_rfc3339(s.at("t_max").get<std::string>());
        if (!t_min || !t_max) fail(ErrorCode::Parse, "bad snapshot vertex timestamp");
        builder.add_snapshot(entity_ref_from_json(s.at("owner")), *t_min, *t_max, s.at("state"));
    }
    for (const auto& e : doc.at("edges")) {
        auto t_min = parse_rfc3339(e.at("t_min").get<std::string>());
        auto t_max = parse_rfc3339(e.at("t_max").get<std::string>());
        if (!t_min || !t_max) fail(ErrorCode::Parse, "bad edge timestamp");
        builder.add_edge(e.at("src").get<std::string>(), e.at("dst").get<std::string>(),
                         edge_type_from_name(e.at("type").get<std::string>()),
                         e.at("key").get<std::string>(), *t_min, *t_max);
    }
    StateGraph graph = builder.build();
    if (doc.contains("external_kinds"))
        graph.external_kinds_ = doc["external_kinds"].get<std::vector<std::string>>();
    graph.validate();
    return graph;
}

namespace {

std::string cypher_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        if (c == '\\' || c == '\'') out += '\\';
        if (c == '\n') {
            out += "\\n";
            continue;
        }
        out += c;
    }
    return out;
}

std::string cypher_label(const std::string& label) {
    bool plain = !label.empty();
    for (char c : label)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') plain = false;
    return plain ? label : "`" + label + "`";
}

}  // namespace

std::string StateGraph::to_cypher() const {
    std::ostringstream out;
    for (const auto& [id, v] : entities_) {
        out << "CREATE (:" << cypher_label(v.ref.kind) << " {vid: '" << cypher_escape(id)
            << "', kind: '" << cypher_escape(v.ref.kind) << "'";
        if (!v.ref.uid.empty()) out << ", uid: '" << cypher_escape(v.ref.uid) << "'";
        if (!v.ref.name.empty()) out << ", name: '" << cypher_escape(v.ref.name) << "'";
        if (!v.ref.ns.empty()) out << ", namespace: '" << cypher_escape(v.ref.ns) << "'";
        for (const auto& [k, val] : v.ref.composite)
            out << ", " << k << ": '" << cypher_escape(val) << "'";
        out << "});\n";
    }
    for (const auto& [id, v] : snapshots_) {
        out << "CREATE (:" << cypher_label(v.label) << " {vid: '" << cypher_escape(id)
            << "', kind: '" << cypher_escape(v.label) << "', t_min: '" << format_rfc3339(v.t_min)
            << "', t_max: '" << format_rfc3339(v.t_max) << "', state: '"
            << cypher_escape(v.state_json.dump()) << "'});\n";
    }
    for (const auto& [key, e] : edges_) {
        out << "MATCH (a {vid: '" << cypher_escape(e.src) << "'}), (b {vid: '"
            << cypher_escape(e.dst) << "'}) CREATE (a)-[:" << edge_type_name(e.type) << " {key: '"
            << cypher_escape(e.key) << "', t_min: '" << format_rfc3339(e.t_min) << "', t_max: '"
            << format_rfc3339(e.t_max) << "'}]->(b);\n";
    }
    return out.str();
}

void StateGraphBuilder::add_entity(const EntityRef& ref) {
    VertexId id = entity_vertex_id(ref);
    auto it = graph_.entities_.find(id);
    if (it == graph_.entities_.end()) {
        graph_.entities_.emplace(id, EntityVertex{ref});
        return;
    }
    // Merge: identity is fixed, enrich descriptive fields.
    EntityRef& existing = it->second.ref;
    if (existing.name.empty()) existing.name = ref.name;
    if (existing.ns.empty()) existing.ns = ref.ns;
    existing.unresolved = existing.unresolved && ref.unresolved;
}

void StateGraphBuilder::add_snapshot(const EntityRef& owner, Timestamp t_min, Timestamp t_max,
                                     Json state_json) {
    if (t_min > t_max) fail(ErrorCode::Contract, "snapshot vertex with inverted time range");
    VertexId id = snapshot_vertex_id(owner, t_min);
    SnapshotVertex sv;
    sv.owner = owner;
    sv.label = uppercase_kind(owner.kind);
    sv.t_min = t_min;
    sv.t_max = t_max;
    sv.state_json = std::move(state_json);
    graph_.snapshots_[id] = std::move(sv);
}

void StateGraphBuilder::add_edge(const VertexId& src, const VertexId& dst, EdgeType type,
                                 const FlatKey& key, Timestamp t_min, Timestamp t_max) {
    Edge edge{src, dst, type, key, t_min, t_max};
    StateGraph::EdgeKey ek{src, dst, type, key};
    auto it = graph_.edges_.find(ek);
    if (it == graph_.edges_.end())
        graph_.edges_.emplace(ek, std::move(edge));
    else
        it->second = consolidate_edge(it->second, edge);
}

StateGraph StateGraphBuilder::build() {
    for (const auto& decl : config_.external_kinds)
        graph_.external_kinds_.push_back(decl.kind);
    graph_.out_index_.clear();
    graph_.in_index_.clear();
    for (const auto& [key, edge] : graph_.edges_) {
        graph_.out_index_[edge.src].push_back(key);
        graph_.in_index_[edge.dst].push_back(key);
    }
    return std::move(graph_);
}

Edge consolidate_edge(const Edge& existing, const Edge& incoming) {
    if (existing.src != incoming.src || existing.dst != incoming.dst ||
        existing.type != incoming.type || existing.key != incoming.key)
        fail(ErrorCode::Contract, "consolidate_edge: identity tuples differ");
    Edge out = existing;
    out.t_min = std::min(existing.t_min, incoming.t_min);
    out.t_max = std::max(existing.t_max, incoming.t_max);
    return out;
}

BuildResult build_state_graph(const std::vector<DedupedSnapshot>& deduped,
                              const EntityKeyCatalog& catalog, const Config& config) {
    BuildResult result;
    IdentityIndex index = IdentityIndex::build(deduped, config);
    StateGraphBuilder builder(config);
    for (const auto& snap : deduped) {
        ExtractedEntities extracted;
        try {
            extracted = extract_entities(snap, catalog, config);
        } catch (const Error& e) {
            if (e.code() == ErrorCode::UnknownKind) {
                result.warnings.push_back(e.what());
                continue;
            }
            throw;
        }
        auto window = std::make_pair(snap.t_min, snap.t_max);
        EntityRef primary = canonicalize(extracted.primary, index, window);
        builder.add_entity(primary);
        builder.add_snapshot(primary, snap.t_min, snap.t_max, snap.payload);
        EdgeType snapshot_edge = snap.kind == "Event" ? EdgeType::HasEvent : EdgeType::HasState;
        builder.add_edge(entity_vertex_id(primary), snapshot_vertex_id(primary, snap.t_min),
                         snapshot_edge, kSnapshotEdgeKey, snap.t_min, snap.t_max);
        for (const auto& ref : extracted.references) {
            EntityRef target = canonicalize(ref.target, index, window);
            builder.add_entity(target);
            builder.add_edge(entity_vertex_id(primary), entity_vertex_id(target), ref.edge_type,
                             ref.key, snap.t_min, snap.t_max);
        }
    }
    result.graph = builder.build();
    result.graph.validate();
    return result;
}

std::optional<SnapshotVertex> latest_state(const StateGraph& graph, const EntityRef& entity,
                                           Timestamp at) {
    const SnapshotVertex* containing = nullptr;
    const SnapshotVertex* preceding = nullptr;
    for (const Edge* edge : graph.out_edges(entity_vertex_id(entity))) {
        if (edge->type != EdgeType::HasState) continue;
        const SnapshotVertex* sv = graph.snapshot(edge->dst);
        if (!sv) continue;
        if (sv->t_min <= at && at <= sv->t_max) {
            if (!containing || sv->t_min > containing->t_min) containing = sv;
        } else if (sv->t_max <= at) {
            if (!preceding || sv->t_max > preceding->t_max ||
                (sv->t_max == preceding->t_max && sv->t_min > preceding->t_min))
                preceding = sv;
        }
    }
    if (containing) return *containing;
    if (preceding) return *preceding;
    return std::nullopt;
}

std::string normalize_event_message(const std::string& message) {
    static const std::regex repeated_suffix(R"(\s*\(repeated \d+ times\)\s*$)");
    static const std::regex combined_prefix(R"(^\s*\(combined from similar events\):\s*)");
    std::string out = std::regex_replace(message, repeated_suffix, "");
    out = std::regex_replace(out, combined_prefix, "");
    size_t a = out.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = out.find_last_not_of(" \t\r\n");
    return out.substr(a, b - a + 1);
}

namespace {

std::string event_namespace(const Json& state) {
    if (state.contains("metadata") && state["metadata"].is_object() &&
        state["metadata"].contains("namespace") && state["metadata"]["namespace"].is_string())
        return state["metadata"]["namespace"].get<std::string>();
    if (state.contains("involvedObject") && state["involvedObject"].is_object() &&
        state["involvedObject"].contains("namespace") &&
        state["involvedObject"]["namespace"].is_string())
        return state["involvedObject"]["namespace"].get<std::string>();
    return "";
}

Timestamp range_distance(Timestamp t_min, Timestamp t_max, Timestamp at) {
    if (at < t_min) return t_min - at;
    if (at > t_max) return at - t_max;
    return 0;
}

}  // namespace

IncidentMatch match_incident_event(const StateGraph& graph, const Incident& incident,
                                   const Config& config) {
    struct Candidate {
        VertexId id;
        const SnapshotVertex* sv;
        Timestamp distance;
        bool exact;
    };
    std::vector<Candidate> candidates;
    std::size_t events_seen = 0, message_hits = 0, namespace_hits = 0;
    Timestamp nearest_message_distance = -1;
    std::string normalized_incident = normalize_event_message(incident.message);

    for (const auto& [id, sv] : graph.snapshots()) {
        if (sv.label != "EVENT") continue;
        ++events_seen;
        if (!sv.state_json.contains("message") || !sv.state_json["message"].is_string()) continue;
        std::string message = sv.state_json["message"].get<std::string>();
        bool exact = message == incident.message;
        bool normalized = !exact && normalize_event_message(message) == normalized_incident;
        if (!exact && !normalized) continue;
        ++message_hits;
        Timestamp distance = range_distance(sv.t_min, sv.t_max, incident.timestamp);
        if (nearest_message_distance < 0 || distance < nearest_message_distance)
            nearest_message_distance = distance;
        if (!incident.ns.empty() && event_namespace(sv.state_json) != incident.ns) continue;
        ++namespace_hits;
        if (distance > config.incident_window_seconds) continue;
        if (!sv.state_json.contains("involvedObject") ||
            !sv.state_json["involvedObject"].is_object() ||
            !sv.state_json["involvedObject"].contains("kind"))
            continue;  // cannot seed the pipeline without a source kind
        candidates.push_back({id, &sv, distance, exact});
    }

    if (candidates.empty()) {
        std::ostringstream diag;
        diag << "no EVENT snapshot matched the incident (events scanned: " << events_seen
             << ", message matches: " << message_hits << ", also in namespace '" << incident.ns
             << "': " << namespace_hits;
        if (nearest_message_distance >= 0)
            diag << ", nearest message match was " << nearest_message_distance
                 << "s outside the incident time";
        diag << ", window: " << config.incident_window_seconds << "s)";
        fail(ErrorCode::IncidentNotFound, diag.str());
    }

    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        if (a.exact != b.exact) return a.exact;  // exact matches first
        if (a.distance != b.distance) return a.distance < b.distance;
        return a.id < b.id;
    });

    IncidentMatch match;
    const Candidate& best = candidates.front();
    if (candidates.size() > 1 && candidates[1].exact == best.exact &&
        candidates[1].distance == best.distance)
        match.warnings.push_back("multiple events at equal time distance; picked " + best.id);
    match.event = best.sv->owner;
    match.event_state = *best.sv;
    match.src_kind = best.sv->state_json["involvedObject"]["kind"].get<std::string>();
    return match;
}

}  // namespace krca
