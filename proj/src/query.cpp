#include "krca/query.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include "krca/error.hpp"

namespace krca {

Json statepath_to_json(const Statepath& path) {
    Json doc = Json::object();
    Json entities = Json::array();
    for (const auto& ref : path.entities) entities.push_back(entity_ref_to_json(ref));
    doc["entities"] = std::move(entities);
    doc["metapath"] = serialize_metapath(path.binding);
    doc["anchor_event"] = entity_ref_to_json(path.anchor_event);
    return doc;
}

QueryPlan compile_plan(const Metapath& extended_path, const EntityRef& incident_anchor,
                       Timestamp anchor_t_min, Timestamp at, const Config& config) {
    if (extended_path.empty())
        fail(ErrorCode::InvalidArgument, "cannot compile an empty metapath");
    QueryPlan plan;
    plan.source = extended_path;
    plan.anchor = snapshot_vertex_id(incident_anchor, anchor_t_min);
    plan.anchor_event_uid = incident_anchor.uid;
    plan.at = at;
    plan.window_seconds = config.query_window_seconds;
    for (const auto& step : extended_path.steps) {
        PlanStep p;
        p.type = step.type;
        p.key = step.key;
        p.direction = step.direction;
        p.from_kind = step_from_kind(step);
        p.to_kind = step_to_kind(step);
        plan.steps.push_back(std::move(p));
    }
    return plan;
}

std::vector<Statepath> execute_plan(const QueryPlan& plan, const StateGraph& graph) {
    std::vector<Statepath> out;
    if (!graph.has_vertex(plan.anchor)) return out;

    auto edge_in_window = [&plan](const Edge& edge) {
        return edge.t_min - plan.window_seconds <= plan.at &&
               plan.at <= edge.t_max + plan.window_seconds;
    };

    std::vector<std::vector<VertexId>> bindings{{plan.anchor}};
    for (const auto& step : plan.steps) {
        std::vector<std::vector<VertexId>> next_bindings;
        for (const auto& binding : bindings) {
            const VertexId& current = binding.back();
            if (graph.vertex_kind(current) != step.from_kind) continue;
            auto edges = step.direction == StepDirection::Forward ? graph.out_edges(current)
                                                                  : graph.in_edges(current);
            for (const Edge* edge : edges) {
                if (edge->type != step.type || edge->key != step.key) continue;
                if (!edge_in_window(*edge)) continue;
                VertexId next =
                    step.direction == StepDirection::Forward ? edge->dst : edge->src;
                if (graph.vertex_kind(next) != step.to_kind) continue;
                auto extended = binding;
                extended.push_back(next);
                next_bindings.push_back(std::move(extended));
            }
        }
        bindings = std::move(next_bindings);
        if (bindings.empty()) return out;
    }

    std::sort(bindings.begin(), bindings.end());
    bindings.erase(std::unique(bindings.begin(), bindings.end()), bindings.end());

    for (const auto& binding : bindings) {
        Statepath path;
        path.binding = plan.source;
        for (const auto& id : binding) {
            const EntityVertex* entity = graph.entity(id);
            if (!entity) continue;  // snapshot vertices stay out of the statepath
            if (entity->ref.kind == "Event") {
                path.anchor_event = entity->ref;
                continue;
            }
            path.entities.push_back(entity->ref);
        }
        if (!path.entities.empty()) out.push_back(std::move(path));
    }
    // Order and de-duplicate by the entity vertex-id sequence.
    auto sequence = [](const Statepath& p) {
        std::string s;
        for (const auto& e : p.entities) s += entity_vertex_id(e) + "\x1f";
        return s;
    };
    std::sort(out.begin(), out.end(),
              [&sequence](const Statepath& a, const Statepath& b) { return sequence(a) < sequence(b); });
    out.erase(std::unique(out.begin(), out.end(),
                          [&sequence](const Statepath& a, const Statepath& b) {
                              return sequence(a) == sequence(b);
                          }),
              out.end());
    return out;
}

StateBundle fetch_states(const Statepath& statepath, const StateGraph& graph, Timestamp at) {
    StateBundle bundle;
    for (const auto& entity : statepath.entities) {
        StateBundleEntry entry;
        entry.entity = entity;
        auto state = latest_state(graph, entity, at);
        if (!state) {
            entry.absent = true;
        } else {
            entry.t_min = state->t_min;
            entry.t_max = state->t_max;
            Json fragments = Json::object();
            if (state->state_json.contains("spec")) fragments["spec"] = state->state_json["spec"];
            if (state->state_json.contains("status"))
                fragments["status"] = state->state_json["status"];
            if (fragments.empty()) fragments = state->state_json;
            entry.fragments = std::move(fragments);
        }
        bundle.entries.push_back(std::move(entry));
    }
    return bundle;
}

std::string cypher_alias(const std::string& kind) {
    if (kind == "PersistentVolume") return "pv";
    if (kind == "PersistentVolumeClaim") return "pvc";
    if (kind == "Pod") return "pod";
    if (kind == "Event") return "e";
    std::string out;
    for (char c : kind) out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

namespace {

std::string escape_single_quotes(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '\'' || c == '\\') out += '\\';
        out += c;
    }
    return out;
}

}  // namespace

std::string emit_cypher(const Metapath& extended_path, const EntityRef& incident_anchor) {
    if (extended_path.empty())
        fail(ErrorCode::InvalidArgument, "cannot emit Cypher for an empty metapath");

    // One alias per path position; repeated kinds get a numeric suffix.
    std::vector<std::string> kinds{step_from_kind(extended_path.steps.front())};
    for (const auto& step : extended_path.steps) kinds.push_back(step_to_kind(step));
    std::vector<std::string> aliases;
    std::map<std::string, int> used;
    for (const auto& kind : kinds) {
        std::string base = cypher_alias(kind);
        int n = ++used[base];
        aliases.push_back(n == 1 ? base : base + std::to_string(n));
    }

    std::string event_alias;
    for (size_t i = 0; i < kinds.size(); ++i)
        if (kinds[i] == "Event" && event_alias.empty()) event_alias = aliases[i];

    std::ostringstream out;
    for (size_t i = 0; i < extended_path.steps.size(); ++i) {
        const MetapathStep& step = extended_path.steps[i];
        size_t rel = i + 1;
        // Positions holding the edge's canonical source and destination.
        size_t src_pos = step.direction == StepDirection::Forward ? i : i + 1;
        size_t dst_pos = step.direction == StepDirection::Forward ? i + 1 : i;
        out << "MATCH (" << aliases[src_pos] << ":" << step.src_kind << ")-[r" << rel << ":"
            << edge_type_name(step.type) << "]->(" << aliases[dst_pos] << ":" << step.dest_kind
            << ")\n";
        out << "WHERE r" << rel << ".key = '" << escape_single_quotes(step.key) << "'";
        if (i == 0 && !incident_anchor.uid.empty() && !event_alias.empty())
            out << " AND " << event_alias << ".uid = '" << escape_single_quotes(incident_anchor.uid)
                << "'";
        out << "\n";
    }
    out << "RETURN " << aliases[0];
    for (size_t i = 0; i < extended_path.steps.size(); ++i)
        out << ", r" << i + 1 << ", " << aliases[i + 1];
    out << "\n";
    return out.str();
}

}  // namespace krca
