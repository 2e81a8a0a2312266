#include "krca/krca.h"

#include <cstring>
#include <fstream>
#include <optional>

#include "krca/backends.hpp"
#include "krca/error.hpp"
#include "krca/pipeline.hpp"

using namespace krca;

struct krca_engine {
    Config config;
    std::vector<RawSnapshot> raw;
    std::size_t lines_skipped = 0;
    std::vector<std::string> warnings;

    std::optional<StateGraph> graph;
    std::optional<MetaGraph> meta;
    std::size_t deduped_count = 0;
    std::string backend_spec;  // empty: use config.backend.spec

    std::string last_error;
};

namespace {

krca_status status_from(ErrorCode code) {
    switch (code) {
        case ErrorCode::Io: return KRCA_ERR_IO;
        case ErrorCode::Parse: return KRCA_ERR_PARSE;
        case ErrorCode::Config: return KRCA_ERR_CONFIG;
        case ErrorCode::Contract: return KRCA_ERR_CONTRACT;
        case ErrorCode::Ambiguous: return KRCA_ERR_AMBIGUOUS;
        case ErrorCode::IncidentNotFound: return KRCA_ERR_NOT_FOUND;
        case ErrorCode::UnknownKind: return KRCA_ERR_UNKNOWN_KIND;
        case ErrorCode::StageFailure: return KRCA_ERR_STAGE;
        case ErrorCode::ValidationFailure: return KRCA_ERR_VALIDATION;
        case ErrorCode::State: return KRCA_ERR_STATE;
        case ErrorCode::InvalidArgument: return KRCA_ERR_INVALID_ARGUMENT;
        case ErrorCode::Internal: return KRCA_ERR_INTERNAL;
    }
    return KRCA_ERR_INTERNAL;
}

char* dup_string(const std::string& s) {
    char* out = new char[s.size() + 1];
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

template <typename Fn>
krca_status guarded(krca_engine* engine, Fn&& fn) {
    if (!engine) return KRCA_ERR_INVALID_ARGUMENT;
    engine->last_error.clear();
    try {
        return fn();
    } catch (const Error& e) {
        engine->last_error = e.what();
        return status_from(e.code());
    } catch (const std::exception& e) {
        engine->last_error = e.what();
        return KRCA_ERR_INTERNAL;
    }
}

krca_status require_graph(krca_engine* engine) {
    if (!engine->graph) {
        engine->last_error = "no graph: call krca_build_graph or krca_load_graph first";
        return KRCA_ERR_STATE;
    }
    return KRCA_OK;
}

const MetaGraph& meta_of(krca_engine* engine) {
    if (!engine->meta) engine->meta = build_meta_graph(*engine->graph, engine->config);
    return *engine->meta;
}

std::unique_ptr<LlmBackend> backend_of(krca_engine* engine) {
    const std::string& spec =
        engine->backend_spec.empty() ? engine->config.backend.spec : engine->backend_spec;
    return make_backend(spec, engine->config.backend);
}

}  // namespace

extern "C" {

const char* krca_version(void) { return "0.1.0"; }

const char* krca_status_name(krca_status status) {
    switch (status) {
        case KRCA_OK: return "ok";
        case KRCA_ERR_IO: return "io-error";
        case KRCA_ERR_PARSE: return "parse-error";
        case KRCA_ERR_CONFIG: return "config-error";
        case KRCA_ERR_CONTRACT: return "contract-violation";
        case KRCA_ERR_AMBIGUOUS: return "ambiguous-reference";
        case KRCA_ERR_NOT_FOUND: return "not-found";
        case KRCA_ERR_UNKNOWN_KIND: return "unknown-kind";
        case KRCA_ERR_STAGE: return "stage-failure";
        case KRCA_ERR_VALIDATION: return "validation-failure";
        case KRCA_ERR_STATE: return "invalid-state";
        case KRCA_ERR_INVALID_ARGUMENT: return "invalid-argument";
        case KRCA_ERR_INTERNAL: return "internal-error";
    }
    return "unknown";
}

krca_status krca_engine_new(const char* config_path, krca_engine** out) {
    if (!out) return KRCA_ERR_INVALID_ARGUMENT;
    *out = nullptr;
    auto engine = std::make_unique<krca_engine>();
    try {
        engine->config = config_path && *config_path ? load_config_file(config_path)
                                                     : Config::defaults();
    } catch (const Error& e) {
        return status_from(e.code());
    } catch (const std::exception&) {
        return KRCA_ERR_INTERNAL;
    }
    *out = engine.release();
    return KRCA_OK;
}

void krca_engine_free(krca_engine* engine) { delete engine; }

const char* krca_last_error(const krca_engine* engine) {
    return engine ? engine->last_error.c_str() : "";
}

krca_status krca_load_snapshots(krca_engine* engine, const char* path) {
    return guarded(engine, [&]() {
        if (!path) return KRCA_ERR_INVALID_ARGUMENT;
        LoadResult loaded = load_snapshot_stream(path);
        engine->lines_skipped += loaded.skipped;
        for (auto& w : loaded.warnings) engine->warnings.push_back(std::move(w));
        for (auto& rec : loaded.records) engine->raw.push_back(std::move(rec));
        return KRCA_OK;
    });
}

krca_status krca_build_graph(krca_engine* engine) {
    return guarded(engine, [&]() {
        DedupResult deduped = dedup_stream(engine->raw, engine->config);
        for (auto& w : deduped.warnings) engine->warnings.push_back(std::move(w));
        engine->deduped_count = deduped.snapshots.size();
        EntityKeyCatalog catalog = catalog_from_mappings(engine->config);
        BuildResult built = build_state_graph(deduped.snapshots, catalog, engine->config);
        for (auto& w : built.warnings) engine->warnings.push_back(std::move(w));
        engine->graph = std::move(built.graph);
        engine->meta.reset();
        return KRCA_OK;
    });
}

krca_status krca_save_graph(krca_engine* engine, const char* path) {
    return guarded(engine, [&]() {
        if (!path) return KRCA_ERR_INVALID_ARGUMENT;
        if (auto rc = require_graph(engine); rc != KRCA_OK) return rc;
        std::ofstream out(path);
        if (!out) fail(ErrorCode::Io, std::string("cannot write graph file '") + path + "'");
        out << engine->graph->to_json().dump(2) << "\n";
        return KRCA_OK;
    });
}

krca_status krca_load_graph(krca_engine* engine, const char* path) {
    return guarded(engine, [&]() {
        if (!path) return KRCA_ERR_INVALID_ARGUMENT;
        std::ifstream in(path);
        if (!in) fail(ErrorCode::Io, std::string("cannot open graph file '") + path + "'");
        Json doc = Json::parse(in, nullptr, false);
        if (doc.is_discarded()) fail(ErrorCode::Parse, "graph file is not valid JSON");
        engine->graph = StateGraph::from_json(doc, engine->config);
        engine->meta.reset();
        return KRCA_OK;
    });
}

krca_status krca_graph_stats(krca_engine* engine, char** out_json) {
    return guarded(engine, [&]() {
        if (!out_json) return KRCA_ERR_INVALID_ARGUMENT;
        *out_json = nullptr;
        Json doc = Json::object();
        doc["raw_records"] = engine->raw.size();
        doc["lines_skipped"] = engine->lines_skipped;
        doc["deduped_snapshots"] = engine->deduped_count;
        if (engine->graph) {
            doc["entity_vertices"] = engine->graph->entities().size();
            doc["snapshot_vertices"] = engine->graph->snapshots().size();
            doc["edges"] = engine->graph->edge_count();
            doc["meta_kinds"] = meta_of(engine).vertices().size();
            doc["meta_edges"] = meta_of(engine).edges().size();
        }
        if (!engine->warnings.empty()) doc["warnings"] = engine->warnings;
        *out_json = dup_string(doc.dump(2));
        return KRCA_OK;
    });
}

krca_status krca_export_graph_cypher(krca_engine* engine, char** out_text) {
    return guarded(engine, [&]() {
        if (!out_text) return KRCA_ERR_INVALID_ARGUMENT;
        *out_text = nullptr;
        if (auto rc = require_graph(engine); rc != KRCA_OK) return rc;
        *out_text = dup_string(engine->graph->to_cypher());
        return KRCA_OK;
    });
}

krca_status krca_export_metagraph(krca_engine* engine, char** out_json) {
    return guarded(engine, [&]() {
        if (!out_json) return KRCA_ERR_INVALID_ARGUMENT;
        *out_json = nullptr;
        if (auto rc = require_graph(engine); rc != KRCA_OK) return rc;
        *out_json = dup_string(meta_of(engine).to_json().dump(2));
        return KRCA_OK;
    });
}

krca_status krca_export_metagraph_dot(krca_engine* engine, char** out_dot) {
    return guarded(engine, [&]() {
        if (!out_dot) return KRCA_ERR_INVALID_ARGUMENT;
        *out_dot = nullptr;
        if (auto rc = require_graph(engine); rc != KRCA_OK) return rc;
        *out_dot = dup_string(meta_of(engine).to_dot());
        return KRCA_OK;
    });
}

krca_status krca_metapath_cypher(krca_engine* engine, const char* metapath_text,
                                 const char* anchor_event_uid, int extend, char** out_text) {
    return guarded(engine, [&]() {
        if (!metapath_text || !out_text) return KRCA_ERR_INVALID_ARGUMENT;
        *out_text = nullptr;
        Metapath path = parse_metapath(metapath_text);
        if (extend) {
            if (path.empty()) fail(ErrorCode::InvalidArgument, "cannot extend an empty metapath");
            path = extend_metapath(path, step_from_kind(path.steps.front()));
        }
        EntityRef anchor = EntityRef::by_uid(
            "Event", anchor_event_uid ? std::string(anchor_event_uid) : std::string());
        *out_text = dup_string(emit_cypher(path, anchor));
        return KRCA_OK;
    });
}

krca_status krca_set_backend(krca_engine* engine, const char* backend_spec) {
    return guarded(engine, [&]() {
        if (!backend_spec) return KRCA_ERR_INVALID_ARGUMENT;
        engine->backend_spec = backend_spec;
        // Validate eagerly so bad specs fail here, not mid-run.
        make_backend(engine->backend_spec, engine->config.backend);
        return KRCA_OK;
    });
}

krca_status krca_run_rca(krca_engine* engine, const char* incident_json, char** out_markdown,
                         char** out_json) {
    return guarded(engine, [&]() {
        if (!incident_json || !out_markdown || !out_json) return KRCA_ERR_INVALID_ARGUMENT;
        *out_markdown = nullptr;
        *out_json = nullptr;
        if (auto rc = require_graph(engine); rc != KRCA_OK) return rc;

        Json doc = Json::parse(incident_json, nullptr, false);
        if (doc.is_discarded() || !doc.is_object())
            fail(ErrorCode::Parse, "incident is not a JSON object");
        Incident incident;
        incident.message = doc.value("message", "");
        incident.ns = doc.value("namespace", "");
        incident.reason = doc.value("reason", "");
        incident.type_label = doc.value("type_label", "");
        if (incident.message.empty()) fail(ErrorCode::InvalidArgument, "incident needs a message");
        auto ts = parse_rfc3339(doc.value("timestamp", ""));
        if (!ts) fail(ErrorCode::InvalidArgument, "incident needs an RFC 3339 timestamp");
        incident.timestamp = *ts;

        auto backend = backend_of(engine);
        const MetaGraph& meta = meta_of(engine);
        KnowledgeConfig knowledge = knowledge_for(meta, engine->config);
        RcaResult result =
            run_rca(incident, *engine->graph, meta, knowledge, *backend, engine->config);

        *out_markdown = dup_string(render_report_markdown(result));
        *out_json = dup_string(rca_result_to_json(result).dump(2));
        return KRCA_OK;
    });
}

krca_status krca_run_eval(krca_engine* engine, const char* corpus_path, const char* mode,
                          char** out_tables, char** out_json) {
    return guarded(engine, [&]() {
        if (!corpus_path || !out_tables || !out_json) return KRCA_ERR_INVALID_ARGUMENT;
        *out_tables = nullptr;
        *out_json = nullptr;
        if (auto rc = require_graph(engine); rc != KRCA_OK) return rc;

        EvalMode eval_mode;
        std::string mode_name = mode ? mode : "retrieval";
        if (mode_name == "retrieval")
            eval_mode = EvalMode::Retrieval;
        else if (mode_name == "report")
            eval_mode = EvalMode::Report;
        else
            fail(ErrorCode::InvalidArgument, "eval mode must be 'report' or 'retrieval'");

        auto backend = backend_of(engine);
        const MetaGraph& meta = meta_of(engine);
        KnowledgeConfig knowledge = knowledge_for(meta, engine->config);
        EvalReport report = run_eval(corpus_path, *engine->graph, meta, knowledge, *backend,
                                     engine->config, eval_mode);

        std::string tables = report.precision_table() + "\n" + report.cost_table();
        *out_tables = dup_string(tables);
        *out_json = dup_string(report.to_json().dump(2));
        return KRCA_OK;
    });
}

void krca_string_free(char* text) { delete[] text; }

}  // extern "C"
