/*
 * krca — Kubernetes root-cause analysis engine.
 *
 * C interface to the engine: opaque handle, error codes, and UTF-8 strings.
 * Strings returned through char** out-parameters are heap-allocated and must
 * be released with krca_string_free(). An engine handle is not thread-safe;
 * use one handle per thread or serialize access.
 */
#ifndef KRCA_H
#define KRCA_H

#ifdef __cplusplus
extern "C" {
#endif

typedef enum krca_status {
    KRCA_OK = 0,
    KRCA_ERR_IO = 1,
    KRCA_ERR_PARSE = 2,
    KRCA_ERR_CONFIG = 3,
    KRCA_ERR_CONTRACT = 4,
    KRCA_ERR_AMBIGUOUS = 5,
    KRCA_ERR_NOT_FOUND = 6,
    KRCA_ERR_UNKNOWN_KIND = 7,
    KRCA_ERR_STAGE = 8,
    KRCA_ERR_VALIDATION = 9,
    KRCA_ERR_STATE = 10,
    KRCA_ERR_INVALID_ARGUMENT = 11,
    KRCA_ERR_INTERNAL = 12
} krca_status;

typedef struct krca_engine krca_engine;

const char* krca_version(void);
const char* krca_status_name(krca_status status);

/* config_path may be NULL to use the built-in defaults. */
krca_status krca_engine_new(const char* config_path, krca_engine** out);
void krca_engine_free(krca_engine* engine);

/* Message of the last failed call on this engine; owned by the engine and
 * valid until the next call on it. */
const char* krca_last_error(const krca_engine* engine);

/* Reads a newline-delimited snapshot stream; may be called repeatedly to
 * accumulate sources before building. */
krca_status krca_load_snapshots(krca_engine* engine, const char* path);

/* Dedups everything loaded so far, derives the entity-key catalog, and builds
 * the state graph plus its meta graph. */
krca_status krca_build_graph(krca_engine* engine);

krca_status krca_save_graph(krca_engine* engine, const char* path);
krca_status krca_load_graph(krca_engine* engine, const char* path);

/* Ingest and graph counters as a JSON document. */
krca_status krca_graph_stats(krca_engine* engine, char** out_json);

/* Whole-graph Cypher dump: one CREATE per vertex, one MATCH..CREATE per edge. */
krca_status krca_export_graph_cypher(krca_engine* engine, char** out_text);

krca_status krca_export_metagraph(krca_engine* engine, char** out_json);
krca_status krca_export_metagraph_dot(krca_engine* engine, char** out_dot);

/* Compiles a serialized metapath ("type, srcKind, destKind, key;" per line)
 * into a Cypher query. anchor_event_uid may be NULL. When extend is nonzero
 * the EVENT -> Event -> srcKind prefix is prepended first. */
krca_status krca_metapath_cypher(krca_engine* engine, const char* metapath_text,
                                 const char* anchor_event_uid, int extend, char** out_text);

/* "oracle" | "mock:<responses.json>" | "http"; overrides the config value. */
krca_status krca_set_backend(krca_engine* engine, const char* backend_spec);

/* incident_json fields: message, namespace, timestamp (RFC 3339), and
 * optionally reason and type_label. Produces the Markdown report and the
 * machine-readable JSON result (which carries "status": Explained, Exhausted
 * or Failed). */
krca_status krca_run_rca(krca_engine* engine, const char* incident_json, char** out_markdown,
                         char** out_json);

/* mode: "report" | "retrieval". Produces the printable metric tables and the
 * JSON metrics document. */
krca_status krca_run_eval(krca_engine* engine, const char* corpus_path, const char* mode,
                          char** out_tables, char** out_json);

void krca_string_free(char* text);

#ifdef __cplusplus
}
#endif

#endif /* KRCA_H */
