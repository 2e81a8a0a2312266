#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace krca {

enum class EdgeType { ReferInternal, UseExternal, HasState, HasEvent };

const char* edge_type_name(EdgeType type);
EdgeType edge_type_from_name(const std::string& name);

// How the leaf value of a reference key identifies the target entity.
enum class RefValueField { Auto, Uid, Name, Composite };

// One row of the catalog mapping table: which key on which kind references
// which target kind. `kind` may be "*" to apply to any snapshot kind.
// Exactly one of target_kind / target_kind_from is set; target_kind_from
// names a sibling key whose leaf holds the target kind (e.g. an Event's
// involvedObject_kind next to involvedObject_uid).
struct CatalogMapping {
    std::string kind;
    std::string key;
    std::string target_kind;
    std::string target_kind_from;
    EdgeType edge_type = EdgeType::ReferInternal;
    RefValueField value_field = RefValueField::Auto;
};

// A kind that lives outside the cluster store, identified by a field tuple.
struct ExternalKindDecl {
    std::string kind;
    std::vector<std::string> identity_fields;
};

// "name contains <pattern>" => the referenced volume/object is likely <implies_kind>.
struct NamingConvention {
    std::string pattern;
    std::string implies_kind;
};

struct KnowledgeConfig {
    std::vector<std::string> known_kinds;  // filled from the meta graph at run time
    std::vector<std::string> priority_external_kinds;
    std::vector<NamingConvention> conventions;
    std::string guidance;
};

struct BackendConfig {
    std::string spec = "oracle";  // "oracle" | "mock:<responses.json>" | "http"
    std::string http_url;
    std::string http_model;
    std::string api_key_env = "KRCA_API_KEY";
    double temperature = 0.0;
    int max_tokens = 2048;
};

struct Config {
    // ingest
    std::vector<std::string> volatile_keys{"resourceVersion", "managedFields", "collectedAt",
                                           "collectionTimestamp"};

    // entity key selection; when use_key_statistics is set the catalog is
    // selected from corpus statistics instead of taken from the mapping table
    bool use_key_statistics = false;
    int min_occurrence = 3;
    double diversity_ratio = 0.5;
    std::vector<std::pair<std::string, std::string>> include_keys;  // (kind or "*", flat key)
    std::vector<std::pair<std::string, std::string>> exclude_keys;
    std::vector<CatalogMapping> mappings;
    std::vector<ExternalKindDecl> external_kinds;
    // Kinds whose names are cluster-global; name references to them carry no namespace.
    std::vector<std::string> cluster_scoped_kinds{"Namespace", "PersistentVolume", "Node",
                                                  "StorageClass", "ClusterRole", "ClusterRoleBinding"};

    // graph query / incident matching windows (seconds)
    std::int64_t incident_window_seconds = 15 * 60;
    std::int64_t query_window_seconds = 15 * 60;

    // metapath search
    int max_path_len = 4;
    int max_paths = 10;

    // pipeline
    int max_trials = 3;
    int score_threshold = 7;
    int summary_word_limit = 200;
    std::vector<std::string> command_whitelist{"kubectl"};
    bool interactive = false;

    KnowledgeConfig knowledge;
    BackendConfig backend;
    std::string prompt_dir;  // empty: use built-in templates

    bool is_external_kind(const std::string& kind) const;
    const ExternalKindDecl* find_external(const std::string& kind) const;

    // Baseline catalog for stock Kubernetes resources; the parsed file
    // extends or overrides it.
    static Config defaults();
};

// Parses the key-value config format (one `key = value` per line, `#`
// comments, repeatable keys accumulate). Unknown keys are an error.
Config parse_config_text(const std::string& text);
Config load_config_file(const std::string& path);

}  // namespace krca
