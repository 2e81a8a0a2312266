#pragma once

#include <json.hpp>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "krca/config.hpp"
#include "krca/time.hpp"

namespace krca {

using Json = nlohmann::json;

// Underscore-joined JSON path with array indices dropped,
// e.g. spec_volumes_persistentVolumeClaim_claimName.
using FlatKey = std::string;

enum class IdentityMode { Uid, NameNamespace, Composite };

// Canonical identity of a native or external entity. Exactly one identity
// mode is authoritative; name/namespace are kept as descriptive fields when
// the mode is Uid so reports can render them.
struct EntityRef {
    std::string kind;
    IdentityMode mode = IdentityMode::NameNamespace;
    std::string uid;
    std::string name;
    std::string ns;
    std::map<std::string, std::string> composite;
    bool external = false;
    bool unresolved = false;  // name-based reference that never matched an observed entity

    // Stable identity string; two refs are the same entity iff keys are equal.
    std::string canonical_key() const;
    // Human-readable identity for reports ("name", "uid" or "k=v,k=v").
    std::string display_name() const;

    bool same_entity(const EntityRef& other) const { return canonical_key() == other.canonical_key(); }

    static EntityRef by_uid(std::string kind, std::string uid);
    static EntityRef by_name(std::string kind, std::string name, std::string ns);
    static EntityRef by_composite(std::string kind, std::map<std::string, std::string> fields);
};

bool operator==(const EntityRef& a, const EntityRef& b);
bool operator<(const EntityRef& a, const EntityRef& b);

Json entity_ref_to_json(const EntityRef& ref);
EntityRef entity_ref_from_json(const Json& doc);

// Every leaf scalar of `payload` as (flat key, value), sorted by key then by
// serialized value. Array elements share the index-free path.
std::vector<std::pair<FlatKey, Json>> flatten_keys(const Json& payload);

struct KeyStatsEntry {
    std::int64_t occurrence_count = 0;
    std::set<std::string> distinct_values;  // serialized leaf values
};

// Per (kind, key) occurrence and value-diversity counts over a corpus.
struct KeyStats {
    std::map<std::pair<std::string, FlatKey>, KeyStatsEntry> entries;

    std::int64_t occurrences(const std::string& kind, const FlatKey& key) const;
    std::int64_t distinct_values(const std::string& kind, const FlatKey& key) const;
};

struct CatalogEntry {
    std::string kind;  // snapshot kind the key appears on
    FlatKey key;
    std::string target_kind;       // fixed target, or empty when dynamic
    std::string target_kind_from;  // sibling key holding the target kind
    EdgeType edge_type = EdgeType::ReferInternal;
    RefValueField value_field = RefValueField::Auto;
};

// The validated set of entity-bearing keys: which (kind, key) pairs produce
// reference edges and to which target kinds.
struct EntityKeyCatalog {
    std::map<std::pair<std::string, FlatKey>, CatalogEntry> entries;

    const CatalogEntry* find(const std::string& kind, const FlatKey& key) const;
    std::vector<const CatalogEntry*> entries_for_kind(const std::string& kind) const;
};

struct DedupedSnapshot;  // ingest

KeyStats profile_keys(const std::vector<DedupedSnapshot>& corpus);

// Applies the frequency/diversity thresholds plus the include/exclude lists
// and resolves each selected key against the config mapping table.
EntityKeyCatalog select_entity_keys(const KeyStats& stats, const Config& config);

// Builds a catalog directly from the mapping table (include-list mode used
// when no statistics pass is wanted). Wildcard-kind mappings stay wildcard.
EntityKeyCatalog catalog_from_mappings(const Config& config);

struct ExtractedReference {
    FlatKey key;
    EntityRef target;
    EdgeType edge_type = EdgeType::ReferInternal;
};

struct ExtractedEntities {
    EntityRef primary;
    std::vector<ExtractedReference> references;
};

// Primary identity of one snapshot payload: metadata fields for native kinds,
// declared identity fields for external kinds.
EntityRef primary_entity(const std::string& kind, const Json& payload, const Config& config);

ExtractedEntities extract_entities(const DedupedSnapshot& snapshot, const EntityKeyCatalog& catalog,
                                   const Config& config);

// (kind, name, namespace) -> observed uids with their observation windows.
class IdentityIndex {
public:
    void add(const std::string& kind, const std::string& name, const std::string& ns,
             const std::string& uid, Timestamp t_min, Timestamp t_max);

    struct Candidate {
        std::string uid;
        Timestamp t_min;
        Timestamp t_max;
    };
    const std::vector<Candidate>* lookup(const std::string& kind, const std::string& name,
                                         const std::string& ns) const;

    static IdentityIndex build(const std::vector<DedupedSnapshot>& corpus, const Config& config);

private:
    std::map<std::tuple<std::string, std::string, std::string>, std::vector<Candidate>> by_name_;
};

// Upgrades name-based native references to uid form when the index holds
// exactly one match; external composites come back with fields sorted.
// `window` narrows candidates to those observed around the referencing
// snapshot; without it, multiple matches with overlapping windows raise
// an ambiguity error.
EntityRef canonicalize(const EntityRef& ref, const IdentityIndex& index,
                       std::optional<std::pair<Timestamp, Timestamp>> window = std::nullopt);

}  // namespace krca
