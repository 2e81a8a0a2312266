#include "krca/entity.hpp"

#include <algorithm>
#include <cctype>
#include <functional>

#include "krca/error.hpp"
#include "krca/snapshot.hpp"

namespace krca {

namespace {

bool digits_only(const std::string& s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

std::string scalar_to_string(const Json& v) {
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
}

}  // namespace

EntityRef EntityRef::by_uid(std::string kind, std::string uid) {
    EntityRef ref;
    ref.kind = std::move(kind);
    ref.mode = IdentityMode::Uid;
    ref.uid = std::move(uid);
    return ref;
}

EntityRef EntityRef::by_name(std::string kind, std::string name, std::string ns) {
    EntityRef ref;
    ref.kind = std::move(kind);
    ref.mode = IdentityMode::NameNamespace;
    ref.name = std::move(name);
    ref.ns = std::move(ns);
    return ref;
}

EntityRef EntityRef::by_composite(std::string kind, std::map<std::string, std::string> fields) {
    EntityRef ref;
    ref.kind = std::move(kind);
    ref.mode = IdentityMode::Composite;
    ref.composite = std::move(fields);
    ref.external = true;
    return ref;
}

std::string EntityRef::canonical_key() const {
    switch (mode) {
        case IdentityMode::Uid:
            return kind + "|u:" + uid;
        case IdentityMode::NameNamespace:
            return kind + "|n:" + ns + "/" + name;
        case IdentityMode::Composite: {
            std::string out = kind + "|c:";
            bool first = true;
            for (const auto& [k, v] : composite) {
                if (!first) out += ",";
                out += k + "=" + v;
                first = false;
            }
            return out;
        }
    }
    return kind + "|?";
}

std::string EntityRef::display_name() const {
    if (!name.empty()) return name;
    if (mode == IdentityMode::Uid) return uid;
    if (mode == IdentityMode::Composite) {
        std::string out;
        bool first = true;
        for (const auto& [k, v] : composite) {
            if (!first) out += ",";
            out += k + "=" + v;
            first = false;
        }
        return out;
    }
    return name;
}

bool operator==(const EntityRef& a, const EntityRef& b) {
    return a.canonical_key() == b.canonical_key();
}

bool operator<(const EntityRef& a, const EntityRef& b) {
    return a.canonical_key() < b.canonical_key();
}

Json entity_ref_to_json(const EntityRef& ref) {
    Json doc = Json::object();
    doc["kind"] = ref.kind;
    switch (ref.mode) {
        case IdentityMode::Uid: doc["mode"] = "uid"; break;
        case IdentityMode::NameNamespace: doc["mode"] = "name"; break;
        case IdentityMode::Composite: doc["mode"] = "composite"; break;
    }
    if (!ref.uid.empty()) doc["uid"] = ref.uid;
    if (!ref.name.empty()) doc["name"] = ref.name;
    if (!ref.ns.empty()) doc["namespace"] = ref.ns;
    if (!ref.composite.empty()) doc["composite"] = ref.composite;
    if (ref.external) doc["external"] = true;
    if (ref.unresolved) doc["unresolved"] = true;
    return doc;
}

EntityRef entity_ref_from_json(const Json& doc) {
    EntityRef ref;
    ref.kind = doc.value("kind", "");
    std::string mode = doc.value("mode", "name");
    if (mode == "uid")
        ref.mode = IdentityMode::Uid;
    else if (mode == "composite")
        ref.mode = IdentityMode::Composite;
    else
        ref.mode = IdentityMode::NameNamespace;
    ref.uid = doc.value("uid", "");
    ref.name = doc.value("name", "");
    ref.ns = doc.value("namespace", "");
    if (doc.contains("composite"))
        ref.composite = doc["composite"].get<std::map<std::string, std::string>>();
    ref.external = doc.value("external", false);
    ref.unresolved = doc.value("unresolved", false);
    return ref;
}

std::vector<std::pair<FlatKey, Json>> flatten_keys(const Json& payload) {
    std::vector<std::pair<FlatKey, Json>> out;
    std::function<void(const Json&, const std::string&)> walk = [&](const Json& node,
                                                                    const std::string& prefix) {
        if (node.is_object()) {
            for (auto it = node.begin(); it != node.end(); ++it) {
                if (digits_only(it.key()))
                    walk(it.value(), prefix);  // digit keys behave like array indices
                else
                    walk(it.value(), prefix.empty() ? it.key() : prefix + "_" + it.key());
            }
        } else if (node.is_array()) {
            for (const auto& item : node) walk(item, prefix);
        } else {
            if (!prefix.empty()) out.emplace_back(prefix, node);
        }
    };
    walk(payload, "");
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first < b.first;
        return a.second.dump() < b.second.dump();
    });
    return out;
}

std::int64_t KeyStats::occurrences(const std::string& kind, const FlatKey& key) const {
    auto it = entries.find({kind, key});
    return it == entries.end() ? 0 : it->second.occurrence_count;
}

std::int64_t KeyStats::distinct_values(const std::string& kind, const FlatKey& key) const {
    auto it = entries.find({kind, key});
    return it == entries.end() ? 0 : static_cast<std::int64_t>(it->second.distinct_values.size());
}

KeyStats profile_keys(const std::vector<DedupedSnapshot>& corpus) {
    KeyStats stats;
    for (const auto& snap : corpus) {
        for (const auto& [key, value] : flatten_keys(snap.payload)) {
            auto& entry = stats.entries[{snap.kind, key}];
            ++entry.occurrence_count;
            entry.distinct_values.insert(value.dump());
        }
    }
    return stats;
}

const CatalogEntry* EntityKeyCatalog::find(const std::string& kind, const FlatKey& key) const {
    auto it = entries.find({kind, key});
    if (it != entries.end()) return &it->second;
    it = entries.find({"*", key});
    if (it != entries.end()) return &it->second;
    return nullptr;
}

std::vector<const CatalogEntry*> EntityKeyCatalog::entries_for_kind(const std::string& kind) const {
    std::vector<const CatalogEntry*> out;
    for (const auto& [k, entry] : entries) {
        if (k.first == kind) out.push_back(&entry);
    }
    for (const auto& [k, entry] : entries) {
        if (k.first == "*" && entries.find({kind, k.second}) == entries.end())
            out.push_back(&entry);
    }
    return out;
}

namespace {

bool list_has(const std::vector<std::pair<std::string, std::string>>& list, const std::string& kind,
              const FlatKey& key) {
    for (const auto& [k, fk] : list)
        if (fk == key && (k == kind || k == "*")) return true;
    return false;
}

CatalogEntry entry_from_mapping(const CatalogMapping& m, const std::string& kind,
                                const Config& config) {
    CatalogEntry e;
    e.kind = kind;
    e.key = m.key;
    e.target_kind = m.target_kind;
    e.target_kind_from = m.target_kind_from;
    e.edge_type = m.edge_type;
    e.value_field = m.value_field;
    if (!e.target_kind.empty()) {
        bool target_external = config.is_external_kind(e.target_kind);
        if (e.edge_type == EdgeType::UseExternal && !target_external)
            fail(ErrorCode::Config, "catalog key '" + e.key + "': UseExternal target '" +
                                        e.target_kind + "' is not a declared external kind");
        if (e.edge_type == EdgeType::ReferInternal && target_external)
            fail(ErrorCode::Config, "catalog key '" + e.key + "': ReferInternal target '" +
                                        e.target_kind + "' is a declared external kind");
    }
    return e;
}

}  // namespace

EntityKeyCatalog select_entity_keys(const KeyStats& stats, const Config& config) {
    EntityKeyCatalog catalog;
    for (const auto& [kk, entry] : stats.entries) {
        const auto& [kind, key] = kk;
        if (list_has(config.exclude_keys, kind, key)) continue;
        bool included = list_has(config.include_keys, kind, key);
        bool frequent = entry.occurrence_count >= config.min_occurrence &&
                        static_cast<double>(entry.distinct_values.size()) /
                                static_cast<double>(entry.occurrence_count) >=
                            config.diversity_ratio;
        if (!included && !frequent) continue;

        const CatalogMapping* mapping = nullptr;
        for (const auto& m : config.mappings)
            if (m.kind == kind && m.key == key) mapping = &m;
        if (!mapping)
            for (const auto& m : config.mappings)
                if (m.kind == "*" && m.key == key) mapping = &m;
        if (!mapping)
            fail(ErrorCode::Config,
                 "selected entity key '" + kind + ":" + key + "' has no target-kind mapping");
        catalog.entries[{kind, key}] = entry_from_mapping(*mapping, kind, config);
    }
    return catalog;
}

EntityKeyCatalog catalog_from_mappings(const Config& config) {
    EntityKeyCatalog catalog;
    for (const auto& m : config.mappings) {
        if (list_has(config.exclude_keys, m.kind, m.key)) continue;
        auto key = std::make_pair(m.kind, m.key);
        if (catalog.entries.count(key))
            fail(ErrorCode::Config, "duplicate catalog mapping for '" + m.kind + ":" + m.key + "'");
        catalog.entries[key] = entry_from_mapping(m, m.kind, config);
    }
    return catalog;
}

EntityRef primary_entity(const std::string& kind, const Json& payload, const Config& config) {
    if (const auto* decl = config.find_external(kind)) {
        std::map<std::string, std::string> fields;
        for (const auto& field : decl->identity_fields) {
            auto it = payload.find(field);
            if (it != payload.end() && it->is_primitive() && !it->is_null())
                fields[field] = scalar_to_string(*it);
        }
        if (fields.empty())
            fail(ErrorCode::Contract, "external snapshot of kind '" + kind +
                                          "' carries none of its identity fields");
        return EntityRef::by_composite(kind, std::move(fields));
    }
    auto meta_it = payload.find("metadata");
    if (meta_it == payload.end() || !meta_it->is_object())
        fail(ErrorCode::UnknownKind,
             "kind '" + kind + "' is neither metadata-bearing nor a declared external kind");
    const Json& meta = *meta_it;
    std::string uid, name, ns;
    if (meta.contains("uid") && meta["uid"].is_string()) uid = meta["uid"].get<std::string>();
    if (meta.contains("name") && meta["name"].is_string()) name = meta["name"].get<std::string>();
    if (meta.contains("namespace") && meta["namespace"].is_string())
        ns = meta["namespace"].get<std::string>();
    if (uid.empty() && name.empty())
        fail(ErrorCode::Contract, "native snapshot of kind '" + kind + "' has neither uid nor name");
    EntityRef ref;
    ref.kind = kind;
    if (!uid.empty()) {
        ref.mode = IdentityMode::Uid;
        ref.uid = uid;
    } else {
        ref.mode = IdentityMode::NameNamespace;
    }
    ref.name = name;
    ref.ns = ns;
    return ref;
}

namespace {

// One occurrence of a flat key in a payload: the scalar leaf plus the object
// it was read from, so sibling fields (kind discriminators, composite
// identity fields) can be resolved against the same array element.
struct KeyOccurrence {
    const Json* parent = nullptr;
    std::string member;  // final member name consumed from *parent
    const Json* leaf = nullptr;
};

void find_occurrences(const Json& node, const std::string& suffix, std::vector<KeyOccurrence>& out) {
    if (node.is_array()) {
        for (const auto& item : node) find_occurrences(item, suffix, out);
        return;
    }
    if (!node.is_object()) return;
    for (auto it = node.begin(); it != node.end(); ++it) {
        const std::string& member = it.key();
        if (digits_only(member)) {
            find_occurrences(it.value(), suffix, out);
            continue;
        }
        if (member == suffix) {
            const Json& child = it.value();
            if (child.is_primitive() && !child.is_null()) {
                out.push_back({&node, member, &child});
            } else if (child.is_array()) {
                for (const auto& elem : child)
                    if (elem.is_primitive() && !elem.is_null()) out.push_back({&node, member, &elem});
            }
        } else if (suffix.size() > member.size() + 1 && suffix.compare(0, member.size(), member) == 0 &&
                   suffix[member.size()] == '_') {
            find_occurrences(it.value(), suffix.substr(member.size() + 1), out);
        }
    }
}

// Resolves a single-step sibling member within the occurrence's parent.
std::optional<std::string> sibling_value(const KeyOccurrence& occ, const FlatKey& full_key,
                                         const FlatKey& sibling_key) {
    // The sibling must share the consumed prefix; only its final member differs.
    size_t prefix_len = full_key.size() - occ.member.size();
    if (sibling_key.size() <= prefix_len ||
        sibling_key.compare(0, prefix_len, full_key, 0, prefix_len) != 0)
        return std::nullopt;
    std::string member = sibling_key.substr(prefix_len);
    auto it = occ.parent->find(member);
    if (it == occ.parent->end() || !it->is_primitive() || it->is_null()) return std::nullopt;
    return scalar_to_string(*it);
}

bool uid_like(const std::string& member) {
    std::string lower;
    for (char c : member) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return lower == "uid" || (lower.size() > 3 && lower.compare(lower.size() - 3, 3, "uid") == 0);
}

bool is_cluster_scoped(const std::string& kind, const Config& config) {
    return std::find(config.cluster_scoped_kinds.begin(), config.cluster_scoped_kinds.end(), kind) !=
           config.cluster_scoped_kinds.end();
}

}  // namespace

ExtractedEntities extract_entities(const DedupedSnapshot& snapshot, const EntityKeyCatalog& catalog,
                                   const Config& config) {
    ExtractedEntities result;
    result.primary = primary_entity(snapshot.kind, snapshot.payload, config);

    for (const CatalogEntry* entry : catalog.entries_for_kind(snapshot.kind)) {
        std::vector<KeyOccurrence> occurrences;
        find_occurrences(snapshot.payload, entry->key, occurrences);
        for (const auto& occ : occurrences) {
            std::string target_kind = entry->target_kind;
            if (target_kind.empty()) {
                if (auto k = sibling_value(occ, entry->key, entry->target_kind_from))
                    target_kind = *k;
                else
                    continue;  // untypable occurrence
            }
            bool target_external = config.is_external_kind(target_kind);
            if (entry->edge_type == EdgeType::ReferInternal && target_external) continue;
            if (entry->edge_type == EdgeType::UseExternal && !target_external) continue;

            std::string value = scalar_to_string(*occ.leaf);
            if (value.empty()) continue;

            ExtractedReference ref;
            ref.key = entry->key;
            ref.edge_type = entry->edge_type;
            if (entry->edge_type == EdgeType::UseExternal) {
                std::map<std::string, std::string> fields;
                fields[occ.member] = value;
                if (const auto* decl = config.find_external(target_kind)) {
                    for (const auto& field : decl->identity_fields) {
                        auto it = occ.parent->find(field);
                        if (it != occ.parent->end() && it->is_primitive() && !it->is_null())
                            fields[field] = scalar_to_string(*it);
                    }
                }
                ref.target = EntityRef::by_composite(target_kind, std::move(fields));
            } else {
                RefValueField field = entry->value_field;
                if (field == RefValueField::Auto)
                    field = uid_like(occ.member) ? RefValueField::Uid : RefValueField::Name;
                if (field == RefValueField::Uid) {
                    ref.target = EntityRef::by_uid(target_kind, value);
                } else {
                    std::string ns =
                        is_cluster_scoped(target_kind, config) ? std::string() : result.primary.ns;
                    ref.target = EntityRef::by_name(target_kind, value, ns);
                }
            }
            result.references.push_back(std::move(ref));
        }
    }
    std::sort(result.references.begin(), result.references.end(),
              [](const ExtractedReference& a, const ExtractedReference& b) {
                  if (a.key != b.key) return a.key < b.key;
                  return a.target.canonical_key() < b.target.canonical_key();
              });
    return result;
}

void IdentityIndex::add(const std::string& kind, const std::string& name, const std::string& ns,
                        const std::string& uid, Timestamp t_min, Timestamp t_max) {
    auto& candidates = by_name_[{kind, name, ns}];
    for (auto& c : candidates) {
        if (c.uid == uid) {
            c.t_min = std::min(c.t_min, t_min);
            c.t_max = std::max(c.t_max, t_max);
            return;
        }
    }
    candidates.push_back({uid, t_min, t_max});
}

const std::vector<IdentityIndex::Candidate>* IdentityIndex::lookup(const std::string& kind,
                                                                   const std::string& name,
                                                                   const std::string& ns) const {
    auto it = by_name_.find(std::make_tuple(kind, name, ns));
    if (it == by_name_.end()) return nullptr;
    return &it->second;
}

IdentityIndex IdentityIndex::build(const std::vector<DedupedSnapshot>& corpus, const Config& config) {
    IdentityIndex index;
    for (const auto& snap : corpus) {
        if (config.is_external_kind(snap.kind)) continue;
        const auto& id = snap.identity;
        if (id.mode == IdentityMode::Uid && !id.name.empty())
            index.add(snap.kind, id.name, id.ns, id.uid, snap.t_min, snap.t_max);
    }
    return index;
}

EntityRef canonicalize(const EntityRef& ref, const IdentityIndex& index,
                       std::optional<std::pair<Timestamp, Timestamp>> window) {
    if (ref.mode == IdentityMode::Uid) {
        EntityRef out = ref;
        out.unresolved = false;
        return out;
    }
    if (ref.mode == IdentityMode::Composite) return ref;  // std::map keeps fields sorted

    const auto* candidates = index.lookup(ref.kind, ref.name, ref.ns);
    std::string resolved_ns = ref.ns;
    if (!candidates && !ref.ns.empty()) {
        candidates = index.lookup(ref.kind, ref.name, "");
        resolved_ns = "";
    }
    auto unresolved = [&ref]() {
        EntityRef out = ref;
        out.unresolved = true;
        return out;
    };
    if (!candidates || candidates->empty()) return unresolved();

    std::vector<IdentityIndex::Candidate> viable;
    if (window) {
        for (const auto& c : *candidates)
            if (c.t_min <= window->second && window->first <= c.t_max) viable.push_back(c);
    } else {
        viable = *candidates;
    }
    if (viable.empty()) return unresolved();
    if (viable.size() > 1) {
        bool overlapping = false;
        for (size_t i = 0; i < viable.size() && !overlapping; ++i)
            for (size_t j = i + 1; j < viable.size(); ++j)
                if (viable[i].t_min <= viable[j].t_max && viable[j].t_min <= viable[i].t_max) {
                    overlapping = true;
                    break;
                }
        if (overlapping || window) {
            std::string listing;
            for (const auto& c : viable) listing += (listing.empty() ? "" : ", ") + c.uid;
            fail(ErrorCode::Ambiguous, "reference " + ref.kind + "/" + ref.name +
                                           " matches multiple uids in overlapping time ranges: " +
                                           listing);
        }
        return unresolved();  // disjoint generations, no time context to pick one
    }

    EntityRef out = EntityRef::by_uid(ref.kind, viable.front().uid);
    out.name = ref.name;
    out.ns = resolved_ns;
    return out;
}

}  // namespace krca
