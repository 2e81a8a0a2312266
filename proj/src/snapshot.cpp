#include "krca/snapshot.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "krca/error.hpp"

namespace krca {

LoadResult load_snapshot_stream(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::Io, "cannot open snapshot file '" + path + "'");
    return parse_snapshot_stream(in, path);
}

LoadResult parse_snapshot_stream(std::istream& in, const std::string& origin) {
    LoadResult result;
    std::string line;
    std::size_t lineno = 0;
    auto skip = [&](const std::string& why) {
        ++result.skipped;
        result.warnings.push_back(origin + ":" + std::to_string(lineno) + ": " + why);
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        Json envelope = Json::parse(line, nullptr, false);
        if (envelope.is_discarded() || !envelope.is_object()) {
            skip("not a JSON object");
            continue;
        }
        if (!envelope.contains("kind") || !envelope["kind"].is_string() ||
            envelope["kind"].get<std::string>().empty()) {
            skip("missing kind");
            continue;
        }
        if (!envelope.contains("collected_at") || !envelope["collected_at"].is_string()) {
            skip("missing collected_at");
            continue;
        }
        auto ts = parse_rfc3339(envelope["collected_at"].get<std::string>());
        if (!ts) {
            skip("collected_at is not RFC 3339");
            continue;
        }
        if (!envelope.contains("payload") || !envelope["payload"].is_object()) {
            skip("payload missing or not an object");
            continue;
        }
        RawSnapshot snap;
        snap.collected_at = *ts;
        snap.kind = envelope["kind"].get<std::string>();
        if (envelope.contains("source") && envelope["source"].is_string())
            snap.source = envelope["source"].get<std::string>();
        snap.payload = envelope["payload"];
        result.records.push_back(std::move(snap));
    }
    return result;
}

Json strip_volatile(const Json& value, const std::vector<std::string>& volatile_keys) {
    if (value.is_object()) {
        Json out = Json::object();
        for (auto it = value.begin(); it != value.end(); ++it) {
            if (std::find(volatile_keys.begin(), volatile_keys.end(), it.key()) !=
                volatile_keys.end())
                continue;
            out[it.key()] = strip_volatile(it.value(), volatile_keys);
        }
        return out;
    }
    if (value.is_array()) {
        Json out = Json::array();
        for (const auto& item : value) out.push_back(strip_volatile(item, volatile_keys));
        return out;
    }
    return value;
}

bool payload_equal(const Json& a, const Json& b, const std::vector<std::string>& volatile_keys) {
    return strip_volatile(a, volatile_keys) == strip_volatile(b, volatile_keys);
}

std::vector<DedupedSnapshot> dedup_consecutive(const std::vector<RawSnapshot>& group,
                                               const EntityRef& identity, const Config& config) {
    std::vector<DedupedSnapshot> out;
    if (group.empty()) return out;
    const std::string expected = identity.canonical_key();
    for (size_t i = 0; i < group.size(); ++i) {
        if (i > 0 && group[i].collected_at < group[i - 1].collected_at)
            fail(ErrorCode::Contract, "dedup_consecutive: timestamps not non-decreasing");
        if (group[i].kind != group[0].kind)
            fail(ErrorCode::Contract, "dedup_consecutive: mixed kinds in one group");
        if (primary_entity(group[i].kind, group[i].payload, config).canonical_key() != expected)
            fail(ErrorCode::Contract, "dedup_consecutive: mixed entity identities in one group");
    }

    DedupedSnapshot current;
    current.identity = identity;
    current.kind = group[0].kind;
    current.t_min = group[0].collected_at;
    current.t_max = group[0].collected_at;
    current.payload = group[0].payload;
    current.run_count = 1;
    for (size_t i = 1; i < group.size(); ++i) {
        const auto& rec = group[i];
        if (payload_equal(rec.payload, current.payload, config.volatile_keys)) {
            current.t_max = rec.collected_at;
            current.payload = rec.payload;  // retain the last one
            ++current.run_count;
        } else {
            out.push_back(std::move(current));
            current = DedupedSnapshot{};
            current.identity = identity;
            current.kind = rec.kind;
            current.t_min = rec.collected_at;
            current.t_max = rec.collected_at;
            current.payload = rec.payload;
            current.run_count = 1;
        }
    }
    out.push_back(std::move(current));
    return out;
}

DedupResult dedup_stream(const std::vector<RawSnapshot>& records, const Config& config) {
    DedupResult result;
    // Group per entity, preserving first-appearance order of groups.
    std::vector<std::pair<EntityRef, std::vector<RawSnapshot>>> groups;
    std::map<std::string, size_t> group_index;
    for (const auto& rec : records) {
        EntityRef id;
        try {
            id = primary_entity(rec.kind, rec.payload, config);
        } catch (const Error& e) {
            ++result.skipped_unknown;
            result.warnings.push_back(std::string("skipped snapshot: ") + e.what());
            continue;
        }
        auto key = id.canonical_key();
        auto it = group_index.find(key);
        if (it == group_index.end()) {
            group_index.emplace(key, groups.size());
            groups.push_back({id, {rec}});
        } else {
            groups[it->second].second.push_back(rec);
        }
    }
    for (auto& [identity, group] : groups) {
        std::stable_sort(group.begin(), group.end(),
                         [](const RawSnapshot& a, const RawSnapshot& b) {
                             return a.collected_at < b.collected_at;
                         });
        auto deduped = dedup_consecutive(group, identity, config);
        for (auto& snap : deduped) result.snapshots.push_back(std::move(snap));
    }
    return result;
}

}  // namespace krca
