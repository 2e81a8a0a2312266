#pragma once

#include <json.hpp>
#include <string>
#include <vector>

#include "krca/config.hpp"
#include "krca/entity.hpp"
#include "krca/time.hpp"

namespace krca {

// One observation of one entity at one collection time.
struct RawSnapshot {
    Timestamp collected_at = 0;
    std::string source;
    std::string kind;
    Json payload;
};

// A maximal run of payload-identical consecutive observations, collapsed to
// its last payload and the [first, last] collection window.
struct DedupedSnapshot {
    EntityRef identity;
    std::string kind;
    Timestamp t_min = 0;
    Timestamp t_max = 0;
    Json payload;
    int run_count = 1;  // raw records collapsed into this one
};

struct LoadResult {
    std::vector<RawSnapshot> records;
    std::size_t skipped = 0;
    std::vector<std::string> warnings;
};

// Reads newline-delimited snapshot envelopes; malformed lines are skipped and
// counted. Throws on an unreadable file.
LoadResult load_snapshot_stream(const std::string& path);
LoadResult parse_snapshot_stream(std::istream& in, const std::string& origin);

// Removes object members named in `volatile_keys` anywhere in the tree.
Json strip_volatile(const Json& value, const std::vector<std::string>& volatile_keys);

// Structural equality after dropping volatile fields. Key order never matters.
bool payload_equal(const Json& a, const Json& b, const std::vector<std::string>& volatile_keys);

// Collapses consecutive payload-equal records of one entity group.
// Precondition: all records share `identity` and timestamps are non-decreasing.
std::vector<DedupedSnapshot> dedup_consecutive(const std::vector<RawSnapshot>& group,
                                               const EntityRef& identity, const Config& config);

struct DedupResult {
    std::vector<DedupedSnapshot> snapshots;
    std::size_t skipped_unknown = 0;
    std::vector<std::string> warnings;
};

// Groups a raw stream per primary entity (first-appearance order), sorts each
// group by collection time, and dedups each group.
DedupResult dedup_stream(const std::vector<RawSnapshot>& records, const Config& config);

}  // namespace krca
