#pragma once

// Brute-force reference implementations used to check the engine. These live
// in test code only and deliberately avoid the production data paths: their
// own equality, their own union/merge, full edge scans, exhaustive search.

#include <map>
#include <set>
#include <string>
#include <vector>

#include "krca/meta_graph.hpp"
#include "krca/query.hpp"
#include "krca/snapshot.hpp"
#include "krca/state_graph.hpp"

namespace krca::test {

// --- ingest ---------------------------------------------------------------

struct OracleRun {
    Timestamp t_min;
    Timestamp t_max;
    Json payload;
    int count;
};

Json oracle_strip(const Json& value, const std::vector<std::string>& volatile_keys);
std::vector<OracleRun> oracle_dedup(const std::vector<RawSnapshot>& group,
                                    const std::vector<std::string>& volatile_keys);

// --- state graph ------------------------------------------------------------

struct OracleGraph {
    std::set<std::string> entity_ids;
    std::set<std::string> snapshot_ids;
    std::map<std::tuple<std::string, std::string, EdgeType, std::string>,
             std::pair<Timestamp, Timestamp>>
        edges;
};

// Per-snapshot graphs, then union + merge duplicates + consolidate.
OracleGraph oracle_build(const std::vector<DedupedSnapshot>& deduped,
                         const EntityKeyCatalog& catalog, const Config& config);

bool oracle_graph_equals(const StateGraph& graph, const OracleGraph& oracle,
                         std::string* mismatch = nullptr);

// --- metapath search ----------------------------------------------------------

std::vector<Metapath> oracle_find_metapaths(const MetaGraph& meta, const std::string& src,
                                            const std::string& dest,
                                            const std::vector<std::string>& inter, int max_len,
                                            int max_paths);

// --- query execution ------------------------------------------------------------

std::vector<std::vector<VertexId>> oracle_execute(const QueryPlan& plan, const StateGraph& graph);

// Entity-only canonical-key sequences (one string per statepath).
std::set<std::string> oracle_statepath_keys(const std::vector<std::vector<VertexId>>& bindings,
                                            const StateGraph& graph);

std::string statepath_key(const Statepath& path);

}  // namespace krca::test
