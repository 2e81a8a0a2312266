#pragma once

#include <random>
#include <string>
#include <vector>

#include "krca/meta_graph.hpp"
#include "krca/pipeline.hpp"
#include "krca/snapshot.hpp"
#include "krca/state_graph.hpp"

namespace krca::test {

// 2020-12-10T00:00:00Z
inline constexpr Timestamp kBaseTime = 1607558400;

struct Scenario {
    std::string reason;
    std::string type_label;
    Incident incident;
    EntityRef ground_truth;
};

// A synthetic cluster exhibiting eight incident types: three quota
// exhaustions (Job/ReplicaSet/StatefulSet), a missing NFS export, missing
// ConfigMap/Secret/ServiceAccount references, and an unbound PVC. Each
// scenario lives in its own namespace one hour apart.
class ClusterFixture {
public:
    ClusterFixture();

    const Config& config() const { return config_; }
    const std::vector<RawSnapshot>& raw() const { return raw_; }
    const std::vector<Scenario>& scenarios() const { return scenarios_; }
    const Scenario& scenario(const std::string& type_label) const;

    std::vector<DedupedSnapshot> deduped() const;
    StateGraph graph() const;
    MetaGraph meta(const StateGraph& graph) const;

    std::string snapshots_jsonl() const;
    std::string corpus_jsonl() const;

private:
    void add_native(const std::string& kind, const std::string& uid, const std::string& name,
                    const std::string& ns, Json body, Timestamp t, int polls = 2);
    void add_external(const std::string& kind, Json payload, Timestamp t);
    void add_event(const std::string& uid, const std::string& name, const std::string& ns,
                   const std::string& involved_kind, const std::string& involved_name,
                   const std::string& involved_uid, const std::string& reason,
                   const std::string& message, Timestamp t);

    Config config_;
    std::vector<RawSnapshot> raw_;
    std::vector<Scenario> scenarios_;
};

// Random snapshot corpus for oracle-equivalence tests: namespaces, pods,
// PVCs, PVs with NFS backing, events, all wired through the default catalog
// keys. Names are unique per entity so canonicalization never turns ambiguous.
std::vector<RawSnapshot> random_corpus(std::mt19937& rng, int max_snapshots,
                                       const Config& config);

// Unique writable directory under the system temp root.
class TempDir {
public:
    TempDir();
    ~TempDir();
    const std::string& path() const { return path_; }
    std::string file(const std::string& name, const std::string& content) const;

private:
    std::string path_;
};

}  // namespace krca::test
