#include "support/fixtures.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "krca/error.hpp"

namespace krca::test {

namespace {
constexpr Timestamp kHour = 3600;
constexpr Timestamp kPoll = 300;  // 5-minute polling interval
}  // namespace

ClusterFixture::ClusterFixture() : config_(Config::defaults()) {
    // --- S1 ExceedQuotaJob (tenant-a) ---------------------------------------
    Timestamp t1 = kBaseTime;
    add_native("Namespace", "ns-a-uid", "tenant-a", "",
               Json{{"status", {{"phase", "Active"}}}}, t1);
    add_native("Job", "job-a-uid", "es-cronjob-1607637300", "tenant-a",
               Json{{"spec", {{"completions", 1}, {"parallelism", 1}}},
                    {"status", {{"active", 0}, {"failed", 0}}}},
               t1);
    add_native("ResourceQuota", "rq-a-uid", "compute-resources", "tenant-a",
               Json{{"spec", {{"hard", {{"pods", "50"}}}}},
                    {"status", {{"hard", {{"pods", "50"}}}, {"used", {{"pods", "50"}}}}}},
               t1);
    std::string msg1 =
        "Error creating: pods \"es-cronjob-1607637300-fpb68\" is forbidden: exceeded quota: "
        "compute-resources, requested: pods=1, used: pods=50, limited: pods=50";
    add_event("ev-a-uid", "es-cronjob-1607637300.1607637301", "tenant-a", "Job",
              "es-cronjob-1607637300", "job-a-uid", "FailedCreate", msg1, t1 + kPoll);
    {
        Scenario s;
        s.reason = "FailedCreate";
        s.type_label = "ExceedQuotaJob";
        s.incident = {msg1, "tenant-a", t1 + kPoll, s.reason, s.type_label};
        s.ground_truth = EntityRef::by_name("ResourceQuota", "compute-resources", "tenant-a");
        scenarios_.push_back(std::move(s));
    }

    // --- S2 ExceedQuotaReplicaSet (tenant-b) --------------------------------
    Timestamp t2 = kBaseTime + kHour;
    add_native("Namespace", "ns-b-uid", "tenant-b", "",
               Json{{"status", {{"phase", "Active"}}}}, t2);
    add_native("ReplicaSet", "rs-b-uid", "normal-es-s31-66bf4bb56d", "tenant-b",
               Json{{"spec", {{"replicas", 3}}}, {"status", {{"replicas", 2}}}}, t2);
    add_native("ResourceQuota", "rq-b-uid", "compute-resources-b", "tenant-b",
               Json{{"spec", {{"hard", {{"limits.memory", "5400Gi"}}}}},
                    {"status",
                     {{"hard", {{"limits.memory", "5400Gi"}}},
                      {"used", {{"limits.memory", "5372Gi"}}}}}},
               t2);
    std::string msg2 =
        "Error creating: pods \"normal-es-s31-66bf4bb56d-zp2m4\" is forbidden: exceeded quota: "
        "compute-resources-b, requested: limits.memory=32Gi, used: limits.memory=5372Gi, "
        "limited: limits.memory=5400Gi";
    add_event("ev-b-uid", "normal-es-s31-66bf4bb56d.1607641901", "tenant-b", "ReplicaSet",
              "normal-es-s31-66bf4bb56d", "rs-b-uid", "FailedCreate", msg2, t2 + kPoll);
    {
        Scenario s;
        s.reason = "FailedCreate";
        s.type_label = "ExceedQuotaReplicaSet";
        s.incident = {msg2, "tenant-b", t2 + kPoll, s.reason, s.type_label};
        s.ground_truth = EntityRef::by_name("ResourceQuota", "compute-resources-b", "tenant-b");
        scenarios_.push_back(std::move(s));
    }

    // --- S3 ExceedQuotaStatefulSet (tenant-c) -------------------------------
    Timestamp t3 = kBaseTime + 2 * kHour;
    add_native("Namespace", "ns-c-uid", "tenant-c", "",
               Json{{"status", {{"phase", "Active"}}}}, t3);
    add_native("StatefulSet", "sts-c-uid", "es-c1", "tenant-c",
               Json{{"spec", {{"replicas", 1}}}, {"status", {{"replicas", 0}}}}, t3);
    add_native("ResourceQuota", "rq-c-uid", "compute-resources-c", "tenant-c",
               Json{{"spec", {{"hard", {{"pods", "50"}}}}},
                    {"status", {{"hard", {{"pods", "50"}}}, {"used", {{"pods", "50"}}}}}},
               t3);
    std::string msg3 =
        "create Pod es-c1-0 in StatefulSet es-c1 failed error: pods \"es-c1-0\" is forbidden: "
        "exceeded quota: compute-resources-c, requested: pods=1, used: pods=50, limited: pods=50";
    add_event("ev-c-uid", "es-c1.1607645501", "tenant-c", "StatefulSet", "es-c1", "sts-c-uid",
              "FailedCreate", msg3, t3 + kPoll);
    {
        Scenario s;
        s.reason = "FailedCreate";
        s.type_label = "ExceedQuotaStatefulSet";
        s.incident = {msg3, "tenant-c", t3 + kPoll, s.reason, s.type_label};
        s.ground_truth = EntityRef::by_name("ResourceQuota", "compute-resources-c", "tenant-c");
        scenarios_.push_back(std::move(s));
    }

    // --- S4 NoSuchFileDir (tenant-d) -----------------------------------------
    Timestamp t4 = kBaseTime + 3 * kHour;
    const std::string pv_name = "pvc-ca00f7a6-fb99-49a1-9881-e1f98db9297d";
    const std::string nfs_server = "172.16.112.63";
    const std::string nfs_path = "/mnt/k8s_nfs_pv/common-mysql-pvc-0";
    add_native("Namespace", "ns-d-uid", "tenant-d", "",
               Json{{"status", {{"phase", "Active"}}}}, t4);
    add_native("Pod", "pod-d-uid", "common-mysql-0", "tenant-d",
               Json{{"spec",
                     {{"volumes",
                       Json::array({Json{{"name", "data"},
                                         {"persistentVolumeClaim",
                                          {{"claimName", "common-mysql-pvc-0"}}}}})}}},
                    {"status", {{"phase", "Pending"}}}},
               t4);
    add_native("PersistentVolumeClaim", "pvc-d-uid", "common-mysql-pvc-0", "tenant-d",
               Json{{"spec", {{"volumeName", pv_name}}}, {"status", {{"phase", "Bound"}}}}, t4);
    add_native("PersistentVolume", "pv-d-uid", pv_name, "",
               Json{{"spec",
                     {{"claimRef",
                       {{"kind", "PersistentVolumeClaim"},
                        {"name", "common-mysql-pvc-0"},
                        {"namespace", "tenant-d"},
                        {"uid", "pvc-d-uid"}}},
                      {"nfs", {{"server", nfs_server}, {"path", nfs_path}}}}},
                    {"status", {{"phase", "Bound"}}}},
               t4);
    add_external("nfs",
                 Json{{"server", nfs_server}, {"path", nfs_path}, {"exists", false}}, t4);
    std::string msg4 = "(combined from similar events): MountVolume.SetUp failed for volume \"" +
                       pv_name + "\" : mount failed: exit status 32. Mounting command: mount -t " +
                       "nfs " + nfs_server + ":" + nfs_path +
                       " failed, reason given by server: No such file or directory";
    add_event("ev-d-uid", "common-mysql-0.1607649101", "tenant-d", "Pod", "common-mysql-0",
              "pod-d-uid", "FailedMount", msg4, t4 + kPoll);
    {
        Scenario s;
        s.reason = "FailedMount";
        s.type_label = "NoSuchFileDir";
        s.incident = {msg4, "tenant-d", t4 + kPoll, s.reason, s.type_label};
        s.ground_truth =
            EntityRef::by_composite("nfs", {{"server", nfs_server}, {"path", nfs_path}});
        scenarios_.push_back(std::move(s));
    }

    // --- S5 ConfigMapNotFound (tenant-e) -------------------------------------
    Timestamp t5 = kBaseTime + 4 * kHour;
    add_native("Namespace", "ns-e-uid", "tenant-e", "",
               Json{{"status", {{"phase", "Active"}}}}, t5);
    add_native("Pod", "pod-e-uid", "es-crontab-job-1", "tenant-e",
               Json{{"spec",
                     {{"volumes", Json::array({Json{{"name", "white-list"},
                                                    {"configMap",
                                                     {{"name", "gen-white-list-conf"}}}}})}}},
                    {"status", {{"phase", "Pending"}}}},
               t5);
    std::string msg5 =
        "Error: cannot find volume \"gen-white-list-conf\" to mount into container "
        "\"es-crontab-job\"";
    add_event("ev-e-uid", "es-crontab-job-1.1607652701", "tenant-e", "Pod", "es-crontab-job-1",
              "pod-e-uid", "Failed", msg5, t5 + kPoll);
    {
        Scenario s;
        s.reason = "Failed";
        s.type_label = "ConfigMapNotFound";
        s.incident = {msg5, "tenant-e", t5 + kPoll, s.reason, s.type_label};
        s.ground_truth = EntityRef::by_name("ConfigMap", "gen-white-list-conf", "tenant-e");
        scenarios_.push_back(std::move(s));
    }

    // --- S6 SecretNotFound (tenant-f) ----------------------------------------
    Timestamp t6 = kBaseTime + 5 * kHour;
    add_native("Namespace", "ns-f-uid", "tenant-f", "",
               Json{{"status", {{"phase", "Active"}}}}, t6);
    add_native("Pod", "pod-f-uid", "api-server-0", "tenant-f",
               Json{{"spec",
                     {{"volumes", Json::array({Json{{"name", "tls"},
                                                    {"secret",
                                                     {{"secretName", "app-tls-cert"}}}}})}}},
                    {"status", {{"phase", "Pending"}}}},
               t6);
    std::string msg6 =
        "MountVolume.SetUp failed for volume \"app-tls-cert\" : secret \"app-tls-cert\" not found";
    add_event("ev-f-uid", "api-server-0.1607656301", "tenant-f", "Pod", "api-server-0",
              "pod-f-uid", "FailedMount", msg6, t6 + kPoll);
    {
        Scenario s;
        s.reason = "FailedMount";
        s.type_label = "SecretNotFound";
        s.incident = {msg6, "tenant-f", t6 + kPoll, s.reason, s.type_label};
        s.ground_truth = EntityRef::by_name("Secret", "app-tls-cert", "tenant-f");
        scenarios_.push_back(std::move(s));
    }

    // --- S7 UnboundPVC (tenant-g) ---------------------------------------------
    Timestamp t7 = kBaseTime + 6 * kHour;
    add_native("Namespace", "ns-g-uid", "tenant-g", "",
               Json{{"status", {{"phase", "Active"}}}}, t7);
    add_native("Pod", "pod-g-uid", "web-0", "tenant-g",
               Json{{"spec",
                     {{"volumes",
                       Json::array({Json{{"name", "data"},
                                         {"persistentVolumeClaim",
                                          {{"claimName", "data-web-0"}}}}})}}},
                    {"status", {{"phase", "Pending"}}}},
               t7);
    add_native("PersistentVolumeClaim", "pvc-g-uid", "data-web-0", "tenant-g",
               Json{{"spec", {{"storageClassName", "standard"}}},
                    {"status", {{"phase", "Pending"}}}},
               t7);
    std::string msg7_event = "pod has unbound immediate PersistentVolumeClaims (repeated 19 times)";
    std::string msg7_incident = "pod has unbound immediate PersistentVolumeClaims";
    add_event("ev-g-uid", "web-0.1607659901", "tenant-g", "Pod", "web-0", "pod-g-uid",
              "FailedScheduling", msg7_event, t7 + kPoll);
    {
        Scenario s;
        s.reason = "FailedScheduling";
        s.type_label = "UnboundPVC";
        s.incident = {msg7_incident, "tenant-g", t7 + kPoll, s.reason, s.type_label};
        s.ground_truth = EntityRef::by_name("PersistentVolumeClaim", "data-web-0", "tenant-g");
        scenarios_.push_back(std::move(s));
    }

    // --- S8 ServiceAccountNotFound (tenant-h) ---------------------------------
    Timestamp t8 = kBaseTime + 7 * kHour;
    add_native("Namespace", "ns-h-uid", "tenant-h", "",
               Json{{"status", {{"phase", "Active"}}}}, t8);
    add_native("ReplicaSet", "rs-h-uid", "api-6d4b75cb6d", "tenant-h",
               Json{{"spec",
                     {{"replicas", 2},
                      {"template",
                       {{"spec", {{"serviceAccountName", "custom-sa"}}}}}}},
                    {"status", {{"replicas", 0}}}},
               t8);
    std::string msg8 =
        "Error creating: pods \"api-6d4b75cb6d-\" is forbidden: error looking up service account "
        "tenant-h/custom-sa: serviceaccount \"custom-sa\" not found";
    add_event("ev-h-uid", "api-6d4b75cb6d.1607663501", "tenant-h", "ReplicaSet", "api-6d4b75cb6d",
              "rs-h-uid", "FailedCreate", msg8, t8 + kPoll);
    {
        Scenario s;
        s.reason = "FailedCreate";
        s.type_label = "ServiceAccountNotFound";
        s.incident = {msg8, "tenant-h", t8 + kPoll, s.reason, s.type_label};
        s.ground_truth = EntityRef::by_name("ServiceAccount", "custom-sa", "tenant-h");
        scenarios_.push_back(std::move(s));
    }
}

const Scenario& ClusterFixture::scenario(const std::string& type_label) const {
    for (const auto& s : scenarios_)
        if (s.type_label == type_label) return s;
    fail(ErrorCode::Internal, "no fixture scenario '" + type_label + "'");
}

void ClusterFixture::add_native(const std::string& kind, const std::string& uid,
                                const std::string& name, const std::string& ns, Json body,
                                Timestamp t, int polls) {
    Json payload = std::move(body);
    payload["metadata"] = Json{{"uid", uid}, {"name", name}};
    if (!ns.empty()) payload["metadata"]["namespace"] = ns;
    for (int i = 0; i < polls; ++i) {
        RawSnapshot snap;
        snap.collected_at = t + i * kPoll;
        snap.source = "fixture";
        snap.kind = kind;
        snap.payload = payload;
        snap.payload["metadata"]["resourceVersion"] = std::to_string(1000 + i);  // volatile
        raw_.push_back(std::move(snap));
    }
}

void ClusterFixture::add_external(const std::string& kind, Json payload, Timestamp t) {
    for (int i = 0; i < 2; ++i) {
        RawSnapshot snap;
        snap.collected_at = t + i * kPoll;
        snap.source = "fixture";
        snap.kind = kind;
        snap.payload = payload;
        raw_.push_back(std::move(snap));
    }
}

void ClusterFixture::add_event(const std::string& uid, const std::string& name,
                               const std::string& ns, const std::string& involved_kind,
                               const std::string& involved_name, const std::string& involved_uid,
                               const std::string& reason, const std::string& message,
                               Timestamp t) {
    RawSnapshot snap;
    snap.collected_at = t;
    snap.source = "fixture";
    snap.kind = "Event";
    snap.payload = Json{{"metadata", {{"uid", uid}, {"name", name}, {"namespace", ns}}},
                        {"involvedObject",
                         {{"kind", involved_kind},
                          {"name", involved_name},
                          {"namespace", ns},
                          {"uid", involved_uid}}},
                        {"reason", reason},
                        {"message", message},
                        {"type", "Warning"}};
    raw_.push_back(std::move(snap));
}

std::vector<DedupedSnapshot> ClusterFixture::deduped() const {
    return dedup_stream(raw_, config_).snapshots;
}

StateGraph ClusterFixture::graph() const {
    EntityKeyCatalog catalog = catalog_from_mappings(config_);
    return build_state_graph(deduped(), catalog, config_).graph;
}

MetaGraph ClusterFixture::meta(const StateGraph& graph) const {
    return build_meta_graph(graph, config_);
}

std::string ClusterFixture::snapshots_jsonl() const {
    std::ostringstream out;
    for (const auto& snap : raw_) {
        Json envelope = Json::object();
        envelope["collected_at"] = format_rfc3339(snap.collected_at);
        envelope["source"] = snap.source;
        envelope["kind"] = snap.kind;
        envelope["payload"] = snap.payload;
        out << envelope.dump() << "\n";
    }
    return out.str();
}

std::string ClusterFixture::corpus_jsonl() const {
    std::ostringstream out;
    for (const auto& s : scenarios_) {
        Json row = Json::object();
        row["message"] = s.incident.message;
        row["namespace"] = s.incident.ns;
        row["timestamp"] = format_rfc3339(s.incident.timestamp);
        row["reason"] = s.reason;
        row["type_label"] = s.type_label;
        Json gt = Json::object();
        gt["kind"] = s.ground_truth.kind;
        if (s.ground_truth.mode == IdentityMode::Composite) {
            gt["composite"] = s.ground_truth.composite;
        } else {
            gt["name"] = s.ground_truth.name;
            if (!s.ground_truth.ns.empty()) gt["namespace"] = s.ground_truth.ns;
        }
        row["ground_truth"] = std::move(gt);
        out << row.dump() << "\n";
    }
    return out.str();
}

std::vector<RawSnapshot> random_corpus(std::mt19937& rng, int max_snapshots,
                                       const Config& config) {
    (void)config;
    auto pick = [&rng](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };

    int n_namespaces = pick(1, 2);
    int n_pvs = pick(1, 3);
    int n_pvcs = pick(1, 4);
    int n_pods = pick(1, 5);
    int n_events = pick(0, 4);

    struct Entity {
        std::string kind, uid, name, ns;
        Json payload;
    };
    std::vector<Entity> pool;

    for (int i = 0; i < n_namespaces; ++i) {
        Entity e{"Namespace", "ns-uid-" + std::to_string(i), "ns-" + std::to_string(i), "", {}};
        e.payload = Json{{"metadata", {{"uid", e.uid}, {"name", e.name}}},
                         {"status", {{"phase", "Active"}}}};
        pool.push_back(std::move(e));
    }
    auto ns_of = [&](int i) { return "ns-" + std::to_string(i % n_namespaces); };

    for (int i = 0; i < n_pvcs; ++i) {
        Entity e{"PersistentVolumeClaim", "pvc-uid-" + std::to_string(i),
                 "pvc-" + std::to_string(i), ns_of(i), {}};
        e.payload = Json{{"metadata",
                          {{"uid", e.uid}, {"name", e.name}, {"namespace", e.ns}}},
                         {"status", {{"phase", pick(0, 1) ? "Bound" : "Pending"}}}};
        pool.push_back(std::move(e));
    }
    for (int i = 0; i < n_pvs; ++i) {
        Entity e{"PersistentVolume", "pv-uid-" + std::to_string(i), "pv-" + std::to_string(i), "",
                 {}};
        Json spec = Json::object();
        if (pick(0, 1)) spec["claimRef"] = Json{{"uid", "pvc-uid-" + std::to_string(pick(0, n_pvcs - 1))}};
        if (pick(0, 1))
            spec["nfs"] = Json{{"server", "10.0.0." + std::to_string(pick(1, 3))},
                               {"path", "/exports/" + std::to_string(pick(0, 2))}};
        e.payload = Json{{"metadata", {{"uid", e.uid}, {"name", e.name}}}, {"spec", spec}};
        pool.push_back(std::move(e));
    }
    for (int i = 0; i < n_pods; ++i) {
        Entity e{"Pod", "pod-uid-" + std::to_string(i), "pod-" + std::to_string(i), ns_of(i), {}};
        Json volumes = Json::array();
        int n_vols = pick(0, 2);
        for (int v = 0; v < n_vols; ++v)
            volumes.push_back(Json{
                {"name", "vol-" + std::to_string(v)},
                {"persistentVolumeClaim", {{"claimName", "pvc-" + std::to_string(pick(0, n_pvcs - 1))}}}});
        e.payload = Json{{"metadata",
                          {{"uid", e.uid}, {"name", e.name}, {"namespace", e.ns}}},
                         {"spec", {{"volumes", volumes}}},
                         {"status", {{"phase", "Running"}}}};
        pool.push_back(std::move(e));
    }
    for (int i = 0; i < n_events; ++i) {
        int target = pick(0, n_pods - 1);
        Entity e{"Event", "ev-uid-" + std::to_string(i), "ev-" + std::to_string(i),
                 ns_of(target), {}};
        e.payload = Json{{"metadata",
                          {{"uid", e.uid}, {"name", e.name}, {"namespace", e.ns}}},
                         {"involvedObject",
                          {{"kind", "Pod"},
                           {"name", "pod-" + std::to_string(target)},
                           {"uid", "pod-uid-" + std::to_string(target)}}},
                         {"reason", "Synthetic"},
                         {"message", "synthetic event " + std::to_string(i)}};
        pool.push_back(std::move(e));
    }
    // External NFS observations matching the PV spec values.
    for (int i = 0; i < pick(0, 2); ++i) {
        Entity e{"nfs", "", "", "", {}};
        e.payload = Json{{"server", "10.0.0." + std::to_string(pick(1, 3))},
                         {"path", "/exports/" + std::to_string(pick(0, 2))},
                         {"exists", pick(0, 1) == 1}};
        pool.push_back(std::move(e));
    }

    std::vector<RawSnapshot> corpus;
    Timestamp t = kBaseTime;
    while (static_cast<int>(corpus.size()) < max_snapshots) {
        Entity& e = pool[static_cast<size_t>(pick(0, static_cast<int>(pool.size()) - 1))];
        RawSnapshot snap;
        snap.collected_at = t;
        snap.source = "random";
        snap.kind = e.kind;
        if (e.kind != "nfs" && pick(0, 3) == 0)
            e.payload["status"] = Json{{"phase", "Phase-" + std::to_string(pick(0, 3))}};
        snap.payload = e.payload;
        corpus.push_back(std::move(snap));
        t += pick(1, 600);
        if (pick(0, 9) == 0) break;
    }
    return corpus;
}

TempDir::TempDir() {
    auto base = std::filesystem::temp_directory_path() / "krca-test-XXXXXX";
    std::string tmpl = base.string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
}

TempDir::~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
}

std::string TempDir::file(const std::string& name, const std::string& content) const {
    std::string full = path_ + "/" + name;
    std::ofstream out(full);
    out << content;
    return full;
}

}  // namespace krca::test
