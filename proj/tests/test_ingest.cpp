#include <doctest.h>

#include <random>
#include <sstream>

#include "krca/error.hpp"
#include "krca/snapshot.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace krca;

namespace {

RawSnapshot pod_snap(const std::string& uid, Timestamp t, Json payload) {
    payload["metadata"]["uid"] = uid;
    payload["metadata"]["name"] = "pod-" + uid;
    payload["metadata"]["namespace"] = "ns1";
    RawSnapshot snap;
    snap.collected_at = t;
    snap.kind = "Pod";
    snap.payload = std::move(payload);
    return snap;
}

}  // namespace

TEST_CASE("load_snapshot_stream: empty input yields empty sequence") {
    std::istringstream in("");
    auto result = parse_snapshot_stream(in, "mem");
    CHECK(result.records.empty());
    CHECK(result.skipped == 0);
}

TEST_CASE("load_snapshot_stream: malformed lines are skipped and counted") {
    std::ostringstream feed;
    feed << R"({"collected_at": "2020-12-10T00:00:00Z", "source": "s", "kind": "Pod", "payload": {"metadata": {"uid": "u1", "name": "p"}}})"
         << "\n";
    feed << "this is not json\n";
    feed << R"({"collected_at": "2020-12-10T00:05:00Z", "source": "s", "kind": "Pod", "payload": {"metadata": {"uid": "u1", "name": "p"}}})"
         << "\n";
    feed << R"({"collected_at": "2020-12-10T00:10:00Z", "source": "s", "kind": "Event", "payload": {"metadata": {"uid": "e1"}}})"
         << "\n";
    std::istringstream in(feed.str());
    auto result = parse_snapshot_stream(in, "mem");
    CHECK(result.records.size() == 3);
    CHECK(result.skipped == 1);
    CHECK(result.warnings.size() == 1);
}

TEST_CASE("load_snapshot_stream: envelope fields parse verbatim") {
    std::istringstream in(
        R"({"collected_at": "2020-12-10T00:00:00Z", "source": "etcd", "kind": "Pod", "payload": {"metadata": {"uid": "u"}}})");
    auto result = parse_snapshot_stream(in, "mem");
    REQUIRE(result.records.size() == 1);
    CHECK(result.records[0].collected_at == test::kBaseTime);
    CHECK(result.records[0].kind == "Pod");
    CHECK(result.records[0].source == "etcd");
    CHECK(format_rfc3339(result.records[0].collected_at) == "2020-12-10T00:00:00Z");
}

TEST_CASE("load_snapshot_stream: missing kind or timestamp is skipped with warning") {
    std::ostringstream feed;
    feed << R"({"collected_at": "2020-12-10T00:00:00Z", "payload": {}})" << "\n";
    feed << R"({"kind": "Pod", "payload": {}})" << "\n";
    feed << R"({"collected_at": "not-a-time", "kind": "Pod", "payload": {}})" << "\n";
    std::istringstream in(feed.str());
    auto result = parse_snapshot_stream(in, "mem");
    CHECK(result.records.empty());
    CHECK(result.skipped == 3);
}

TEST_CASE("load_snapshot_stream: unreadable file is fatal") {
    CHECK_THROWS_AS(load_snapshot_stream("/nonexistent/snapshots.jsonl"), Error);
}

TEST_CASE("payload_equal ignores key order") {
    Config config;
    CHECK(payload_equal(Json{{"a", 1}, {"b", 2}}, Json{{"b", 2}, {"a", 1}},
                        config.volatile_keys));
}

TEST_CASE("payload_equal drops volatile metadata fields") {
    Config config = Config::defaults();
    Json a = {{"metadata", {{"uid", "u"}, {"resourceVersion", "100"}}}};
    Json b = {{"metadata", {{"uid", "u"}, {"resourceVersion", "999"}}}};
    CHECK(payload_equal(a, b, config.volatile_keys));
}

TEST_CASE("payload_equal sees material differences") {
    Config config = Config::defaults();
    Json a = {{"status", {{"phase", "Running"}}}};
    Json b = {{"status", {{"phase", "Failed"}}}};
    CHECK_FALSE(payload_equal(a, b, config.volatile_keys));
}

TEST_CASE("dedup_consecutive: empty group") {
    Config config = Config::defaults();
    auto out = dedup_consecutive({}, EntityRef::by_uid("Pod", "u"), config);
    CHECK(out.empty());
}

TEST_CASE("dedup_consecutive: payload runs collapse to time ranges") {
    Config config = Config::defaults();
    Json a = {{"metadata", {{"uid", "u1"}, {"name", "p"}}}, {"status", {{"phase", "Running"}}}};
    Json b = {{"metadata", {{"uid", "u1"}, {"name", "p"}}}, {"status", {{"phase", "Failed"}}}};
    std::vector<RawSnapshot> group;
    group.push_back({0, "s", "Pod", a});
    group.push_back({5, "s", "Pod", a});
    group.push_back({10, "s", "Pod", b});
    auto out = dedup_consecutive(group, EntityRef::by_uid("Pod", "u1"), config);
    REQUIRE(out.size() == 2);
    CHECK(out[0].t_min == 0);
    CHECK(out[0].t_max == 5);
    CHECK(out[0].run_count == 2);
    CHECK(out[1].t_min == 10);
    CHECK(out[1].t_max == 10);
}

TEST_CASE("dedup_consecutive: five-minute polling with one replica change") {
    // A Deployment polled every 5 minutes; the replica count changes at the
    // third poll, so two deduped records remain.
    Config config = Config::defaults();
    auto payload = [](int replicas) {
        return Json{{"metadata", {{"uid", "d1"}, {"name", "dep"}, {"namespace", "ns"}}},
                    {"spec", {{"replicas", replicas}}}};
    };
    std::vector<RawSnapshot> group;
    group.push_back({0, "s", "Deployment", payload(3)});
    group.push_back({300, "s", "Deployment", payload(3)});
    group.push_back({600, "s", "Deployment", payload(5)});
    group.push_back({900, "s", "Deployment", payload(5)});
    auto out = dedup_consecutive(group, EntityRef::by_uid("Deployment", "d1"), config);
    REQUIRE(out.size() == 2);
    CHECK(out[0].t_max == 300);
    CHECK(out[1].t_min == 600);
    CHECK(out[1].payload["spec"]["replicas"] == 5);
}

TEST_CASE("dedup_consecutive: the last payload of a run is retained") {
    Config config = Config::defaults();
    Json first = {{"metadata", {{"uid", "u1"}, {"name", "p"}, {"resourceVersion", "1"}}}};
    Json last = {{"metadata", {{"uid", "u1"}, {"name", "p"}, {"resourceVersion", "2"}}}};
    std::vector<RawSnapshot> group{{0, "s", "Pod", first}, {5, "s", "Pod", last}};
    auto out = dedup_consecutive(group, EntityRef::by_uid("Pod", "u1"), config);
    REQUIRE(out.size() == 1);
    CHECK(out[0].payload["metadata"]["resourceVersion"] == "2");
}

TEST_CASE("dedup_consecutive: mixed identities violate the contract") {
    Config config = Config::defaults();
    std::vector<RawSnapshot> group;
    group.push_back(pod_snap("u1", 0, Json::object()));
    group.push_back(pod_snap("u2", 5, Json::object()));
    CHECK_THROWS_AS(dedup_consecutive(group, EntityRef::by_uid("Pod", "u1"), config), Error);
}

TEST_CASE("dedup properties: no adjacent equal payloads, run counts cover the input") {
    Config config = Config::defaults();
    std::mt19937 rng(42);
    for (int round = 0; round < 50; ++round) {
        std::vector<RawSnapshot> group;
        Timestamp t = 0;
        int n = std::uniform_int_distribution<int>(0, 200)(rng);
        for (int i = 0; i < n; ++i) {
            Json payload = {{"metadata", {{"uid", "u1"}, {"name", "p"}}},
                            {"value", std::uniform_int_distribution<int>(0, 3)(rng)}};
            group.push_back({t, "s", "Pod", payload});
            t += std::uniform_int_distribution<int>(0, 400)(rng);
        }
        auto out = dedup_consecutive(group, EntityRef::by_uid("Pod", "u1"), config);

        int covered = 0;
        for (size_t i = 0; i < out.size(); ++i) {
            covered += out[i].run_count;
            CHECK(out[i].t_min <= out[i].t_max);
            if (i > 0)
                CHECK_FALSE(payload_equal(out[i - 1].payload, out[i].payload,
                                          config.volatile_keys));  // idempotence
        }
        CHECK(covered == n);
    }
}

TEST_CASE("dedup matches the brute-force oracle on random streams") {
    Config config = Config::defaults();
    std::mt19937 rng(7);
    for (int round = 0; round < 30; ++round) {
        std::vector<RawSnapshot> group;
        Timestamp t = 0;
        int n = std::uniform_int_distribution<int>(1, 1000)(rng);
        for (int i = 0; i < n; ++i) {
            Json payload = {{"metadata",
                             {{"uid", "u1"},
                              {"name", "p"},
                              {"resourceVersion", std::to_string(i)}}},
                            {"state", std::uniform_int_distribution<int>(0, 5)(rng)}};
            group.push_back({t, "s", "Pod", payload});
            t += std::uniform_int_distribution<int>(0, 600)(rng);
        }
        auto expected = test::oracle_dedup(group, config.volatile_keys);
        auto actual = dedup_consecutive(group, EntityRef::by_uid("Pod", "u1"), config);
        REQUIRE(actual.size() == expected.size());
        for (size_t i = 0; i < actual.size(); ++i) {
            CHECK(actual[i].t_min == expected[i].t_min);
            CHECK(actual[i].t_max == expected[i].t_max);
            CHECK(actual[i].run_count == expected[i].count);
            CHECK(actual[i].payload == expected[i].payload);
        }
    }
}

TEST_CASE("dedup_stream groups per entity and skips unknown kinds") {
    Config config = Config::defaults();
    std::vector<RawSnapshot> records;
    records.push_back(pod_snap("u1", 0, Json::object()));
    records.push_back(pod_snap("u2", 1, Json::object()));
    records.push_back(pod_snap("u1", 5, Json::object()));
    records.push_back({3, "s", "mystery", Json{{"blob", 1}}});  // no metadata, not external
    auto result = dedup_stream(records, config);
    CHECK(result.skipped_unknown == 1);
    REQUIRE(result.snapshots.size() == 2);  // u1 run collapsed, u2 single
    CHECK(result.snapshots[0].identity.uid == "u1");
    CHECK(result.snapshots[0].run_count == 2);
    CHECK(result.snapshots[1].identity.uid == "u2");
}
