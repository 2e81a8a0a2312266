#include <doctest.h>

#include <set>

#include "krca/backends.hpp"
#include "krca/error.hpp"
#include "krca/pipeline.hpp"
#include "support/fixtures.hpp"

using namespace krca;

namespace {

// Scripted locator, rule oracle for everything else.
class ScriptedLocatorBackend : public LlmBackend {
public:
    explicit ScriptedLocatorBackend(std::vector<std::string> locator_responses)
        : responses_(std::move(locator_responses)) {}

    Completion complete(const std::string& prompt, const CompletionParams& params) override {
        if (prompt.rfind("## Stage: RootCauseLocator", 0) == 0) {
            std::string text = responses_[std::min(cursor_, responses_.size() - 1)];
            ++cursor_;
            Completion completion;
            completion.text = text;
            completion.usage.prompt_tokens = estimate_tokens(prompt);
            completion.usage.completion_tokens = estimate_tokens(text);
            return completion;
        }
        return oracle_.complete(prompt, params);
    }
    std::string name() const override { return "scripted-locator"; }

private:
    RuleOracleBackend oracle_;
    std::vector<std::string> responses_;
    std::size_t cursor_ = 0;
};

// Rule oracle with the estimator pinned to a fixed score.
class PinnedEstimatorBackend : public LlmBackend {
public:
    explicit PinnedEstimatorBackend(int score) : score_(score) {}

    Completion complete(const std::string& prompt, const CompletionParams& params) override {
        if (prompt.rfind("## Stage: InvestigationEstimator", 0) == 0) {
            Json doc = {{"score", score_}, {"reasoning", "pinned"}};
            Completion completion;
            completion.text = doc.dump();
            completion.usage.prompt_tokens = estimate_tokens(prompt);
            completion.usage.completion_tokens = estimate_tokens(completion.text);
            return completion;
        }
        return oracle_.complete(prompt, params);
    }
    std::string name() const override { return "pinned-estimator"; }

private:
    RuleOracleBackend oracle_;
    int score_;
};

RcaOptions fixed_clock_options() {
    RcaOptions options;
    options.clock = []() { return 0.0; };
    return options;
}

}  // namespace

TEST_CASE("quota incident is explained in one attempt, naming the ResourceQuota") {
    test::ClusterFixture fixture;
    auto graph = fixture.graph();
    auto meta = fixture.meta(graph);
    auto knowledge = knowledge_for(meta, fixture.config());
    RuleOracleBackend oracle;

    auto result = run_rca(fixture.scenario("ExceedQuotaJob").incident, graph, meta, knowledge,
                          oracle, fixture.config());
    CHECK(result.status == RcaStatus::Explained);
    CHECK(result.src_kind == "Job");
    REQUIRE(result.attempts.size() == 1);
    REQUIRE(result.final_report.has_value());
    CHECK(result.final_report->conclusion.find("ResourceQuota") != std::string::npos);
    CHECK(result.final_report->conclusion.find("compute-resources") != std::string::npos);
    REQUIRE(result.verdict.has_value());
    CHECK(result.verdict->sufficient);
    REQUIRE(result.final_statepath.has_value());
    REQUIRE(result.final_statepath->entities.size() == 3);
    CHECK(result.final_statepath->entities[2].kind == "ResourceQuota");
    REQUIRE(!result.final_report->commands.empty());
    CHECK(result.final_report->commands[0].rfind("kubectl", 0) == 0);
}

TEST_CASE("an estimator that never accepts yields exactly three attempts and Exhausted") {
    test::ClusterFixture fixture;
    auto graph = fixture.graph();
    auto meta = fixture.meta(graph);
    auto knowledge = knowledge_for(meta, fixture.config());
    PinnedEstimatorBackend backend(0);

    auto result = run_rca(fixture.scenario("ExceedQuotaJob").incident, graph, meta, knowledge,
                          backend, fixture.config());
    CHECK(result.status == RcaStatus::Exhausted);
    CHECK(result.attempts.size() == 3);  // "up to three trials"
    // The best-scoring report is still handed back to the operator.
    CHECK(result.final_report.has_value());
}

TEST_CASE("retry never repeats a destKind within one incident") {
    test::ClusterFixture fixture;
    auto graph = fixture.graph();
    auto meta = fixture.meta(graph);
    auto knowledge = knowledge_for(meta, fixture.config());
    PinnedEstimatorBackend backend(0);

    auto result = run_rca(fixture.scenario("ExceedQuotaJob").incident, graph, meta, knowledge,
                          backend, fixture.config());
    std::set<std::string> dest_kinds;
    for (const auto& attempt : result.attempts) {
        REQUIRE(attempt.locator_ok);
        CHECK(dest_kinds.insert(attempt.locator.dest_kind).second);  // no repeats
    }
}

TEST_CASE("a dud destKind consumes one trial, the next one explains") {
    test::ClusterFixture fixture;
    auto graph = fixture.graph();
    auto meta = fixture.meta(graph);
    auto knowledge = knowledge_for(meta, fixture.config());
    // Trial 1 aims at nfs (kind-level path exists but instantiates nothing for
    // this tenant); trial 2 aims at the quota.
    ScriptedLocatorBackend backend({
        R"({"srcKind": "Job", "interKinds": [], "destKind": "nfs", "rationale": "wrong"})",
        R"({"srcKind": "Job", "interKinds": ["Namespace"], "destKind": "ResourceQuota", "rationale": "right"})",
    });

    auto result = run_rca(fixture.scenario("ExceedQuotaJob").incident, graph, meta, knowledge,
                          backend, fixture.config());
    CHECK(result.status == RcaStatus::Explained);
    REQUIRE(result.attempts.size() == 2);
    CHECK(result.attempts[0].locator.dest_kind == "nfs");
    CHECK(result.attempts[0].statepaths_found == 0);
    CHECK(result.attempts[1].locator.dest_kind == "ResourceQuota");
}

TEST_CASE("a destKind with no metapath at all moves to the next trial") {
    test::ClusterFixture fixture;
    Config config = fixture.config();
    config.max_path_len = 1;  // only direct edges reachable
    auto graph = fixture.graph();
    auto meta = fixture.meta(graph);
    auto knowledge = knowledge_for(meta, config);
    ScriptedLocatorBackend backend({
        R"({"srcKind": "Job", "interKinds": [], "destKind": "nfs", "rationale": "unreachable"})",
        R"({"srcKind": "Job", "interKinds": [], "destKind": "Namespace", "rationale": "direct"})",
    });

    auto result = run_rca(fixture.scenario("ExceedQuotaJob").incident, graph, meta, knowledge,
                          backend, config);
    REQUIRE(result.attempts.size() >= 2);
    CHECK(result.attempts[0].metapaths_tried == 0);  // find_metapaths came back empty
}

TEST_CASE("a hallucinating locator aborts the trial but not the run") {
    test::ClusterFixture fixture;
    auto graph = fixture.graph();
    auto meta = fixture.meta(graph);
    auto knowledge = knowledge_for(meta, fixture.config());
    ScriptedLocatorBackend backend({
        R"({"srcKind": "Job", "interKinds": [], "destKind": "FluxCapacitor", "rationale": "?"})",
        R"({"srcKind": "Job", "interKinds": ["Namespace"], "destKind": "ResourceQuota", "rationale": "ok"})",
    });

    auto result = run_rca(fixture.scenario("ExceedQuotaJob").incident, graph, meta, knowledge,
                          backend, fixture.config());
    CHECK(result.status == RcaStatus::Explained);
    REQUIRE(result.attempts.size() == 2);
    CHECK_FALSE(result.attempts[0].locator_ok);
    CHECK(result.attempts[0].error.find("FluxCapacitor") != std::string::npos);
}

TEST_CASE("unknown incidents fail with diagnostics") {
    test::ClusterFixture fixture;
    auto graph = fixture.graph();
    auto meta = fixture.meta(graph);
    auto knowledge = knowledge_for(meta, fixture.config());
    RuleOracleBackend oracle;
    Incident incident{"never seen before", "tenant-a", test::kBaseTime, "", ""};

    auto result = run_rca(incident, graph, meta, knowledge, oracle, fixture.config());
    CHECK(result.status == RcaStatus::Failed);
    CHECK(result.attempts.empty());
    CHECK(result.failure.find("events scanned") != std::string::npos);
}

TEST_CASE("attempt records account time and tokens consistently") {
    test::ClusterFixture fixture;
    auto graph = fixture.graph();
    auto meta = fixture.meta(graph);
    auto knowledge = knowledge_for(meta, fixture.config());
    RuleOracleBackend oracle;
    CountingBackend counting(oracle);

    auto result = run_rca(fixture.scenario("NoSuchFileDir").incident, graph, meta, knowledge,
                          counting, fixture.config());
    CHECK(result.status == RcaStatus::Explained);
    TokenUsage summed;
    for (const auto& attempt : result.attempts) {
        CHECK(attempt.wall_seconds >= 0.0);
        TokenUsage stage_sum = attempt.usage.total();
        summed += stage_sum;
        CHECK(stage_sum.prompt_tokens > 0);
    }
    CHECK(summed.prompt_tokens == counting.total().prompt_tokens);
    CHECK(summed.completion_tokens == counting.total().completion_tokens);
}

TEST_CASE("whole-pipeline determinism under the rule oracle") {
    test::ClusterFixture fixture;
    auto graph = fixture.graph();
    auto meta = fixture.meta(graph);
    auto knowledge = knowledge_for(meta, fixture.config());

    RuleOracleBackend oracle1, oracle2;
    auto r1 = run_rca(fixture.scenario("UnboundPVC").incident, graph, meta, knowledge, oracle1,
                      fixture.config(), fixed_clock_options());
    auto r2 = run_rca(fixture.scenario("UnboundPVC").incident, graph, meta, knowledge, oracle2,
                      fixture.config(), fixed_clock_options());
    CHECK(rca_result_to_json(r1).dump() == rca_result_to_json(r2).dump());
    CHECK(render_report_markdown(r1) == render_report_markdown(r2));
}

TEST_CASE("run_rca leaves the graph untouched") {
    test::ClusterFixture fixture;
    auto graph = fixture.graph();
    auto meta = fixture.meta(graph);
    auto knowledge = knowledge_for(meta, fixture.config());
    std::string before = graph.to_json().dump();
    RuleOracleBackend oracle;
    run_rca(fixture.scenario("ExceedQuotaJob").incident, graph, meta, knowledge, oracle,
            fixture.config());
    CHECK(graph.to_json().dump() == before);
}

TEST_CASE("interactive confirmation replaces the estimator when enabled") {
    test::ClusterFixture fixture;
    Config config = fixture.config();
    config.interactive = true;
    auto graph = fixture.graph();
    auto meta = fixture.meta(graph);
    auto knowledge = knowledge_for(meta, config);
    RuleOracleBackend oracle;

    RcaOptions options;
    int asked = 0;
    options.interactive_confirm = [&asked](const RcaReport&) {
        ++asked;
        return true;
    };
    auto result = run_rca(fixture.scenario("ExceedQuotaJob").incident, graph, meta, knowledge,
                          oracle, config, options);
    CHECK(result.status == RcaStatus::Explained);
    CHECK(asked == 1);
    CHECK(result.verdict->reasoning == "interactive user validation");
}

TEST_CASE("aggregate_metrics: symmetric two-type corpus") {
    auto [weighted, arithmetic] = aggregate_metrics({{9, 10}, {1, 10}});
    CHECK(weighted == doctest::Approx(0.50).epsilon(1e-12));
    CHECK(arithmetic == doctest::Approx(0.50).epsilon(1e-12));
}

TEST_CASE("aggregate_metrics: dataset-shaped totals give the published weighted mean") {
    std::vector<std::pair<int, int>> table{
        {20, 20}, {24, 24}, {39, 39}, {20, 20}, {21, 21}, {18, 24}, {37, 45}, {18, 32},
        {19, 20}, {32, 32}, {43, 43}, {56, 56}, {54, 57}, {47, 47}, {14, 24}, {56, 56},
        {21, 21}, {10, 38}};
    int total_correct = 0, total_examples = 0;
    for (auto [c, e] : table) {
        total_correct += c;
        total_examples += e;
    }
    REQUIRE(total_correct == 549);
    REQUIRE(total_examples == 619);
    auto [weighted, arithmetic] = aggregate_metrics(table);
    CHECK(weighted == doctest::Approx(549.0 / 619.0).epsilon(1e-9));
}

TEST_CASE("parse_corpus_row rejects malformed rows with a reason") {
    std::string error;
    CHECK_FALSE(parse_corpus_row("not json", error).has_value());
    CHECK(error == "not a JSON object");
    CHECK_FALSE(parse_corpus_row(R"({"message": "m"})", error).has_value());
    CHECK_FALSE(parse_corpus_row(
                    R"({"message": "m", "timestamp": "2020-12-10T00:00:00Z"})", error)
                    .has_value());
    auto row = parse_corpus_row(
        R"({"message": "m", "namespace": "ns", "timestamp": "2020-12-10T00:00:00Z",)"
        R"( "type_label": "T", "ground_truth": {"kind": "Pod", "name": "p", "namespace": "ns"}})",
        error);
    REQUIRE(row.has_value());
    CHECK(row->incident.type_label == "T");
    CHECK(row->ground_truth.kind == "Pod");
}

TEST_CASE("ground truth matching covers uid, name, and composite identities") {
    auto by_uid = EntityRef::by_uid("Pod", "u1");
    by_uid.name = "web";
    CHECK(ground_truth_matches(by_uid, EntityRef::by_uid("Pod", "u1")));
    CHECK_FALSE(ground_truth_matches(by_uid, EntityRef::by_uid("Pod", "u2")));
    // uid ground truth still matches a never-observed (name-based) vertex
    CHECK(ground_truth_matches(by_uid, EntityRef::by_name("Pod", "web", "ns")));

    auto by_name = EntityRef::by_name("Secret", "tls", "ns1");
    CHECK(ground_truth_matches(by_name, EntityRef::by_name("Secret", "tls", "ns1")));
    CHECK_FALSE(ground_truth_matches(by_name, EntityRef::by_name("Secret", "tls", "ns2")));

    auto composite = EntityRef::by_composite("nfs", {{"server", "s"}, {"path", "/p"}});
    auto observed = EntityRef::by_composite("nfs", {{"server", "s"}, {"path", "/p"},
                                                    {"exists", "false"}});
    CHECK(ground_truth_matches(composite, observed));
    CHECK_FALSE(ground_truth_matches(composite,
                                     EntityRef::by_composite("nfs", {{"server", "s"}})));
}

TEST_CASE("run_eval on the synthetic corpus: retrieval precision 1.0 per type") {
    test::ClusterFixture fixture;
    test::TempDir tmp;
    std::string corpus = tmp.file("corpus.jsonl", fixture.corpus_jsonl());
    auto graph = fixture.graph();
    auto meta = fixture.meta(graph);
    auto knowledge = knowledge_for(meta, fixture.config());
    RuleOracleBackend oracle;

    auto report = run_eval(corpus, graph, meta, knowledge, oracle, fixture.config(),
                           EvalMode::Retrieval);
    CHECK(report.types.size() == 8);
    for (const auto& type : report.types) {
        CAPTURE(type.type_label);
        CHECK(type.examples == 1);
        CHECK(type.precision() == doctest::Approx(1.0));
        CHECK(type.attempts >= 1);
        CHECK(type.avg_total_tokens() > 0);
    }
    CHECK(report.weighted_mean == doctest::Approx(1.0));
    CHECK(report.arithmetic_mean == doctest::Approx(1.0));
    CHECK(report.skipped_rows == 0);
    CHECK(report.precision_table().find("ExceedQuotaJob") != std::string::npos);
    CHECK(report.cost_table().find("TotalToken") != std::string::npos);
}

TEST_CASE("run_eval report mode finds the ground truth in findings") {
    test::ClusterFixture fixture;
    test::TempDir tmp;
    std::string corpus = tmp.file("corpus.jsonl", fixture.corpus_jsonl());
    auto graph = fixture.graph();
    auto meta = fixture.meta(graph);
    auto knowledge = knowledge_for(meta, fixture.config());
    RuleOracleBackend oracle;

    auto report =
        run_eval(corpus, graph, meta, knowledge, oracle, fixture.config(), EvalMode::Report);
    for (const auto& type : report.types) {
        CAPTURE(type.type_label);
        CHECK(type.precision() == doctest::Approx(1.0));
    }
}

TEST_CASE("run_eval skips malformed corpus rows with warnings") {
    test::ClusterFixture fixture;
    test::TempDir tmp;
    std::string corpus = tmp.file("corpus.jsonl", "garbage line\n" + fixture.corpus_jsonl());
    auto graph = fixture.graph();
    auto meta = fixture.meta(graph);
    auto knowledge = knowledge_for(meta, fixture.config());
    RuleOracleBackend oracle;

    auto report = run_eval(corpus, graph, meta, knowledge, oracle, fixture.config(),
                           EvalMode::Retrieval);
    CHECK(report.skipped_rows == 1);
    REQUIRE(report.warnings.size() == 1);
    CHECK(report.warnings[0].find(":1:") != std::string::npos);
}
