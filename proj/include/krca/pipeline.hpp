#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "krca/backends.hpp"
#include "krca/incident.hpp"
#include "krca/llm.hpp"
#include "krca/meta_graph.hpp"
#include "krca/query.hpp"

namespace krca {

enum class RcaStatus { Explained, Exhausted, Failed };

const char* rca_status_name(RcaStatus status);

struct AttemptRecord {
    int trial_index = 1;
    bool locator_ok = false;
    LocatorResult locator;
    int metapaths_tried = 0;
    std::vector<std::string> metapaths;  // serialized, in rank order as tried
    int statepaths_found = 0;
    std::optional<Statepath> statepath;  // the binding that was summarized
    std::optional<RcaReport> report;
    std::optional<InvestigationVerdict> verdict;
    StageUsage usage;
    double wall_seconds = 0.0;
    std::vector<std::string> log;
    std::string error;  // set when the trial aborted on a stage failure
};

struct RcaResult {
    RcaStatus status = RcaStatus::Failed;
    Incident incident;
    std::string src_kind;
    std::optional<RcaReport> final_report;
    std::optional<InvestigationVerdict> verdict;
    std::optional<Statepath> final_statepath;
    std::vector<AttemptRecord> attempts;
    std::string failure;  // diagnostics when status is Failed
};

struct RcaOptions {
    // Monotonic seconds; injectable so runs can be made byte-reproducible.
    std::function<double()> clock;
    // When config.interactive is set, replaces the estimator with user
    // validation.
    std::function<bool(const RcaReport&)> interactive_confirm;
};

RcaResult run_rca(const Incident& incident, const StateGraph& graph, const MetaGraph& meta,
                  const KnowledgeConfig& knowledge, LlmBackend& backend, const Config& config,
                  const RcaOptions& options = {});

// Known kinds for prompting: the meta graph's entity kinds plus any extras
// declared in the config.
KnowledgeConfig knowledge_for(const MetaGraph& meta, const Config& config);

std::string render_report_markdown(const RcaResult& result);
Json rca_result_to_json(const RcaResult& result);

// --- evaluation ------------------------------------------------------------

enum class EvalMode { Report, Retrieval };

struct EvalRow {
    Incident incident;
    EntityRef ground_truth;
};

// One corpus line; returns nothing and fills `error` when malformed.
std::optional<EvalRow> parse_corpus_row(const std::string& line, std::string& error);

bool ground_truth_matches(const EntityRef& ground_truth, const EntityRef& entity);
bool ground_truth_in_statepath(const EntityRef& ground_truth, const Statepath& path);
bool ground_truth_in_findings(const EntityRef& ground_truth, const RcaReport& report);

struct EvalTypeMetrics {
    std::string type_label;
    int correct = 0;
    int examples = 0;
    int attempts = 0;
    double total_seconds = 0;
    double total_prompt_tokens = 0;
    double total_completion_tokens = 0;

    double precision() const { return examples == 0 ? 0.0 : double(correct) / double(examples); }
    double avg_seconds() const { return attempts == 0 ? 0.0 : total_seconds / attempts; }
    double avg_prompt_tokens() const {
        return attempts == 0 ? 0.0 : total_prompt_tokens / attempts;
    }
    double avg_completion_tokens() const {
        return attempts == 0 ? 0.0 : total_completion_tokens / attempts;
    }
    double avg_total_tokens() const { return avg_prompt_tokens() + avg_completion_tokens(); }
};

// weighted = Total(correct)/Total(examples); arithmetic = mean of precisions.
std::pair<double, double> aggregate_metrics(const std::vector<std::pair<int, int>>& per_type);

struct EvalReport {
    EvalMode mode = EvalMode::Retrieval;
    std::vector<EvalTypeMetrics> types;  // sorted by type label
    double weighted_mean = 0;
    double arithmetic_mean = 0;
    std::size_t skipped_rows = 0;
    std::vector<std::string> warnings;

    std::string precision_table() const;
    std::string cost_table() const;
    Json to_json() const;
};

EvalReport run_eval(const std::string& corpus_path, const StateGraph& graph, const MetaGraph& meta,
                    const KnowledgeConfig& knowledge, LlmBackend& backend, const Config& config,
                    EvalMode mode, const RcaOptions& options = {});

}  // namespace krca
