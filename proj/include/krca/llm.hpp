#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "krca/config.hpp"
#include "krca/entity.hpp"
#include "krca/incident.hpp"
#include "krca/prompts.hpp"
#include "krca/query.hpp"

namespace krca {

struct TokenUsage {
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;

    std::int64_t total() const { return prompt_tokens + completion_tokens; }
    TokenUsage& operator+=(const TokenUsage& other) {
        prompt_tokens += other.prompt_tokens;
        completion_tokens += other.completion_tokens;
        return *this;
    }
};

struct Completion {
    std::string text;
    TokenUsage usage;
};

struct CompletionParams {
    double temperature = 0.0;
    int max_tokens = 2048;
};

// Pluggable completion backend. Implementations must tolerate concurrent
// complete() calls.
class LlmBackend {
public:
    virtual ~LlmBackend() = default;
    virtual Completion complete(const std::string& prompt, const CompletionParams& params) = 0;
    virtual std::string name() const = 0;
    // Scoped mocks key their response tables by incident; others ignore this.
    virtual void begin_incident(const std::string& /*incident_id*/) {}
};

struct LocatorResult {
    std::string src_kind;
    std::vector<std::string> inter_kinds;
    std::string dest_kind;
    std::string rationale;
    TokenUsage usage;
};

struct DiagnosticSummary {
    EntityRef entity;
    // Empty when the response could not be parsed and the raw fragments were
    // kept as the observation.
    std::optional<bool> related;
    std::string observations;
    std::vector<std::string> cited_fragments;  // JSON pointers into the fragments
    TokenUsage usage;
};

struct Finding {
    std::string kind;
    std::string name;
    std::string ns;
    std::string note;
};

struct RcaReport {
    std::string conclusion;
    std::vector<Finding> findings;
    std::vector<std::string> commands;  // suggestions only, never executed
    int trial_index = 0;
    TokenUsage usage;
};

struct InvestigationVerdict {
    int score = 0;
    bool sufficient = false;
    std::string reasoning;
    TokenUsage usage;
};

// Per-attempt usage, broken down by stage.
struct StageUsage {
    TokenUsage locator;
    TokenUsage cypher;
    TokenUsage summarizer;
    TokenUsage report;
    TokenUsage estimator;

    TokenUsage total() const {
        TokenUsage t;
        t += locator;
        t += cypher;
        t += summarizer;
        t += report;
        t += estimator;
        return t;
    }
};

struct StageContext {
    LlmBackend& backend;
    const PromptLibrary& prompts;
    const Config& config;
    std::vector<std::string>* log = nullptr;
    // When set, every completion's usage is credited to its stage here, even
    // if the stage later throws.
    StageUsage* usage_sink = nullptr;

    void note(const std::string& message) const {
        if (log) log->push_back(message);
    }

    void add_usage(Stage stage, const TokenUsage& usage) const {
        if (!usage_sink) return;
        switch (stage) {
            case Stage::Locator: usage_sink->locator += usage; break;
            case Stage::CypherGen: usage_sink->cypher += usage; break;
            case Stage::Summarizer: usage_sink->summarizer += usage; break;
            case Stage::ReportGen: usage_sink->report += usage; break;
            case Stage::Estimator: usage_sink->estimator += usage; break;
        }
    }
};

LocatorResult locate_root_cause(const StageContext& ctx, const Incident& incident,
                                const std::string& src_kind, const KnowledgeConfig& knowledge,
                                const std::vector<std::string>& excluded);

struct CypherResult {
    std::string text;
    bool fallback_used = false;
    TokenUsage usage;
};

// LLM-backed Cypher generation, validated structurally against the
// deterministic compiler; on any mismatch the compiled text is substituted.
CypherResult generate_cypher_llm(const StageContext& ctx, const Metapath& extended_path,
                                 const Incident& incident, const EntityRef& incident_anchor);

DiagnosticSummary summarize_state(const StageContext& ctx, const StateBundleEntry& entry,
                                  const std::string& message);

RcaReport generate_report(const StageContext& ctx, const std::vector<DiagnosticSummary>& summaries,
                          const std::vector<EntityRef>& absences, const Incident& incident);

InvestigationVerdict estimate_investigation(const StageContext& ctx, const RcaReport& report,
                                            const Incident& incident);

// Helpers shared with tests and the rule oracle.
std::optional<Json> extract_json_object(const std::string& text);
std::string truncate_words(const std::string& text, int max_words);  // sentence-boundary cap
int count_words(const std::string& text);
bool json_pointer_exists(const Json& doc, const std::string& pointer);
bool cypher_structure_matches(const std::string& text, const Metapath& extended_path);
std::string render_conventions(const std::vector<NamingConvention>& conventions);

}  // namespace krca
