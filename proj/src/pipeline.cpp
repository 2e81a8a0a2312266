#include "krca/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "krca/error.hpp"

namespace krca {

const char* rca_status_name(RcaStatus status) {
    switch (status) {
        case RcaStatus::Explained: return "Explained";
        case RcaStatus::Exhausted: return "Exhausted";
        case RcaStatus::Failed: return "Failed";
    }
    return "?";
}

KnowledgeConfig knowledge_for(const MetaGraph& meta, const Config& config) {
    KnowledgeConfig knowledge = config.knowledge;
    std::set<std::string> kinds(knowledge.known_kinds.begin(), knowledge.known_kinds.end());
    for (const auto& kind : meta.entity_kinds()) kinds.insert(kind);
    knowledge.known_kinds.assign(kinds.begin(), kinds.end());
    return knowledge;
}

namespace {

double monotonic_seconds() {
    auto now = std::chrono::steady_clock::now().time_since_epoch();
    return std::chrono::duration<double>(now).count();
}

std::string incident_id_for(const Incident& incident) {
    return incident.type_label.empty() ? incident.message : incident.type_label;
}

}  // namespace

RcaResult run_rca(const Incident& incident, const StateGraph& graph, const MetaGraph& meta,
                  const KnowledgeConfig& knowledge, LlmBackend& backend, const Config& config,
                  const RcaOptions& options) {
    RcaResult result;
    result.incident = incident;
    auto clock = options.clock ? options.clock : monotonic_seconds;
    backend.begin_incident(incident_id_for(incident));

    PromptLibrary prompts =
        config.prompt_dir.empty() ? PromptLibrary::builtin() : PromptLibrary::from_dir(config.prompt_dir);

    IncidentMatch match;
    try {
        match = match_incident_event(graph, incident, config);
    } catch (const Error& e) {
        result.status = RcaStatus::Failed;
        result.failure = e.what();
        return result;
    }
    result.src_kind = match.src_kind;

    std::vector<std::string> excluded;
    for (int trial = 1; trial <= config.max_trials; ++trial) {
        AttemptRecord attempt;
        attempt.trial_index = trial;
        attempt.log = match.warnings;
        match.warnings.clear();
        double started = clock();
        StageContext ctx{backend, prompts, config, &attempt.log, &attempt.usage};
        bool explained = false;
        try {
            attempt.locator =
                locate_root_cause(ctx, incident, match.src_kind, knowledge, excluded);
            attempt.locator_ok = true;
            excluded.push_back(attempt.locator.dest_kind);

            MetapathLimits limits{config.max_path_len, config.max_paths};
            std::vector<Metapath> paths = find_metapaths(
                meta, match.src_kind, attempt.locator.dest_kind, attempt.locator.inter_kinds, limits);
            if (paths.empty())
                attempt.log.push_back("no metapath from " + match.src_kind + " to " +
                                      attempt.locator.dest_kind + "; retrying with a new destKind");

            for (const Metapath& path : paths) {
                ++attempt.metapaths_tried;
                attempt.metapaths.push_back(serialize_metapath(path));
                Metapath extended = extend_metapath(path, match.src_kind);

                QueryPlan plan = compile_plan(extended, match.event, match.event_state.t_min,
                                              incident.timestamp, config);
                CypherResult cypher = generate_cypher_llm(ctx, extended, incident, match.event);
                if (cypher.fallback_used)
                    attempt.log.push_back("metapath " + std::to_string(attempt.metapaths_tried) +
                                          ": compiled Cypher substituted for the generated one");

                std::vector<Statepath> statepaths = execute_plan(plan, graph);
                attempt.statepaths_found += static_cast<int>(statepaths.size());
                if (statepaths.empty()) continue;
                if (statepaths.size() > 1)
                    attempt.log.push_back("multiple statepaths (" +
                                          std::to_string(statepaths.size()) +
                                          "); summarizing the first in deterministic order");
                const Statepath& statepath = statepaths.front();
                attempt.statepath = statepath;

                StateBundle bundle = fetch_states(statepath, graph, incident.timestamp);
                std::vector<DiagnosticSummary> summaries;
                std::vector<EntityRef> absences;
                for (const auto& entry : bundle.entries) {
                    if (entry.absent)
                        absences.push_back(entry.entity);
                    else
                        summaries.push_back(summarize_state(ctx, entry, incident.message));
                }

                RcaReport report = generate_report(ctx, summaries, absences, incident);
                report.trial_index = trial;
                attempt.report = report;

                InvestigationVerdict verdict;
                if (config.interactive && options.interactive_confirm) {
                    bool accepted = options.interactive_confirm(report);
                    verdict.score = accepted ? 10 : 0;
                    verdict.sufficient = accepted;
                    verdict.reasoning = "interactive user validation";
                } else {
                    verdict = estimate_investigation(ctx, report, incident);
                }
                attempt.verdict = verdict;
                if (verdict.sufficient) {
                    explained = true;
                    break;
                }
            }
        } catch (const Error& e) {
            if (e.code() != ErrorCode::StageFailure && e.code() != ErrorCode::ValidationFailure)
                throw;
            attempt.error = e.what();
            attempt.log.push_back(std::string("trial aborted: ") + e.what());
        }
        attempt.wall_seconds = clock() - started;
        result.attempts.push_back(std::move(attempt));
        if (explained) {
            const AttemptRecord& last = result.attempts.back();
            result.status = RcaStatus::Explained;
            result.final_report = last.report;
            result.verdict = last.verdict;
            result.final_statepath = last.statepath;
            return result;
        }
    }

    // Trials exhausted: hand back the best-scoring report produced, if any.
    result.status = RcaStatus::Exhausted;
    const AttemptRecord* best = nullptr;
    for (const auto& attempt : result.attempts) {
        if (!attempt.report) continue;
        int score = attempt.verdict ? attempt.verdict->score : 0;
        int best_score = best && best->verdict ? best->verdict->score : -1;
        if (!best || score > best_score) best = &attempt;
    }
    if (best) {
        result.final_report = best->report;
        result.verdict = best->verdict;
        result.final_statepath = best->statepath;
    }
    return result;
}

// --- rendering ---------------------------------------------------------------

namespace {

std::string format_double(double value, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
    return buf;
}

Json usage_to_json(const StageUsage& usage) {
    auto one = [](const TokenUsage& u) {
        Json j = Json::object();
        j["prompt_tokens"] = u.prompt_tokens;
        j["completion_tokens"] = u.completion_tokens;
        j["total_tokens"] = u.total();
        return j;
    };
    Json j = Json::object();
    j["locator"] = one(usage.locator);
    j["cypher"] = one(usage.cypher);
    j["summarizer"] = one(usage.summarizer);
    j["report"] = one(usage.report);
    j["estimator"] = one(usage.estimator);
    j["total"] = one(usage.total());
    return j;
}

Json report_to_json(const RcaReport& report) {
    Json j = Json::object();
    j["conclusion"] = report.conclusion;
    Json findings = Json::array();
    for (const auto& f : report.findings) {
        Json item = Json::object();
        item["kind"] = f.kind;
        item["name"] = f.name;
        item["namespace"] = f.ns;
        item["note"] = f.note;
        findings.push_back(std::move(item));
    }
    j["findings"] = std::move(findings);
    j["commands"] = report.commands;
    j["trial_index"] = report.trial_index;
    return j;
}

}  // namespace

Json rca_result_to_json(const RcaResult& result) {
    Json doc = Json::object();
    doc["status"] = rca_status_name(result.status);
    Json incident = Json::object();
    incident["message"] = result.incident.message;
    incident["namespace"] = result.incident.ns;
    incident["timestamp"] = format_rfc3339(result.incident.timestamp);
    if (!result.incident.reason.empty()) incident["reason"] = result.incident.reason;
    if (!result.incident.type_label.empty()) incident["type_label"] = result.incident.type_label;
    doc["incident"] = std::move(incident);
    doc["src_kind"] = result.src_kind;
    if (!result.failure.empty()) doc["failure"] = result.failure;
    if (result.final_report) doc["final_report"] = report_to_json(*result.final_report);
    if (result.verdict) {
        Json v = Json::object();
        v["score"] = result.verdict->score;
        v["sufficient"] = result.verdict->sufficient;
        v["reasoning"] = result.verdict->reasoning;
        doc["verdict"] = std::move(v);
    }
    if (result.final_statepath) doc["final_statepath"] = statepath_to_json(*result.final_statepath);
    Json attempts = Json::array();
    for (const auto& attempt : result.attempts) {
        Json a = Json::object();
        a["trial_index"] = attempt.trial_index;
        if (attempt.locator_ok) {
            a["dest_kind"] = attempt.locator.dest_kind;
            a["inter_kinds"] = attempt.locator.inter_kinds;
            a["rationale"] = attempt.locator.rationale;
        }
        a["metapaths_tried"] = attempt.metapaths_tried;
        a["metapaths"] = attempt.metapaths;
        a["statepaths_found"] = attempt.statepaths_found;
        if (attempt.statepath) a["statepath"] = statepath_to_json(*attempt.statepath);
        if (attempt.report) a["report"] = report_to_json(*attempt.report);
        if (attempt.verdict) {
            a["score"] = attempt.verdict->score;
            a["sufficient"] = attempt.verdict->sufficient;
        }
        a["usage"] = usage_to_json(attempt.usage);
        a["wall_seconds"] = attempt.wall_seconds;
        if (!attempt.error.empty()) a["error"] = attempt.error;
        if (!attempt.log.empty()) a["log"] = attempt.log;
        attempts.push_back(std::move(a));
    }
    doc["attempts"] = std::move(attempts);
    return doc;
}

std::string render_report_markdown(const RcaResult& result) {
    std::ostringstream out;
    out << "# Root Cause Analysis Report\n\n";
    out << "- **Status:** " << rca_status_name(result.status) << "\n";
    out << "- **Message:** " << result.incident.message << "\n";
    out << "- **Namespace:** " << result.incident.ns << "\n";
    out << "- **Time:** " << format_rfc3339(result.incident.timestamp) << "\n";
    if (!result.src_kind.empty()) out << "- **Source kind:** " << result.src_kind << "\n";
    out << "\n";

    if (result.status == RcaStatus::Failed) {
        out << "## Failure\n\n" << result.failure << "\n";
        return out.str();
    }
    if (result.final_report) {
        out << "## Conclusion\n\n" << result.final_report->conclusion << "\n\n";
        if (result.verdict)
            out << "Investigation score: " << result.verdict->score << "/10 ("
                << (result.verdict->sufficient ? "sufficient" : "insufficient") << ")\n\n";
        if (!result.final_report->findings.empty()) {
            out << "## Findings\n\n";
            out << "| Kind | Name | Namespace | Note |\n|---|---|---|---|\n";
            for (const auto& f : result.final_report->findings)
                out << "| " << f.kind << " | " << f.name << " | " << f.ns << " | " << f.note
                    << " |\n";
            out << "\n";
        }
        if (!result.final_report->commands.empty()) {
            out << "## Recommended commands\n\nSuggestions only; this tool never executes them.\n\n";
            out << "```sh\n";
            for (const auto& command : result.final_report->commands) out << command << "\n";
            out << "```\n\n";
        }
    } else {
        out << "## Conclusion\n\nNo report could be produced.\n\n";
    }

    out << "## Attempts\n\n";
    out << "| Trial | destKind | Metapaths | Statepaths | Score | Prompt tok | Completion tok | "
           "Seconds |\n|---|---|---|---|---|---|---|---|\n";
    for (const auto& attempt : result.attempts) {
        out << "| " << attempt.trial_index << " | "
            << (attempt.locator_ok ? attempt.locator.dest_kind : std::string("-")) << " | "
            << attempt.metapaths_tried << " | " << attempt.statepaths_found << " | "
            << (attempt.verdict ? std::to_string(attempt.verdict->score) : std::string("-"))
            << " | " << attempt.usage.total().prompt_tokens << " | "
            << attempt.usage.total().completion_tokens << " | "
            << format_double(attempt.wall_seconds, 3) << " |\n";
    }
    return out.str();
}

// --- evaluation ----------------------------------------------------------------

std::optional<EvalRow> parse_corpus_row(const std::string& line, std::string& error) {
    Json doc = Json::parse(line, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        error = "not a JSON object";
        return std::nullopt;
    }
    if (!doc.contains("message") || !doc["message"].is_string() ||
        doc["message"].get<std::string>().empty()) {
        error = "missing message";
        return std::nullopt;
    }
    if (!doc.contains("timestamp") || !doc["timestamp"].is_string()) {
        error = "missing timestamp";
        return std::nullopt;
    }
    auto ts = parse_rfc3339(doc["timestamp"].get<std::string>());
    if (!ts) {
        error = "timestamp is not RFC 3339";
        return std::nullopt;
    }
    if (!doc.contains("ground_truth") || !doc["ground_truth"].is_object()) {
        error = "missing ground_truth";
        return std::nullopt;
    }
    const Json& gt = doc["ground_truth"];
    if (!gt.contains("kind") || !gt["kind"].is_string()) {
        error = "ground_truth missing kind";
        return std::nullopt;
    }

    EvalRow row;
    row.incident.message = doc["message"].get<std::string>();
    row.incident.ns = doc.value("namespace", "");
    row.incident.timestamp = *ts;
    row.incident.reason = doc.value("reason", "");
    row.incident.type_label = doc.value("type_label", "");

    std::string kind = gt["kind"].get<std::string>();
    if (gt.contains("uid") && gt["uid"].is_string()) {
        row.ground_truth = EntityRef::by_uid(kind, gt["uid"].get<std::string>());
        row.ground_truth.name = gt.value("name", "");
        row.ground_truth.ns = gt.value("namespace", "");
    } else if (gt.contains("composite") && gt["composite"].is_object()) {
        row.ground_truth = EntityRef::by_composite(
            kind, gt["composite"].get<std::map<std::string, std::string>>());
    } else if (gt.contains("name") && gt["name"].is_string()) {
        row.ground_truth = EntityRef::by_name(kind, gt["name"].get<std::string>(),
                                              gt.value("namespace", ""));
    } else {
        error = "ground_truth needs uid, name, or composite";
        return std::nullopt;
    }
    return row;
}

bool ground_truth_matches(const EntityRef& ground_truth, const EntityRef& entity) {
    if (ground_truth.kind != entity.kind) return false;
    switch (ground_truth.mode) {
        case IdentityMode::Uid:
            if (!entity.uid.empty()) return entity.uid == ground_truth.uid;
            // Referenced-but-never-observed entities stay name-based.
            return !ground_truth.name.empty() && entity.name == ground_truth.name;
        case IdentityMode::Composite:
            for (const auto& [field, value] : ground_truth.composite) {
                auto it = entity.composite.find(field);
                if (it == entity.composite.end() || it->second != value) return false;
            }
            return true;
        case IdentityMode::NameNamespace:
            if (entity.name != ground_truth.name) return false;
            return ground_truth.ns.empty() || entity.ns == ground_truth.ns;
    }
    return false;
}

bool ground_truth_in_statepath(const EntityRef& ground_truth, const Statepath& path) {
    for (const auto& entity : path.entities)
        if (ground_truth_matches(ground_truth, entity)) return true;
    return false;
}

bool ground_truth_in_findings(const EntityRef& ground_truth, const RcaReport& report) {
    for (const auto& finding : report.findings) {
        if (finding.kind != ground_truth.kind) continue;
        if (!ground_truth.name.empty() && finding.name == ground_truth.name) {
            if (ground_truth.ns.empty() || finding.ns == ground_truth.ns) return true;
        }
        if (!ground_truth.uid.empty() && finding.name == ground_truth.uid) return true;
        if (ground_truth.mode == IdentityMode::Composite &&
            finding.name == ground_truth.display_name())
            return true;
    }
    return false;
}

std::pair<double, double> aggregate_metrics(const std::vector<std::pair<int, int>>& per_type) {
    double total_correct = 0, total_examples = 0, precision_sum = 0;
    int types = 0;
    for (const auto& [correct, examples] : per_type) {
        if (examples == 0) continue;
        total_correct += correct;
        total_examples += examples;
        precision_sum += double(correct) / double(examples);
        ++types;
    }
    double weighted = total_examples == 0 ? 0.0 : total_correct / total_examples;
    double arithmetic = types == 0 ? 0.0 : precision_sum / types;
    return {weighted, arithmetic};
}

EvalReport run_eval(const std::string& corpus_path, const StateGraph& graph, const MetaGraph& meta,
                    const KnowledgeConfig& knowledge, LlmBackend& backend, const Config& config,
                    EvalMode mode, const RcaOptions& options) {
    std::ifstream in(corpus_path);
    if (!in) fail(ErrorCode::Io, "cannot open corpus file '" + corpus_path + "'");

    EvalReport report;
    report.mode = mode;
    std::map<std::string, EvalTypeMetrics> by_type;

    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::string error;
        auto row = parse_corpus_row(line, error);
        if (!row) {
            ++report.skipped_rows;
            report.warnings.push_back(corpus_path + ":" + std::to_string(lineno) + ": " + error);
            continue;
        }

        RcaResult result = run_rca(row->incident, graph, meta, knowledge, backend, config, options);
        std::string label =
            row->incident.type_label.empty() ? std::string("(untyped)") : row->incident.type_label;
        EvalTypeMetrics& metrics = by_type[label];
        metrics.type_label = label;
        ++metrics.examples;

        bool correct = false;
        if (mode == EvalMode::Retrieval) {
            correct = result.final_statepath &&
                      ground_truth_in_statepath(row->ground_truth, *result.final_statepath);
        } else {
            correct = result.final_report &&
                      ground_truth_in_findings(row->ground_truth, *result.final_report);
        }
        if (correct) ++metrics.correct;

        for (const auto& attempt : result.attempts) {
            ++metrics.attempts;
            metrics.total_seconds += attempt.wall_seconds;
            metrics.total_prompt_tokens += double(attempt.usage.total().prompt_tokens);
            metrics.total_completion_tokens += double(attempt.usage.total().completion_tokens);
        }
    }

    std::vector<std::pair<int, int>> per_type;
    for (auto& [label, metrics] : by_type) {
        per_type.emplace_back(metrics.correct, metrics.examples);
        report.types.push_back(metrics);
    }
    auto [weighted, arithmetic] = aggregate_metrics(per_type);
    report.weighted_mean = weighted;
    report.arithmetic_mean = arithmetic;
    return report;
}

std::string EvalReport::precision_table() const {
    std::ostringstream out;
    int total_correct = 0, total_examples = 0;
    out << "Type                                #Correct  #Example  Precision\n";
    for (const auto& t : types) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%-36s %8d  %8d  %9.2f\n", t.type_label.c_str(), t.correct,
                      t.examples, t.precision());
        out << buf;
        total_correct += t.correct;
        total_examples += t.examples;
    }
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-36s %8d  %8d\n", "Total", total_correct, total_examples);
    out << buf;
    std::snprintf(buf, sizeof(buf), "%-36s weighted %.4f  arithmetic %.4f\n", "Mean", weighted_mean,
                  arithmetic_mean);
    out << buf;
    return out.str();
}

std::string EvalReport::cost_table() const {
    std::ostringstream out;
    out << "Type                                TimeCost(sec)  PromptToken  CompletionToken  "
           "TotalToken\n";
    double sum_sec = 0, sum_prompt = 0, sum_completion = 0;
    int with_attempts = 0;
    for (const auto& t : types) {
        char buf[200];
        std::snprintf(buf, sizeof(buf), "%-36s %13.2f  %11.2f  %15.2f  %10.2f\n",
                      t.type_label.c_str(), t.avg_seconds(), t.avg_prompt_tokens(),
                      t.avg_completion_tokens(), t.avg_total_tokens());
        out << buf;
        if (t.attempts > 0) {
            sum_sec += t.avg_seconds();
            sum_prompt += t.avg_prompt_tokens();
            sum_completion += t.avg_completion_tokens();
            ++with_attempts;
        }
    }
    if (with_attempts > 0) {
        char buf[200];
        std::snprintf(buf, sizeof(buf), "%-36s %13.2f  %11.2f  %15.2f  %10.2f\n", "Average",
                      sum_sec / with_attempts, sum_prompt / with_attempts,
                      sum_completion / with_attempts,
                      (sum_prompt + sum_completion) / with_attempts);
        out << buf;
    }
    return out.str();
}

Json EvalReport::to_json() const {
    Json doc = Json::object();
    doc["mode"] = mode == EvalMode::Retrieval ? "retrieval" : "report";
    Json types_json = Json::array();
    for (const auto& t : types) {
        Json j = Json::object();
        j["type_label"] = t.type_label;
        j["correct"] = t.correct;
        j["examples"] = t.examples;
        j["precision"] = t.precision();
        j["attempts"] = t.attempts;
        j["avg_seconds"] = t.avg_seconds();
        j["avg_prompt_tokens"] = t.avg_prompt_tokens();
        j["avg_completion_tokens"] = t.avg_completion_tokens();
        j["avg_total_tokens"] = t.avg_total_tokens();
        types_json.push_back(std::move(j));
    }
    doc["types"] = std::move(types_json);
    doc["weighted_mean"] = weighted_mean;
    doc["arithmetic_mean"] = arithmetic_mean;
    doc["skipped_rows"] = skipped_rows;
    if (!warnings.empty()) doc["warnings"] = warnings;
    return doc;
}

}  // namespace krca
