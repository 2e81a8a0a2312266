#include "krca/llm.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <sstream>

#include "krca/error.hpp"

namespace krca {

namespace {

std::string join(const std::vector<std::string>& items, const std::string& sep) {
    std::string out;
    for (size_t i = 0; i < items.size(); ++i) {
        if (i) out += sep;
        out += items[i];
    }
    return out;
}

std::string or_none(const std::string& s) { return s.empty() ? "(none)" : s; }

CompletionParams params_from(const Config& config) {
    CompletionParams params;
    params.temperature = config.backend.temperature;
    params.max_tokens = config.backend.max_tokens;
    return params;
}

// Asks once, then re-asks up to `reasks` times until the reply parses as a
// JSON object. Usage accumulates across attempts.
std::optional<Json> complete_json(const StageContext& ctx, Stage stage, const std::string& prompt,
                                  int reasks, TokenUsage& usage) {
    std::string current = prompt;
    for (int attempt = 0; attempt <= reasks; ++attempt) {
        Completion completion = ctx.backend.complete(current, params_from(ctx.config));
        usage += completion.usage;
        ctx.add_usage(stage, completion.usage);
        if (auto doc = extract_json_object(completion.text)) return doc;
        ctx.note("response was not valid JSON (attempt " + std::to_string(attempt + 1) + ")");
        current = prompt + "\n\nYour previous reply was not valid JSON. Respond with the strict JSON object only.";
    }
    return std::nullopt;
}

}  // namespace

std::optional<Json> extract_json_object(const std::string& text) {
    for (size_t start = text.find('{'); start != std::string::npos;
         start = text.find('{', start + 1)) {
        int depth = 0;
        bool in_string = false;
        bool escaped = false;
        for (size_t i = start; i < text.size(); ++i) {
            char c = text[i];
            if (in_string) {
                if (escaped)
                    escaped = false;
                else if (c == '\\')
                    escaped = true;
                else if (c == '"')
                    in_string = false;
                continue;
            }
            if (c == '"') in_string = true;
            else if (c == '{') ++depth;
            else if (c == '}') {
                --depth;
                if (depth == 0) {
                    Json doc = Json::parse(text.substr(start, i - start + 1), nullptr, false);
                    if (!doc.is_discarded() && doc.is_object()) return doc;
                    break;
                }
            }
        }
    }
    return std::nullopt;
}

int count_words(const std::string& text) {
    std::istringstream in(text);
    std::string word;
    int n = 0;
    while (in >> word) ++n;
    return n;
}

std::string truncate_words(const std::string& text, int max_words) {
    if (count_words(text) <= max_words) return text;

    // Split into sentences and keep whole sentences while they fit.
    std::vector<std::string> sentences;
    std::string current;
    for (size_t i = 0; i < text.size(); ++i) {
        current += text[i];
        char c = text[i];
        if ((c == '.' || c == '!' || c == '?') &&
            (i + 1 >= text.size() || std::isspace(static_cast<unsigned char>(text[i + 1])))) {
            sentences.push_back(current);
            current.clear();
        }
    }
    if (!current.empty()) sentences.push_back(current);

    std::string out;
    int words = 0;
    for (const auto& sentence : sentences) {
        int w = count_words(sentence);
        if (words + w > max_words) break;
        out += sentence;
        words += w;
    }
    if (!out.empty()) {
        size_t end = out.find_last_not_of(" \t\n");
        return end == std::string::npos ? "" : out.substr(0, end + 1);
    }
    // First sentence alone is over the cap: hard word cut.
    std::istringstream in(text);
    std::string word;
    for (int i = 0; i < max_words && in >> word; ++i) {
        if (i) out += ' ';
        out += word;
    }
    return out;
}

bool json_pointer_exists(const Json& doc, const std::string& pointer) {
    try {
        return doc.contains(Json::json_pointer(pointer));
    } catch (...) {
        return false;
    }
}

std::string render_conventions(const std::vector<NamingConvention>& conventions) {
    if (conventions.empty()) return "(none)";
    std::string out;
    for (size_t i = 0; i < conventions.size(); ++i) {
        if (i) out += "\n";
        out += "- a name containing '" + conventions[i].pattern + "' implies kind " +
               conventions[i].implies_kind;
    }
    return out;
}

LocatorResult locate_root_cause(const StageContext& ctx, const Incident& incident,
                                const std::string& src_kind, const KnowledgeConfig& knowledge,
                                const std::vector<std::string>& excluded) {
    std::map<std::string, std::string> slots;
    slots["message"] = incident.message;
    slots["namespace"] = incident.ns;
    slots["src_kind"] = src_kind;
    slots["known_kinds"] = join(knowledge.known_kinds, ", ");
    slots["priority_kinds"] = or_none(join(knowledge.priority_external_kinds, ", "));
    slots["conventions"] = render_conventions(knowledge.conventions);
    slots["guidance"] = or_none(knowledge.guidance);
    slots["excluded"] = or_none(join(excluded, ", "));
    std::string prompt = ctx.prompts.render(Stage::Locator, slots);

    LocatorResult result;
    auto doc = complete_json(ctx, Stage::Locator, prompt, 2, result.usage);
    if (!doc) fail(ErrorCode::StageFailure, "locator produced no parseable JSON after 2 re-asks");

    result.src_kind = doc->value("srcKind", src_kind);
    result.dest_kind = doc->value("destKind", "");
    result.rationale = doc->value("rationale", "");
    auto known = [&knowledge](const std::string& kind) {
        return std::find(knowledge.known_kinds.begin(), knowledge.known_kinds.end(), kind) !=
               knowledge.known_kinds.end();
    };
    if (result.dest_kind.empty() || !known(result.dest_kind))
        fail(ErrorCode::ValidationFailure,
             "locator destKind '" + result.dest_kind + "' is not a known kind");
    if (doc->contains("interKinds") && (*doc)["interKinds"].is_array()) {
        for (const auto& item : (*doc)["interKinds"]) {
            if (!item.is_string()) continue;
            std::string kind = item.get<std::string>();
            if (known(kind))
                result.inter_kinds.push_back(kind);
            else
                ctx.note("dropped unknown interKind '" + kind + "'");
        }
    }
    return result;
}

bool cypher_structure_matches(const std::string& text, const Metapath& extended_path) {
    size_t match_count = 0;
    for (size_t pos = text.find("MATCH"); pos != std::string::npos;
         pos = text.find("MATCH", pos + 5))
        ++match_count;
    if (match_count != extended_path.size()) return false;
    if (text.find("RETURN") == std::string::npos) return false;
    for (size_t i = 0; i < extended_path.steps.size(); ++i) {
        const auto& step = extended_path.steps[i];
        std::string rel = "[r" + std::to_string(i + 1) + ":" + edge_type_name(step.type) + "]";
        if (text.find(rel) == std::string::npos) return false;
        std::string clause = "r" + std::to_string(i + 1) + ".key = '" + step.key + "'";
        if (text.find(clause) == std::string::npos) return false;
    }
    return true;
}

CypherResult generate_cypher_llm(const StageContext& ctx, const Metapath& extended_path,
                                 const Incident& incident, const EntityRef& incident_anchor) {
    (void)incident;
    std::string deterministic = emit_cypher(extended_path, incident_anchor);

    CypherResult result;
    std::map<std::string, std::string> slots;
    slots["metapath"] = serialize_metapath(extended_path);
    slots["event_uid"] = or_none(incident_anchor.uid);
    std::string prompt = ctx.prompts.render(Stage::CypherGen, slots);

    std::string text;
    try {
        Completion completion = ctx.backend.complete(prompt, params_from(ctx.config));
        result.usage += completion.usage;
        ctx.add_usage(Stage::CypherGen, completion.usage);
        text = completion.text;
    } catch (const std::exception& e) {
        ctx.note(std::string("cypher backend call failed, using compiled query: ") + e.what());
        result.text = deterministic;
        result.fallback_used = true;
        return result;
    }

    // Strip a markdown fence if the model added one.
    static const std::regex fence(R"(```[a-zA-Z]*\n?|```)");
    text = std::regex_replace(text, fence, "");
    size_t a = text.find_first_not_of(" \t\r\n");
    size_t b = text.find_last_not_of(" \t\r\n");
    text = a == std::string::npos ? "" : text.substr(a, b - a + 1) + "\n";

    if (cypher_structure_matches(text, extended_path)) {
        result.text = text;
    } else {
        ctx.note("generated Cypher did not match the compiled plan; using compiled query");
        result.text = deterministic;
        result.fallback_used = true;
    }
    return result;
}

DiagnosticSummary summarize_state(const StageContext& ctx, const StateBundleEntry& entry,
                                  const std::string& message) {
    if (entry.absent)
        fail(ErrorCode::Contract, "summarize_state called for an absent entity; "
                                  "absence observations bypass the summarizer");
    DiagnosticSummary summary;
    summary.entity = entry.entity;

    std::map<std::string, std::string> slots;
    slots["message"] = message;
    slots["kind"] = entry.entity.kind;
    slots["name"] = entry.entity.display_name();
    slots["namespace"] = or_none(entry.entity.ns);
    slots["fragments"] = entry.fragments.dump(2);
    slots["word_limit"] = std::to_string(ctx.config.summary_word_limit);
    std::string prompt = ctx.prompts.render(Stage::Summarizer, slots);

    Completion completion = ctx.backend.complete(prompt, params_from(ctx.config));
    summary.usage += completion.usage;
    ctx.add_usage(Stage::Summarizer, completion.usage);

    auto doc = extract_json_object(completion.text);
    if (!doc || !doc->contains("observations")) {
        ctx.note("summarizer response not parseable; keeping raw fragments for " +
                 entry.entity.display_name());
        summary.related = std::nullopt;
        summary.observations = truncate_words(entry.fragments.dump(), ctx.config.summary_word_limit);
        return summary;
    }
    if (doc->contains("related") && (*doc)["related"].is_boolean())
        summary.related = (*doc)["related"].get<bool>();
    summary.observations =
        truncate_words(doc->value("observations", ""), ctx.config.summary_word_limit);
    if (doc->contains("cited_fragments") && (*doc)["cited_fragments"].is_array()) {
        for (const auto& item : (*doc)["cited_fragments"]) {
            if (!item.is_string()) continue;
            std::string pointer = item.get<std::string>();
            if (json_pointer_exists(entry.fragments, pointer))
                summary.cited_fragments.push_back(pointer);
            else
                ctx.note("dropped cited fragment '" + pointer + "' (not present in StateJSON)");
        }
    }
    return summary;
}

namespace {

std::string render_summaries(const std::vector<DiagnosticSummary>& summaries) {
    if (summaries.empty()) return "(none)";
    std::string out;
    for (size_t i = 0; i < summaries.size(); ++i) {
        const auto& s = summaries[i];
        if (i) out += "\n";
        out += "- kind=" + s.entity.kind + " name=" + s.entity.display_name() +
               " namespace=" + or_none(s.entity.ns) +
               " related=" + (s.related ? (*s.related ? "true" : "false") : "unknown") +
               " observations: " + s.observations;
    }
    return out;
}

std::string render_absences(const std::vector<EntityRef>& absences) {
    if (absences.empty()) return "(none)";
    std::string out;
    for (size_t i = 0; i < absences.size(); ++i) {
        if (i) out += "\n";
        out += "- kind=" + absences[i].kind + " name=" + absences[i].display_name() +
               " namespace=" + or_none(absences[i].ns);
    }
    return out;
}

}  // namespace

RcaReport generate_report(const StageContext& ctx, const std::vector<DiagnosticSummary>& summaries,
                          const std::vector<EntityRef>& absences, const Incident& incident) {
    if (summaries.empty() && absences.empty())
        fail(ErrorCode::Contract, "generate_report needs at least one summary or absence");

    std::map<std::string, std::string> slots;
    slots["message"] = incident.message;
    slots["namespace"] = incident.ns;
    slots["summaries"] = render_summaries(summaries);
    slots["absences"] = render_absences(absences);
    std::string prompt = ctx.prompts.render(Stage::ReportGen, slots);

    RcaReport report;
    auto doc = complete_json(ctx, Stage::ReportGen, prompt, 2, report.usage);
    if (!doc || !doc->contains("conclusion") || !(*doc)["conclusion"].is_string())
        fail(ErrorCode::StageFailure, "report generator produced no parseable conclusion after 2 re-asks");

    report.conclusion = (*doc)["conclusion"].get<std::string>();
    if (doc->contains("findings") && (*doc)["findings"].is_array()) {
        for (const auto& item : (*doc)["findings"]) {
            if (!item.is_object()) continue;
            Finding f;
            f.kind = item.value("kind", "");
            f.name = item.value("name", "");
            f.ns = item.value("namespace", "");
            f.note = item.value("note", "");
            report.findings.push_back(std::move(f));
        }
    }
    if (doc->contains("commands") && (*doc)["commands"].is_array()) {
        for (const auto& item : (*doc)["commands"]) {
            if (!item.is_string()) continue;
            std::string command = item.get<std::string>();
            std::istringstream in(command);
            std::string binary;
            in >> binary;
            bool allowed = std::find(ctx.config.command_whitelist.begin(),
                                     ctx.config.command_whitelist.end(),
                                     binary) != ctx.config.command_whitelist.end();
            if (allowed && !command.empty())
                report.commands.push_back(command);
            else
                ctx.note("dropped command not starting with a whitelisted binary: " + command);
        }
    }
    return report;
}

InvestigationVerdict estimate_investigation(const StageContext& ctx, const RcaReport& report,
                                            const Incident& incident) {
    if (report.conclusion.empty() && report.findings.empty())
        fail(ErrorCode::Contract, "estimate_investigation needs a non-empty report");

    std::map<std::string, std::string> slots;
    slots["message"] = incident.message;
    slots["conclusion"] = report.conclusion;
    slots["commands"] = or_none(join(report.commands, "; "));
    slots["threshold"] = std::to_string(ctx.config.score_threshold);
    std::string prompt = ctx.prompts.render(Stage::Estimator, slots);

    InvestigationVerdict verdict;
    Completion completion = ctx.backend.complete(prompt, params_from(ctx.config));
    verdict.usage += completion.usage;
    ctx.add_usage(Stage::Estimator, completion.usage);

    auto doc = extract_json_object(completion.text);
    if (!doc || !doc->contains("score") || !(*doc)["score"].is_number()) {
        ctx.note("estimator score not numeric; treating as 0 to force a retry");
        verdict.score = 0;
    } else {
        double raw = (*doc)["score"].get<double>();
        int score = static_cast<int>(raw);
        if (score < 0 || score > 10) {
            ctx.note("estimator score " + std::to_string(score) + " outside 0-10; clamping");
            score = std::clamp(score, 0, 10);
        }
        verdict.score = score;
        verdict.reasoning = doc->value("reasoning", "");
    }
    verdict.sufficient = verdict.score >= ctx.config.score_threshold;
    return verdict;
}

}  // namespace krca
