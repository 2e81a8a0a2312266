#include "krca/backends.hpp"

#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <sstream>

#include "krca/error.hpp"
#include "krca/meta_graph.hpp"

namespace krca {

std::int64_t estimate_tokens(const std::string& text) {
    return static_cast<std::int64_t>((text.size() + 3) / 4);
}

namespace {

std::string to_lower(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

bool contains_ci(const std::string& haystack, const std::string& needle) {
    return to_lower(haystack).find(to_lower(needle)) != std::string::npos;
}

// Value of the first line that starts with `prefix`.
std::optional<std::string> line_value(const std::string& text, const std::string& prefix) {
    size_t pos = 0;
    while (pos < text.size()) {
        size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        if (text.compare(pos, prefix.size(), prefix) == 0)
            return text.substr(pos + prefix.size(), eol - pos - prefix.size());
        pos = eol + 1;
    }
    return std::nullopt;
}

std::vector<std::string> split_comma_list(const std::string& value) {
    std::vector<std::string> out;
    std::istringstream in(value);
    std::string item;
    while (std::getline(in, item, ',')) {
        size_t a = item.find_first_not_of(" \t");
        if (a == std::string::npos) continue;
        size_t b = item.find_last_not_of(" \t");
        std::string s = item.substr(a, b - a + 1);
        if (!s.empty() && s != "(none)") out.push_back(s);
    }
    return out;
}

// Lines between the line containing `from` (exclusive) and the first line
// starting with `to` (exclusive).
std::string section_between(const std::string& text, const std::string& from,
                            const std::string& to) {
    size_t start = text.find(from);
    if (start == std::string::npos) return "";
    start = text.find('\n', start);
    if (start == std::string::npos) return "";
    ++start;
    size_t end = start;
    while (end < text.size()) {
        size_t eol = text.find('\n', end);
        if (eol == std::string::npos) eol = text.size();
        if (text.compare(end, to.size(), to) == 0) break;
        end = eol + 1;
    }
    return text.substr(start, std::min(end, text.size()) - start);
}

std::string stage_of_prompt(const std::string& prompt) {
    auto v = line_value(prompt, "## Stage: ");
    return v ? *v : "";
}

Completion make_completion(const std::string& prompt, std::string text) {
    Completion completion;
    completion.usage.prompt_tokens = estimate_tokens(prompt);
    completion.usage.completion_tokens = estimate_tokens(text);
    completion.text = std::move(text);
    return completion;
}

}  // namespace

// ---------------------------------------------------------------------------
// HttpChatBackend

HttpChatBackend::HttpChatBackend(const BackendConfig& config) {
    url_ = config.http_url;
    model_ = config.http_model;
    if (url_.empty()) fail(ErrorCode::Config, "http backend needs backend.http.url");
    if (const char* key = std::getenv(config.api_key_env.c_str())) api_key_ = key;
}

Completion HttpChatBackend::complete(const std::string& prompt, const CompletionParams& params) {
    size_t scheme = url_.find("://");
    if (scheme == std::string::npos) fail(ErrorCode::Config, "backend.http.url needs a scheme");
    size_t path_pos = url_.find('/', scheme + 3);
    std::string base = path_pos == std::string::npos ? url_ : url_.substr(0, path_pos);
    std::string prefix = path_pos == std::string::npos ? "" : url_.substr(path_pos);
    std::string path = prefix;
    if (path.find("/chat/completions") == std::string::npos) path += "/v1/chat/completions";

    Json body = Json::object();
    body["model"] = model_;
    body["messages"] = Json::array({Json{{"role", "user"}, {"content", prompt}}});
    body["temperature"] = params.temperature;
    body["max_tokens"] = params.max_tokens;

    httplib::Client client(base);
    client.set_read_timeout(120, 0);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
    auto res = client.Post(path, headers, body.dump(), "application/json");
    if (!res)
        fail(ErrorCode::StageFailure, "http backend: no response from " + base + path);
    if (res->status != 200)
        fail(ErrorCode::StageFailure,
             "http backend: status " + std::to_string(res->status) + ": " + res->body);

    Json doc = Json::parse(res->body, nullptr, false);
    if (doc.is_discarded() || !doc.contains("choices") || doc["choices"].empty())
        fail(ErrorCode::StageFailure, "http backend: malformed completion response");

    Completion completion;
    completion.text = doc["choices"][0]["message"]["content"].get<std::string>();
    if (doc.contains("usage") && doc["usage"].is_object()) {
        completion.usage.prompt_tokens = doc["usage"].value("prompt_tokens", std::int64_t{0});
        completion.usage.completion_tokens =
            doc["usage"].value("completion_tokens", std::int64_t{0});
    } else {
        completion.usage.prompt_tokens = estimate_tokens(prompt);
        completion.usage.completion_tokens = estimate_tokens(completion.text);
    }
    return completion;
}

// ---------------------------------------------------------------------------
// MockBackend

MockBackend::MockBackend(const Json& table) {
    if (!table.is_object()) fail(ErrorCode::Config, "mock response table must be a JSON object");
    for (auto it = table.begin(); it != table.end(); ++it) {
        std::vector<std::string> responses;
        if (it.value().is_string()) {
            responses.push_back(it.value().get<std::string>());
        } else if (it.value().is_array()) {
            for (const auto& item : it.value()) {
                if (item.is_string())
                    responses.push_back(item.get<std::string>());
                else
                    responses.push_back(item.dump());
            }
        } else {
            responses.push_back(it.value().dump());
        }
        if (responses.empty())
            fail(ErrorCode::Config, "mock response list for '" + it.key() + "' is empty");
        table_[it.key()] = std::move(responses);
    }
}

Json MockBackend::load_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::Io, "cannot open mock response table '" + path + "'");
    Json doc = Json::parse(in, nullptr, false);
    if (doc.is_discarded()) fail(ErrorCode::Parse, "mock response table is not valid JSON");
    return doc;
}

void MockBackend::begin_incident(const std::string& incident_id) {
    std::lock_guard<std::mutex> lock(mutex_);
    incident_id_ = incident_id;
}

Completion MockBackend::complete(const std::string& prompt, const CompletionParams&) {
    std::lock_guard<std::mutex> lock(mutex_);
    std::string stage = stage_of_prompt(prompt);
    for (const std::string& key :
         {stage + ":" + incident_id_, stage + ":*", std::string("*")}) {
        auto it = table_.find(key);
        if (it == table_.end()) continue;
        std::size_t& cursor = cursor_[key];
        const auto& responses = it->second;
        std::string text = responses[std::min(cursor, responses.size() - 1)];
        ++cursor;
        return make_completion(prompt, std::move(text));
    }
    fail(ErrorCode::StageFailure,
         "mock backend has no response for stage '" + stage + "', incident '" + incident_id_ + "'");
}

// ---------------------------------------------------------------------------
// RuleOracleBackend

namespace {

struct LocatorRule {
    std::vector<std::string> candidates;
    std::vector<std::string> inter_kinds;
    std::string rule;
};

std::optional<std::string> quoted_name(const std::string& message) {
    static const std::regex double_quoted(R"re(volume "([^"]+)")re");
    static const std::regex single_quoted(R"re(volume '([^']+)')re");
    static const std::regex back_quoted(R"re(volume `([^`']+)')re");
    std::smatch m;
    if (std::regex_search(message, m, double_quoted)) return m[1].str();
    if (std::regex_search(message, m, single_quoted)) return m[1].str();
    if (std::regex_search(message, m, back_quoted)) return m[1].str();
    return std::nullopt;
}

LocatorRule locator_rule_for(const std::string& message,
                             const std::vector<std::pair<std::string, std::string>>& conventions,
                             const std::vector<std::string>& priority) {
    if (contains_ci(message, "exceeded quota"))
        return {{"ResourceQuota", "Namespace"}, {"Namespace", "Pod"}, "quota exhaustion"};
    if (contains_ci(message, "no such file or directory") ||
        (contains_ci(message, "mount") && contains_ci(message, "nfs")))
        return {{"nfs", "PersistentVolume"},
                {"PersistentVolumeClaim", "PersistentVolume"},
                "missing storage path"};
    if (contains_ci(message, "cannot find volume")) {
        LocatorRule rule{{}, {}, "volume name conventions"};
        if (auto name = quoted_name(message)) {
            for (const auto& [pattern, kind] : conventions)
                if (name->find(pattern) != std::string::npos) rule.candidates.push_back(kind);
        }
        for (const auto& kind : {"ConfigMap", "Secret", "PersistentVolumeClaim"})
            if (std::find(rule.candidates.begin(), rule.candidates.end(), kind) ==
                rule.candidates.end())
                rule.candidates.push_back(kind);
        return rule;
    }
    if (contains_ci(message, "unbound") && contains_ci(message, "persistentvolumeclaim"))
        return {{"PersistentVolumeClaim", "PersistentVolume"}, {"Pod"}, "unbound claim"};
    if (contains_ci(message, "serviceaccount") && contains_ci(message, "not found"))
        return {{"ServiceAccount"}, {}, "missing service account"};
    if (contains_ci(message, "secret") && contains_ci(message, "not found"))
        return {{"Secret"}, {}, "missing secret"};
    if (contains_ci(message, "configmap") && contains_ci(message, "not found"))
        return {{"ConfigMap"}, {}, "missing config map"};
    LocatorRule fallback{{}, {}, "fallback"};
    fallback.candidates = priority;
    return fallback;
}

}  // namespace

std::string RuleOracleBackend::answer_locator(const std::string& prompt) const {
    std::string message = line_value(prompt, "Error message: ").value_or("");
    std::string src_kind = line_value(prompt, "Source kind (srcKind): ").value_or("");
    auto known = split_comma_list(
        line_value(prompt, "Known entity kinds (never answer with a kind outside this list): ")
            .value_or(""));
    auto priority = split_comma_list(line_value(prompt, "store: ").value_or(""));
    auto excluded = split_comma_list(
        line_value(prompt, "Previously tried destKinds (excluded, pick something else): ")
            .value_or(""));

    std::vector<std::pair<std::string, std::string>> conventions;
    static const std::regex convention_line(R"(- a name containing '([^']*)' implies kind (\S+))");
    for (auto begin = std::sregex_iterator(prompt.begin(), prompt.end(), convention_line);
         begin != std::sregex_iterator(); ++begin)
        conventions.emplace_back((*begin)[1].str(), (*begin)[2].str());

    LocatorRule rule = locator_rule_for(message, conventions, priority);
    // Widen with every known kind so exclusions always leave a candidate.
    for (const auto& kind : known)
        if (kind != src_kind) rule.candidates.push_back(kind);

    auto usable = [&](const std::string& kind) {
        return std::find(known.begin(), known.end(), kind) != known.end() &&
               std::find(excluded.begin(), excluded.end(), kind) == excluded.end();
    };
    std::string dest;
    for (const auto& kind : rule.candidates) {
        if (usable(kind)) {
            dest = kind;
            break;
        }
    }

    Json doc = Json::object();
    doc["srcKind"] = src_kind;
    Json inter = Json::array();
    for (const auto& kind : rule.inter_kinds)
        if (std::find(known.begin(), known.end(), kind) != known.end()) inter.push_back(kind);
    doc["interKinds"] = std::move(inter);
    doc["destKind"] = dest;
    doc["rationale"] = "rule: " + rule.rule;
    return doc.dump();
}

std::string RuleOracleBackend::answer_cypher(const std::string& prompt) const {
    std::string block =
        section_between(prompt, "Extended metapath (one edge per line", "Anchor event uid: ");
    std::string uid = line_value(prompt, "Anchor event uid: ").value_or("");
    if (uid == "(none)") uid.clear();
    Metapath path = parse_metapath(block);
    return emit_cypher(path, EntityRef::by_uid("Event", uid));
}

std::string RuleOracleBackend::answer_summarizer(const std::string& prompt) const {
    std::string message = line_value(prompt, "Error message: ").value_or("");
    std::string entity_line = line_value(prompt, "Entity: ").value_or("");
    static const std::regex entity_re(R"(kind=(\S+) name=(\S*) namespace=(\S*))");
    std::smatch m;
    std::string kind, name, ns;
    if (std::regex_search(entity_line, m, entity_re)) {
        kind = m[1].str();
        name = m[2].str();
        ns = m[3].str() == "(none)" ? "" : m[3].str();
    }
    std::string fragment_text = section_between(prompt, "StateJSON fragments:", "End of fragments.");
    Json fragments = Json::parse(fragment_text, nullptr, false);
    if (fragments.is_discarded()) fragments = Json::object();

    Json doc = Json::object();
    auto respond = [&doc](bool related, const std::string& obs, std::vector<std::string> cited) {
        doc["related"] = related;
        doc["observations"] = obs;
        doc["cited_fragments"] = cited;
        return doc.dump();
    };

    if (kind == "ResourceQuota" && contains_ci(message, "exceeded quota") &&
        fragments.contains("status") && fragments["status"].is_object()) {
        const Json& status = fragments["status"];
        if (status.contains("used") && status.contains("hard")) {
            std::string obs = "ResourceQuota " + name + ":";
            std::vector<std::string> cited;
            int listed = 0;
            for (auto it = status["used"].begin(); it != status["used"].end() && listed < 3; ++it) {
                if (!status["hard"].contains(it.key())) continue;
                std::string used = it.value().is_string() ? it.value().get<std::string>()
                                                          : it.value().dump();
                const Json& hard_value = status["hard"][it.key()];
                std::string hard =
                    hard_value.is_string() ? hard_value.get<std::string>() : hard_value.dump();
                obs += " used " + it.key() + "=" + used +
                       (used == hard ? " has reached the hard limit " : ", hard limit ") + hard +
                       ".";
                cited.push_back("/status/used/" + it.key());
                cited.push_back("/status/hard/" + it.key());
                ++listed;
            }
            if (listed > 0)
                return respond(true, obs + " The quota cannot admit the requested resources.",
                               cited);
        }
    }
    if (kind == "PersistentVolumeClaim" && fragments.contains("status") &&
        fragments["status"].is_object() && fragments["status"].contains("phase")) {
        std::string phase = fragments["status"]["phase"].get<std::string>();
        if (contains_ci(message, "unbound")) {
            if (phase == "Pending")
                return respond(true,
                               "PersistentVolumeClaim " + name +
                                   " status.phase=Pending; the claim is not bound to any "
                                   "PersistentVolume.",
                               {"/status/phase"});
            if (phase == "Bound")
                return respond(true,
                               "Discrepancy: PersistentVolumeClaim " + name +
                                   " status.phase=Bound while the error message reports an "
                                   "unbound claim.",
                               {"/status/phase"});
        }
    }
    if (fragments.contains("exists") && fragments["exists"].is_boolean()) {
        std::string server = fragments.value("server", "");
        std::string path = fragments.value("path", "");
        if (!fragments["exists"].get<bool>())
            return respond(true,
                           "The export " + server + ":" + path +
                               " does not exist on the storage server.",
                           {"/exists"});
        return respond(false, "The export " + server + ":" + path + " is present on the server.",
                       {"/exists"});
    }

    // Generic: relate when a state value literally appears in the message.
    std::vector<std::string> matches;
    for (const auto& [key, value] : flatten_keys(fragments)) {
        if (!value.is_string()) continue;
        std::string s = value.get<std::string>();
        if (s.size() >= 3 && message.find(s) != std::string::npos)
            matches.push_back(key + "=" + s);
        if (matches.size() == 3) break;
    }
    if (!matches.empty()) {
        std::string obs = "Fields of " + kind + " " + name + " appear in the error message: ";
        for (size_t i = 0; i < matches.size(); ++i) obs += (i ? "; " : "") + matches[i];
        return respond(true, obs + ".", {});
    }
    return respond(false, "No fields in this state relate to the error message.", {});
}

std::string RuleOracleBackend::answer_report(const std::string& prompt) const {
    std::string message = line_value(prompt, "Error message: ").value_or("");

    struct Row {
        std::string kind, name, ns, related, obs;
    };
    std::vector<Row> summaries;
    std::vector<Row> absences;

    std::string summary_block = section_between(prompt, "Diagnostic summaries (statepath order):",
                                                "Entities with no recorded state:");
    static const std::regex summary_re(
        R"(- kind=(\S+) name=(\S*) namespace=(\S*) related=(\S+) observations: (.*))");
    std::istringstream sin(summary_block);
    std::string line;
    while (std::getline(sin, line)) {
        std::smatch m;
        if (std::regex_match(line, m, summary_re))
            summaries.push_back(
                {m[1].str(), m[2].str(), m[3].str() == "(none)" ? "" : m[3].str(), m[4].str(),
                 m[5].str()});
    }
    std::string absence_block =
        section_between(prompt, "Entities with no recorded state:", "Conclude with");
    static const std::regex absence_re(R"(- kind=(\S+) name=(\S*) namespace=(\S*))");
    std::istringstream ain(absence_block);
    while (std::getline(ain, line)) {
        std::smatch m;
        if (std::regex_match(line, m, absence_re))
            absences.push_back(
                {m[1].str(), m[2].str(), m[3].str() == "(none)" ? "" : m[3].str(), "", ""});
    }

    auto is_native = [](const std::string& kind) {
        return !kind.empty() && std::isupper(static_cast<unsigned char>(kind[0]));
    };
    auto kubectl_name = [](const std::string& kind) { return to_lower(kind); };

    Json findings = Json::array();
    for (const auto& row : summaries) {
        Json f = Json::object();
        f["kind"] = row.kind;
        f["name"] = row.name;
        f["namespace"] = row.ns;
        f["note"] = row.obs;
        findings.push_back(std::move(f));
    }
    for (const auto& row : absences) {
        Json f = Json::object();
        f["kind"] = row.kind;
        f["name"] = row.name;
        f["namespace"] = row.ns;
        f["note"] = "no recorded state";
        findings.push_back(std::move(f));
    }

    bool discrepancy = false;
    for (const auto& row : summaries)
        if (contains_ci(row.obs, "discrepancy")) discrepancy = true;

    std::string conclusion;
    Json commands = Json::array();
    const Row* command_target = nullptr;

    if (!absences.empty()) {
        const Row& rc = absences.front();
        conclusion = "Root cause: " + rc.kind + " " + rc.name;
        if (!rc.ns.empty()) conclusion += " in namespace " + rc.ns;
        conclusion +=
            " has no recorded state; the referenced object is missing (reconciliation rule 1: "
            "each entity should have a current state).";
        command_target = &rc;
        if (is_native(rc.kind)) {
            std::string cmd = "kubectl get " + kubectl_name(rc.kind) + " " + rc.name;
            if (!rc.ns.empty()) cmd += " -n " + rc.ns;
            commands.push_back(cmd);
        }
    } else {
        const Row* rc = nullptr;
        for (const auto& row : summaries)
            if (row.related == "true") rc = &row;  // deepest related wins
        if (rc) {
            conclusion = "Root cause: " + rc->kind + " " + rc->name;
            if (!rc->ns.empty()) conclusion += " in namespace " + rc->ns;
            conclusion += ". " + rc->obs;
            if (discrepancy)
                conclusion +=
                    " A data discrepancy between the observed state and the error message was "
                    "detected and should be validated (reconciliation rule 3).";
            command_target = rc;
        } else {
            conclusion =
                "Unable to explain the error from the retrieved states; no related observations "
                "were found.";
        }
    }
    if (command_target && !is_native(command_target->kind)) {
        // External root cause: point the operator at the deepest native entity.
        for (auto it = summaries.rbegin(); it != summaries.rend(); ++it) {
            if (is_native(it->kind)) {
                command_target = &*it;
                break;
            }
        }
    }
    if (command_target && is_native(command_target->kind)) {
        std::string cmd = "kubectl describe " + kubectl_name(command_target->kind) + " " +
                          command_target->name;
        if (!command_target->ns.empty()) cmd += " -n " + command_target->ns;
        commands.push_back(cmd);
    }

    Json doc = Json::object();
    doc["conclusion"] = conclusion;
    doc["findings"] = std::move(findings);
    doc["commands"] = std::move(commands);
    return doc.dump();
}

std::string RuleOracleBackend::answer_estimator(const std::string& prompt) const {
    std::string conclusion = line_value(prompt, "Report conclusion: ").value_or("");
    int score;
    std::string reasoning;
    if (conclusion.rfind("Root cause:", 0) == 0) {
        score = 9;
        reasoning = "The conclusion names a concrete root cause entity backed by state evidence.";
    } else if (contains_ci(conclusion, "unable to explain")) {
        score = 2;
        reasoning = "The conclusion admits the retrieved states do not explain the error.";
    } else {
        score = 5;
        reasoning = "The conclusion is only loosely tied to the error message.";
    }
    Json doc = Json::object();
    doc["score"] = score;
    doc["reasoning"] = reasoning;
    return doc.dump();
}

Completion RuleOracleBackend::complete(const std::string& prompt, const CompletionParams&) {
    ++calls_;
    std::string stage = stage_of_prompt(prompt);
    std::string text;
    if (stage == "RootCauseLocator")
        text = answer_locator(prompt);
    else if (stage == "CypherQueryGenerator")
        text = answer_cypher(prompt);
    else if (stage == "DiagnosticSummarizer")
        text = answer_summarizer(prompt);
    else if (stage == "ReportCommandGenerator")
        text = answer_report(prompt);
    else if (stage == "InvestigationEstimator")
        text = answer_estimator(prompt);
    else
        fail(ErrorCode::StageFailure, "rule oracle cannot answer stage '" + stage + "'");
    return make_completion(prompt, std::move(text));
}

std::unique_ptr<LlmBackend> make_backend(const std::string& spec, const BackendConfig& config) {
    if (spec == "oracle") return std::make_unique<RuleOracleBackend>();
    if (spec.rfind("mock:", 0) == 0)
        return std::make_unique<MockBackend>(MockBackend::load_table(spec.substr(5)));
    if (spec == "http") return std::make_unique<HttpChatBackend>(config);
    fail(ErrorCode::Config, "unknown backend spec '" + spec + "' (expected oracle|mock:<path>|http)");
}

}  // namespace krca
