#include "krca/prompts.hpp"

#include <fstream>
#include <sstream>

#include "krca/error.hpp"

namespace krca {

namespace {

const std::string kLocatorTemplate = R"PROMPT(## Stage: RootCauseLocator
You are a Kubernetes root-cause analyst. An incident occurred in the cluster
and your task is to predict where its root cause most likely lives.

Error message: {{message}}
Namespace: {{namespace}}
Source kind (srcKind): {{src_kind}}

First identify every resource kind that might contribute to this incident
(interKinds). Then determine the single kind most likely to hold the root
cause (destKind).

Graph knowledge:
Known entity kinds (never answer with a kind outside this list): {{known_kinds}}

Expert knowledge:
Prioritize these external kinds when the message points outside the cluster
store: {{priority_kinds}}
Naming conventions for referenced object names:
{{conventions}}
Additional guidance: {{guidance}}

Previously tried destKinds (excluded, pick something else): {{excluded}}

Respond with strict JSON and nothing else:
{"srcKind": "<kind>", "interKinds": ["<kind>", ...], "destKind": "<kind>", "rationale": "<short reason>"}
)PROMPT";

const std::string kCypherGenTemplate = R"PROMPT(## Stage: CypherQueryGenerator
Translate the extended metapath below into a Cypher query.

Extended metapath (one edge per line, "type, srcKind, destKind, key;"):
{{metapath}}
Anchor event uid: {{event_uid}}

Rules:
- Emit one MATCH clause per edge, in listed order, each followed by exactly
  one WHERE clause of the form WHERE r<i>.key = '<key>'.
- Use relationship aliases r1..rN in listing order and keep each edge's
  stored direction: the listed srcKind is always the arrow's tail.
- Node aliases: PersistentVolume=pv, PersistentVolumeClaim=pvc, Pod=pod,
  Event=e; any other kind uses its lowercased name.
- Bind the Event node to the anchor uid in the first WHERE clause.
- Finish with a RETURN listing every node and relationship alias along the
  path, in path order.

Respond with the Cypher query only.
)PROMPT";

const std::string kSummarizerTemplate = R"PROMPT(## Stage: DiagnosticSummarizer
Assess whether the error message correlates with the fields in the entity
state below.

Error message: {{message}}
Entity: kind={{kind}} name={{name}} namespace={{namespace}}
StateJSON fragments:
{{fragments}}
End of fragments.

Rules:
- If the state relates to the error message, clarify the connection and cite
  the most pertinent JSON fragments.
- If it does not relate, acknowledge the irrelevance; do not force a
  connection.
- Strictly adhere to the factual data in the fragments above. Never fabricate
  or infer values, even if the data contradicts the error message; report any
  discrepancy instead.
- Summarize the key observations within {{word_limit}} words.

Respond with strict JSON and nothing else:
{"related": true|false, "observations": "<summary>", "cited_fragments": ["/status/...", ...]}
)PROMPT";

const std::string kReportGenTemplate = R"PROMPT(## Stage: ReportCommandGenerator
Produce a root cause report for the incident below. Check the entity states
against the state reconciliation rules:
1. Each entity should have a current state.
2. The states of entities should be consistent with one another.
3. Any inconsistency due to data discrepancy should be clearly reported.

Error message: {{message}}
Namespace: {{namespace}}

Diagnostic summaries (statepath order):
{{summaries}}
Entities with no recorded state:
{{absences}}

Conclude with the root cause, then recommend remediation commands (kubectl)
with the appropriate resource names and namespaces. Commands are suggestions
for an operator and are never executed by this tool.

Respond with strict JSON and nothing else:
{"conclusion": "<explanation>", "findings": [{"kind": "...", "name": "...", "namespace": "...", "note": "..."}], "commands": ["kubectl ..."]}
)PROMPT";

const std::string kEstimatorTemplate = R"PROMPT(## Stage: InvestigationEstimator
Score how well the report conclusion below explains the error message.

Error message: {{message}}
Report conclusion: {{conclusion}}
Recommended commands: {{commands}}

Scoring: 0 means the conclusion is unrelated or empty; 10 means it fully
explains the error with supporting evidence from entity states. Reason step
by step before settling on a score. A score below {{threshold}} means
additional investigation is necessary.

Respond with strict JSON and nothing else:
{"score": <0-10>, "reasoning": "<why>"}
)PROMPT";

}  // namespace

const char* stage_name(Stage stage) {
    switch (stage) {
        case Stage::Locator: return "RootCauseLocator";
        case Stage::CypherGen: return "CypherQueryGenerator";
        case Stage::Summarizer: return "DiagnosticSummarizer";
        case Stage::ReportGen: return "ReportCommandGenerator";
        case Stage::Estimator: return "InvestigationEstimator";
    }
    return "?";
}

const char* stage_template_file(Stage stage) {
    switch (stage) {
        case Stage::Locator: return "root_cause_locator.txt";
        case Stage::CypherGen: return "cypher_query_generator.txt";
        case Stage::Summarizer: return "diagnostic_summarizer.txt";
        case Stage::ReportGen: return "report_command_generator.txt";
        case Stage::Estimator: return "investigation_estimator.txt";
    }
    return "?";
}

const std::string& builtin_template(Stage stage) {
    switch (stage) {
        case Stage::Locator: return kLocatorTemplate;
        case Stage::CypherGen: return kCypherGenTemplate;
        case Stage::Summarizer: return kSummarizerTemplate;
        case Stage::ReportGen: return kReportGenTemplate;
        case Stage::Estimator: return kEstimatorTemplate;
    }
    fail(ErrorCode::Internal, "unknown stage");
}

PromptLibrary PromptLibrary::builtin() {
    PromptLibrary lib;
    for (Stage stage : {Stage::Locator, Stage::CypherGen, Stage::Summarizer, Stage::ReportGen,
                        Stage::Estimator})
        lib.templates_[stage] = builtin_template(stage);
    return lib;
}

PromptLibrary PromptLibrary::from_dir(const std::string& dir) {
    PromptLibrary lib = builtin();
    for (auto& [stage, text] : lib.templates_) {
        std::ifstream in(dir + "/" + stage_template_file(stage));
        if (!in) continue;
        std::ostringstream buf;
        buf << in.rdbuf();
        text = buf.str();
    }
    return lib;
}

const std::string& PromptLibrary::raw(Stage stage) const { return templates_.at(stage); }

std::string PromptLibrary::render(Stage stage,
                                  const std::map<std::string, std::string>& slots) const {
    const std::string& tmpl = raw(stage);
    std::string out;
    out.reserve(tmpl.size());
    size_t pos = 0;
    while (pos < tmpl.size()) {
        size_t open = tmpl.find("{{", pos);
        if (open == std::string::npos) {
            out.append(tmpl, pos, std::string::npos);
            break;
        }
        out.append(tmpl, pos, open - pos);
        size_t close = tmpl.find("}}", open);
        if (close == std::string::npos)
            fail(ErrorCode::Config, std::string("unterminated slot in template ") +
                                        stage_template_file(stage));
        std::string slot = tmpl.substr(open + 2, close - open - 2);
        auto it = slots.find(slot);
        if (it == slots.end())
            fail(ErrorCode::Config, "no value for slot '" + slot + "' in template " +
                                        stage_template_file(stage));
        out += it->second;
        pos = close + 2;
    }
    return out;
}

}  // namespace krca
