#include "krca/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "krca/error.hpp"

namespace krca {

const char* edge_type_name(EdgeType type) {
    switch (type) {
        case EdgeType::ReferInternal: return "ReferInternal";
        case EdgeType::UseExternal: return "UseExternal";
        case EdgeType::HasState: return "HasState";
        case EdgeType::HasEvent: return "HasEvent";
    }
    return "?";
}

EdgeType edge_type_from_name(const std::string& name) {
    if (name == "ReferInternal") return EdgeType::ReferInternal;
    if (name == "UseExternal") return EdgeType::UseExternal;
    if (name == "HasState") return EdgeType::HasState;
    if (name == "HasEvent") return EdgeType::HasEvent;
    fail(ErrorCode::Config, "unknown edge type '" + name + "'");
}

bool Config::is_external_kind(const std::string& kind) const {
    return find_external(kind) != nullptr;
}

const ExternalKindDecl* Config::find_external(const std::string& kind) const {
    for (const auto& decl : external_kinds)
        if (decl.kind == kind) return &decl;
    return nullptr;
}

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& value, char sep = ',') {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(value);
    while (std::getline(in, item, sep)) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::pair<std::string, std::string> split_kind_key(const std::string& value) {
    size_t colon = value.find(':');
    if (colon == std::string::npos)
        fail(ErrorCode::Config, "expected '<kind>:<key>', got '" + value + "'");
    return {trim(value.substr(0, colon)), trim(value.substr(colon + 1))};
}

RefValueField value_field_from_name(const std::string& name) {
    if (name == "auto") return RefValueField::Auto;
    if (name == "uid") return RefValueField::Uid;
    if (name == "name") return RefValueField::Name;
    if (name == "composite") return RefValueField::Composite;
    fail(ErrorCode::Config, "unknown value field '" + name + "' (expected auto|uid|name|composite)");
}

CatalogMapping parse_mapping(const std::string& value) {
    auto fields = split_list(value);
    if (fields.size() < 4 || fields.size() > 5)
        fail(ErrorCode::Config,
             "catalog.map expects 'kind, key, target, edge_type[, value_field]', got '" + value + "'");
    CatalogMapping m;
    m.kind = fields[0];
    m.key = fields[1];
    if (fields[2].rfind("from:", 0) == 0)
        m.target_kind_from = fields[2].substr(5);
    else
        m.target_kind = fields[2];
    m.edge_type = edge_type_from_name(fields[3]);
    if (fields.size() == 5) m.value_field = value_field_from_name(fields[4]);
    return m;
}

bool parse_bool(const std::string& value, const std::string& key) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    fail(ErrorCode::Config, "expected boolean for '" + key + "', got '" + value + "'");
}

}  // namespace

Config Config::defaults() {
    Config c;
    auto map = [&c](std::string kind, std::string key, std::string target, EdgeType type,
                    RefValueField field) {
        CatalogMapping m;
        m.kind = std::move(kind);
        m.key = std::move(key);
        if (target.rfind("from:", 0) == 0)
            m.target_kind_from = target.substr(5);
        else
            m.target_kind = std::move(target);
        m.edge_type = type;
        m.value_field = field;
        c.mappings.push_back(std::move(m));
    };
    const auto refer = EdgeType::ReferInternal;
    map("Event", "involvedObject_uid", "from:involvedObject_kind", refer, RefValueField::Uid);
    map("*", "metadata_ownerReferences_name", "from:metadata_ownerReferences_kind", refer,
        RefValueField::Name);
    map("*", "metadata_namespace", "Namespace", refer, RefValueField::Name);
    map("Pod", "spec_volumes_persistentVolumeClaim_claimName", "PersistentVolumeClaim", refer,
        RefValueField::Name);
    map("Pod", "spec_volumes_configMap_name", "ConfigMap", refer, RefValueField::Name);
    map("Pod", "spec_volumes_secret_secretName", "Secret", refer, RefValueField::Name);
    map("Pod", "spec_serviceAccountName", "ServiceAccount", refer, RefValueField::Name);
    map("*", "spec_template_spec_volumes_persistentVolumeClaim_claimName", "PersistentVolumeClaim",
        refer, RefValueField::Name);
    map("*", "spec_template_spec_volumes_configMap_name", "ConfigMap", refer, RefValueField::Name);
    map("*", "spec_template_spec_volumes_secret_secretName", "Secret", refer, RefValueField::Name);
    map("*", "spec_template_spec_serviceAccountName", "ServiceAccount", refer, RefValueField::Name);
    map("PersistentVolumeClaim", "spec_volumeName", "PersistentVolume", refer, RefValueField::Name);
    map("PersistentVolume", "spec_claimRef_uid", "PersistentVolumeClaim", refer, RefValueField::Uid);
    map("PersistentVolume", "spec_nfs_path", "nfs", EdgeType::UseExternal,
        RefValueField::Composite);

    c.external_kinds.push_back({"nfs", {"server", "path"}});
    c.external_kinds.push_back({"container", {"name"}});
    c.external_kinds.push_back({"image", {"name"}});

    c.knowledge.priority_external_kinds = {"nfs", "container", "image"};
    c.knowledge.conventions.push_back({"-conf", "ConfigMap"});
    return c;
}

Config parse_config_text(const std::string& text) {
    Config c = Config::defaults();
    bool volatile_reset = false;
    bool conventions_reset = false;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string s = trim(line);
        if (s.empty() || s[0] == '#') continue;
        size_t eq = s.find('=');
        if (eq == std::string::npos)
            fail(ErrorCode::Config, "config line " + std::to_string(lineno) + ": expected 'key = value'");
        std::string key = trim(s.substr(0, eq));
        std::string value = trim(s.substr(eq + 1));

        if (key == "dedup.volatile_keys") {
            if (!volatile_reset) {
                c.volatile_keys.clear();
                volatile_reset = true;
            }
            for (auto& v : split_list(value)) c.volatile_keys.push_back(v);
        } else if (key == "catalog.use_statistics") {
            c.use_key_statistics = parse_bool(value, key);
        } else if (key == "catalog.min_occurrence") {
            c.min_occurrence = std::stoi(value);
        } else if (key == "catalog.diversity_ratio") {
            c.diversity_ratio = std::stod(value);
        } else if (key == "catalog.include") {
            c.include_keys.push_back(split_kind_key(value));
        } else if (key == "catalog.exclude") {
            c.exclude_keys.push_back(split_kind_key(value));
        } else if (key == "catalog.map") {
            c.mappings.push_back(parse_mapping(value));
        } else if (key == "catalog.clear_defaults") {
            if (parse_bool(value, key)) c.mappings.clear();
        } else if (key == "external.kind") {
            auto fields = split_list(value);
            if (fields.size() < 2)
                fail(ErrorCode::Config, "external.kind expects 'kind, field...', got '" + value + "'");
            ExternalKindDecl decl;
            decl.kind = fields[0];
            decl.identity_fields.assign(fields.begin() + 1, fields.end());
            std::erase_if(c.external_kinds, [&](const auto& e) { return e.kind == decl.kind; });
            c.external_kinds.push_back(std::move(decl));
        } else if (key == "cluster_scoped.kinds") {
            c.cluster_scoped_kinds = split_list(value);
        } else if (key == "incident.window_minutes") {
            c.incident_window_seconds = std::stoll(value) * 60;
        } else if (key == "query.window_minutes") {
            c.query_window_seconds = std::stoll(value) * 60;
        } else if (key == "metapath.max_len") {
            c.max_path_len = std::stoi(value);
        } else if (key == "metapath.max_paths") {
            c.max_paths = std::stoi(value);
        } else if (key == "rca.max_trials") {
            c.max_trials = std::stoi(value);
        } else if (key == "rca.interactive") {
            c.interactive = parse_bool(value, key);
        } else if (key == "estimator.threshold") {
            c.score_threshold = std::stoi(value);
        } else if (key == "summary.word_limit") {
            c.summary_word_limit = std::stoi(value);
        } else if (key == "report.command_whitelist") {
            c.command_whitelist = split_list(value);
        } else if (key == "knowledge.priority_external") {
            c.knowledge.priority_external_kinds = split_list(value);
        } else if (key == "knowledge.convention") {
            if (!conventions_reset) {
                c.knowledge.conventions.clear();
                conventions_reset = true;
            }
            auto fields = split_list(value);
            if (fields.size() != 2)
                fail(ErrorCode::Config, "knowledge.convention expects 'pattern, Kind'");
            c.knowledge.conventions.push_back({fields[0], fields[1]});
        } else if (key == "knowledge.guidance") {
            if (!c.knowledge.guidance.empty()) c.knowledge.guidance += "\n";
            c.knowledge.guidance += value;
        } else if (key == "knowledge.known_kinds") {
            for (auto& v : split_list(value)) c.knowledge.known_kinds.push_back(v);
        } else if (key == "backend") {
            c.backend.spec = value;
        } else if (key == "backend.http.url") {
            c.backend.http_url = value;
        } else if (key == "backend.http.model") {
            c.backend.http_model = value;
        } else if (key == "backend.http.key_env") {
            c.backend.api_key_env = value;
        } else if (key == "backend.temperature") {
            c.backend.temperature = std::stod(value);
        } else if (key == "backend.max_tokens") {
            c.backend.max_tokens = std::stoi(value);
        } else if (key == "prompts.dir") {
            c.prompt_dir = value;
        } else {
            fail(ErrorCode::Config, "config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        }
    }
    return c;
}

Config load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::Io, "cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

}  // namespace krca
