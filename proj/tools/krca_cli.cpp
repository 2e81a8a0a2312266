// krca command-line interface. Talks to the engine exclusively through the
// C API in krca/krca.h, the same surface external embedders get.
#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "krca/krca.h"

namespace {

struct EngineHandle {
    krca_engine* engine = nullptr;
    ~EngineHandle() { krca_engine_free(engine); }
};

struct OwnedString {
    char* text = nullptr;
    ~OwnedString() { krca_string_free(text); }
    std::string str() const { return text ? text : ""; }
};

int report_error(const char* what, krca_status status, krca_engine* engine) {
    std::cerr << "error: " << what << ": " << krca_status_name(status);
    if (engine && *krca_last_error(engine)) std::cerr << ": " << krca_last_error(engine);
    std::cerr << "\n";
    return 1;
}

bool write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) {
        std::cerr << "error: cannot write " << path << "\n";
        return false;
    }
    out << content;
    return true;
}

std::string read_file(const std::string& path, bool& ok) {
    std::ifstream in(path);
    if (!in) {
        ok = false;
        return "";
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    ok = true;
    return buf.str();
}

int open_engine(EngineHandle& handle, const std::string& config_path) {
    krca_status rc = krca_engine_new(config_path.empty() ? nullptr : config_path.c_str(),
                                     &handle.engine);
    if (rc != KRCA_OK) {
        std::cerr << "error: cannot initialize engine: " << krca_status_name(rc) << "\n";
        return 1;
    }
    return 0;
}

int load_graph_file(EngineHandle& handle, const std::string& graph_path) {
    krca_status rc = krca_load_graph(handle.engine, graph_path.c_str());
    if (rc != KRCA_OK) return report_error("load graph", rc, handle.engine);
    return 0;
}

// Minimal JSON string-field scan; the CLI avoids a JSON dependency since the
// engine already validates the documents it produces and consumes.
std::string json_string_field(const std::string& doc, const std::string& field) {
    std::string needle = "\"" + field + "\": \"";
    size_t pos = doc.find(needle);
    if (pos == std::string::npos) {
        needle = "\"" + field + "\":\"";
        pos = doc.find(needle);
        if (pos == std::string::npos) return "";
    }
    pos += needle.size();
    std::string out;
    while (pos < doc.size() && doc[pos] != '"') {
        if (doc[pos] == '\\' && pos + 1 < doc.size()) ++pos;
        out += doc[pos++];
    }
    return out;
}

std::string json_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"krca — root cause analysis over Kubernetes snapshot graphs"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "Config file (key = value format)")
        ->envname("KRCA_CONFIG");

    // build-graph
    auto* build = app.add_subcommand("build-graph", "Build a state graph from snapshot streams");
    std::vector<std::string> snapshot_paths;
    std::string graph_out;
    build->add_option("--snapshots", snapshot_paths, "Snapshot stream files (JSON lines)")
        ->required()
        ->expected(-1);
    build->add_option("--out", graph_out, "Output graph file")->required();

    // metagraph
    auto* metagraph = app.add_subcommand("metagraph", "Derive the meta graph from a state graph");
    std::string graph_in, meta_out, dot_out;
    metagraph->add_option("--graph", graph_in, "Serialized state graph")->required();
    metagraph->add_option("--out", meta_out, "Output meta graph JSON");
    metagraph->add_option("--dot", dot_out, "Output DOT file");

    // rca
    auto* rca = app.add_subcommand("rca", "Analyze one incident");
    std::string rca_graph, backend_spec, incident_file, message, incident_ns, time_str, reason,
        type_label, out_prefix;
    rca->add_option("--graph", rca_graph, "Serialized state graph")->required();
    rca->add_option("--backend", backend_spec, "Backend: oracle | mock:<file> | http");
    rca->add_option("--incident", incident_file, "Incident JSON file");
    rca->add_option("--message", message, "Incident error message");
    rca->add_option("--namespace", incident_ns, "Incident namespace");
    rca->add_option("--time", time_str, "Incident timestamp (RFC 3339)");
    rca->add_option("--reason", reason, "Incident reason");
    rca->add_option("--type", type_label, "Incident type label");
    rca->add_option("--out", out_prefix, "Output prefix (<prefix>.md, <prefix>.json)");

    // eval
    auto* eval = app.add_subcommand("eval", "Run a labeled incident corpus");
    std::string eval_graph, corpus, mode = "retrieval", eval_backend, eval_json_out;
    eval->add_option("--graph", eval_graph, "Serialized state graph")->required();
    eval->add_option("--corpus", corpus, "Corpus file (JSON lines)")->required();
    eval->add_option("--mode", mode, "Correctness mode: report | retrieval");
    eval->add_option("--backend", eval_backend, "Backend: oracle | mock:<file> | http");
    eval->add_option("--out", eval_json_out, "Write metrics JSON to file");

    // export-cypher
    auto* exporter = app.add_subcommand("export-cypher", "Emit Cypher text");
    std::string export_graph, metapath_file, anchor_uid, export_out;
    bool extend = false;
    exporter->add_option("--graph", export_graph, "Dump this state graph as CREATE statements");
    exporter->add_option("--metapath", metapath_file, "Compile this metapath file into a query");
    exporter->add_option("--anchor-uid", anchor_uid, "Event uid binding for the query");
    exporter->add_flag("--extend", extend, "Prepend the EVENT -> Event -> srcKind steps");
    exporter->add_option("--out", export_out, "Output file (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    EngineHandle handle;
    if (int rc = open_engine(handle, config_path)) return rc;

    if (build->parsed()) {
        for (const auto& path : snapshot_paths) {
            krca_status rc = krca_load_snapshots(handle.engine, path.c_str());
            if (rc != KRCA_OK) return report_error("load snapshots", rc, handle.engine);
        }
        krca_status rc = krca_build_graph(handle.engine);
        if (rc != KRCA_OK) return report_error("build graph", rc, handle.engine);
        rc = krca_save_graph(handle.engine, graph_out.c_str());
        if (rc != KRCA_OK) return report_error("save graph", rc, handle.engine);
        OwnedString stats;
        if (krca_graph_stats(handle.engine, &stats.text) == KRCA_OK)
            std::cout << stats.str() << "\n";
        std::cout << "graph written to " << graph_out << "\n";
        return 0;
    }

    if (metagraph->parsed()) {
        if (int rc = load_graph_file(handle, graph_in)) return rc;
        OwnedString json;
        krca_status rc = krca_export_metagraph(handle.engine, &json.text);
        if (rc != KRCA_OK) return report_error("metagraph", rc, handle.engine);
        if (meta_out.empty())
            std::cout << json.str() << "\n";
        else if (!write_file(meta_out, json.str() + "\n"))
            return 1;
        if (!dot_out.empty()) {
            OwnedString dot;
            rc = krca_export_metagraph_dot(handle.engine, &dot.text);
            if (rc != KRCA_OK) return report_error("metagraph dot", rc, handle.engine);
            if (!write_file(dot_out, dot.str())) return 1;
        }
        return 0;
    }

    if (rca->parsed()) {
        if (int rc = load_graph_file(handle, rca_graph)) return rc;
        if (!backend_spec.empty()) {
            krca_status rc = krca_set_backend(handle.engine, backend_spec.c_str());
            if (rc != KRCA_OK) return report_error("set backend", rc, handle.engine);
        }
        std::string incident_json;
        if (!incident_file.empty()) {
            bool ok = false;
            incident_json = read_file(incident_file, ok);
            if (!ok) {
                std::cerr << "error: cannot read " << incident_file << "\n";
                return 1;
            }
        } else {
            if (message.empty() || time_str.empty()) {
                std::cerr << "error: rca needs --incident or --message plus --time\n";
                return 2;
            }
            incident_json = "{\"message\": \"" + json_escape(message) + "\", \"namespace\": \"" +
                            json_escape(incident_ns) + "\", \"timestamp\": \"" +
                            json_escape(time_str) + "\", \"reason\": \"" + json_escape(reason) +
                            "\", \"type_label\": \"" + json_escape(type_label) + "\"}";
        }
        OwnedString markdown, json;
        krca_status rc = krca_run_rca(handle.engine, incident_json.c_str(), &markdown.text,
                                      &json.text);
        if (rc != KRCA_OK) return report_error("rca", rc, handle.engine);
        if (out_prefix.empty()) {
            std::cout << markdown.str();
        } else {
            if (!write_file(out_prefix + ".md", markdown.str())) return 1;
            if (!write_file(out_prefix + ".json", json.str() + "\n")) return 1;
            std::cout << "report written to " << out_prefix << ".md and " << out_prefix
                      << ".json\n";
        }
        std::string status = json_string_field(json.str(), "status");
        std::cout << "status: " << status << "\n";
        if (status == "Explained") return 0;
        if (status == "Exhausted" && json.str().find("\"error\"") == std::string::npos) return 0;
        return 1;
    }

    if (eval->parsed()) {
        if (int rc = load_graph_file(handle, eval_graph)) return rc;
        if (!eval_backend.empty()) {
            krca_status rc = krca_set_backend(handle.engine, eval_backend.c_str());
            if (rc != KRCA_OK) return report_error("set backend", rc, handle.engine);
        }
        OwnedString tables, json;
        krca_status rc = krca_run_eval(handle.engine, corpus.c_str(), mode.c_str(), &tables.text,
                                       &json.text);
        if (rc != KRCA_OK) return report_error("eval", rc, handle.engine);
        std::cout << tables.str();
        if (!eval_json_out.empty() && !write_file(eval_json_out, json.str() + "\n")) return 1;
        return 0;
    }

    if (exporter->parsed()) {
        OwnedString text;
        if (!metapath_file.empty()) {
            bool ok = false;
            std::string metapath_text = read_file(metapath_file, ok);
            if (!ok) {
                std::cerr << "error: cannot read " << metapath_file << "\n";
                return 1;
            }
            krca_status rc = krca_metapath_cypher(handle.engine, metapath_text.c_str(),
                                                  anchor_uid.c_str(), extend ? 1 : 0, &text.text);
            if (rc != KRCA_OK) return report_error("export-cypher", rc, handle.engine);
        } else if (!export_graph.empty()) {
            if (int rc = load_graph_file(handle, export_graph)) return rc;
            krca_status rc = krca_export_graph_cypher(handle.engine, &text.text);
            if (rc != KRCA_OK) return report_error("export-cypher", rc, handle.engine);
        } else {
            std::cerr << "error: export-cypher needs --graph or --metapath\n";
            return 2;
        }
        if (export_out.empty())
            std::cout << text.str();
        else if (!write_file(export_out, text.str()))
            return 1;
        return 0;
    }

    return 2;
}
