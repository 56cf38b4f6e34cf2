#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mrfscreen/grise.hpp"
#include "mrfscreen/structure.hpp"

namespace mrfscreen {

inline constexpr const char* kReportSchemaVersion = "1.0";

/// FNV-1a content hash, hex encoded; used to bind a report to the file it
/// claims to describe without parsing that file.
inline std::string content_hash_hex(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file for hashing: " + path);
    std::uint64_t h = 1469598103934665603ULL;
    char buf[4096];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ULL;
        }
        if (!in) break;
    }
    char out[17];
    std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
    return out;
}

struct NodeTelemetry {
    double objective = 0.0;
    long iterations = 0;
    long best_iterate = 0;
    std::vector<double> vertex;
};

struct RunReport {
    std::string schema_version = kReportSchemaVersion;
    std::uint64_t seed = 0;
    long n = 0;
    int p = 0, k = 0;
    std::string basis_kind = "polynomial";
    std::vector<NodeTelemetry> nodes;
    std::vector<std::pair<int, int>> edges;  // 0-based internally, 1-based on disk
    long edge_disagreements = 0;
    std::optional<std::vector<std::vector<double>>> node_params;  // absent with --edges-only
    std::map<std::string, double> timings_seconds;
    std::optional<std::string> model_ref_path;
    std::optional<std::string> model_ref_hash;
    nlohmann::json diagnostics;  // optional free-form block

    void validate() const {
        auto finite = [](double v) {
            if (!std::isfinite(v)) throw std::runtime_error("non-finite value in report");
        };
        for (const auto& node : nodes) {
            finite(node.objective);
            for (double v : node.vertex) finite(v);
        }
        if (node_params)
            for (const auto& row : *node_params)
                for (double v : row) finite(v);
        for (const auto& [key, v] : timings_seconds) {
            (void)key;
            finite(v);
        }
    }
};

inline nlohmann::json report_to_json(const RunReport& r) {
    r.validate();
    nlohmann::json j;
    j["schema_version"] = r.schema_version;
    j["seed"] = r.seed;
    j["n"] = r.n;
    j["p"] = r.p;
    j["k"] = r.k;
    j["basis_kind"] = r.basis_kind;
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& node : r.nodes)
        nodes.push_back({{"objective", node.objective},
                         {"iterations", node.iterations},
                         {"best_iterate", node.best_iterate},
                         {"vertex", node.vertex}});
    j["nodes"] = std::move(nodes);
    nlohmann::json edges = nlohmann::json::array();
    for (const auto& [a, b] : r.edges) edges.push_back({a + 1, b + 1});
    j["edges"] = std::move(edges);
    j["edge_disagreements"] = r.edge_disagreements;
    if (r.node_params) j["node_params"] = *r.node_params;
    j["timings_seconds"] = r.timings_seconds;
    if (r.model_ref_path) {
        j["model_ref"] = {{"path", *r.model_ref_path}, {"hash", *r.model_ref_hash}};
    }
    if (!r.diagnostics.is_null()) j["diagnostics"] = r.diagnostics;
    return j;
}

inline RunReport report_from_json(const nlohmann::json& j) {
    RunReport r;
    r.schema_version = j.at("schema_version").get<std::string>();
    const auto dot = r.schema_version.find('.');
    const std::string major = r.schema_version.substr(0, dot);
    if (major != "1")
        throw std::runtime_error("unsupported report schema major version: " + r.schema_version);
    r.seed = j.at("seed").get<std::uint64_t>();
    r.n = j.at("n").get<long>();
    r.p = j.at("p").get<int>();
    r.k = j.at("k").get<int>();
    r.basis_kind = j.at("basis_kind").get<std::string>();
    for (const auto& jn : j.at("nodes")) {
        NodeTelemetry node;
        node.objective = jn.at("objective").get<double>();
        node.iterations = jn.at("iterations").get<long>();
        node.best_iterate = jn.at("best_iterate").get<long>();
        node.vertex = jn.at("vertex").get<std::vector<double>>();
        r.nodes.push_back(std::move(node));
    }
    for (const auto& je : j.at("edges"))
        r.edges.emplace_back(je.at(0).get<int>() - 1, je.at(1).get<int>() - 1);
    r.edge_disagreements = j.at("edge_disagreements").get<long>();
    if (j.contains("node_params"))
        r.node_params = j.at("node_params").get<std::vector<std::vector<double>>>();
    if (j.contains("timings_seconds"))
        r.timings_seconds = j.at("timings_seconds").get<std::map<std::string, double>>();
    if (j.contains("model_ref")) {
        r.model_ref_path = j.at("model_ref").at("path").get<std::string>();
        r.model_ref_hash = j.at("model_ref").at("hash").get<std::string>();
    }
    if (j.contains("diagnostics")) r.diagnostics = j.at("diagnostics");
    r.validate();
    return r;
}

inline void write_report_file(const RunReport& r, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open report file for writing: " + path);
    out << report_to_json(r).dump(2) << "\n";
}

inline RunReport read_report_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open report file: " + path);
    nlohmann::json j;
    in >> j;
    return report_from_json(j);
}

}  // namespace mrfscreen
