#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "mrfscreen/model.hpp"

namespace mrfscreen {

// Model file schema (JSON, node indices 1-based):
// {p, basis:{kind,k[,b]}, domain:{l[],u[],b_l,b_u}, theta_max, theta_min,
//  d, node_params[][], edges:[{i,j,block[k][k]}]}
// Doubles round-trip bit-exactly through nlohmann::json.

inline nlohmann::json model_to_json(const ModelSpec& model) {
    nlohmann::json j;
    j["p"] = model.p;
    j["basis"] = {{"kind", to_string(model.basis.kind)}, {"k", model.basis.k}};
    if (model.basis.kind == BasisKind::Harmonic) j["basis"]["b"] = model.basis.b;
    j["domain"] = {{"l", model.domain.lo},
                   {"u", model.domain.hi},
                   {"b_l", model.domain.b_l},
                   {"b_u", model.domain.b_u}};
    j["theta_max"] = model.theta_max;
    j["theta_min"] = model.theta_min;
    j["d"] = model.d;
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& v : model.node_params)
        nodes.push_back(std::vector<double>(v.data(), v.data() + v.size()));
    j["node_params"] = std::move(nodes);
    nlohmann::json edges = nlohmann::json::array();
    for (const auto& [key, blk] : model.edges) {
        nlohmann::json block = nlohmann::json::array();
        for (int r = 0; r < blk.rows(); ++r) {
            nlohmann::json row = nlohmann::json::array();
            for (int s = 0; s < blk.cols(); ++s) row.push_back(blk(r, s));
            block.push_back(std::move(row));
        }
        edges.push_back({{"i", key.first + 1}, {"j", key.second + 1}, {"block", std::move(block)}});
    }
    j["edges"] = std::move(edges);
    return j;
}

inline ModelSpec model_from_json(const nlohmann::json& j) {
    ModelSpec model;
    model.p = j.at("p").get<int>();
    const auto& jb = j.at("basis");
    model.basis.kind = basis_kind_from_string(jb.at("kind").get<std::string>());
    model.basis.k = jb.at("k").get<int>();
    const auto& jd = j.at("domain");
    model.domain.lo = jd.at("l").get<std::vector<double>>();
    model.domain.hi = jd.at("u").get<std::vector<double>>();
    if (jd.contains("b_l")) {
        model.domain.b_l = jd.at("b_l").get<double>();
        model.domain.b_u = jd.at("b_u").get<double>();
    } else {
        double lmin = 1e300, lmax = 0.0;
        for (size_t i = 0; i < model.domain.lo.size(); ++i) {
            const double len = model.domain.hi[i] - model.domain.lo[i];
            lmin = std::min(lmin, len);
            lmax = std::max(lmax, len);
        }
        model.domain.b_l = lmin;
        model.domain.b_u = lmax;
    }
    if (jb.contains("b"))
        model.basis.b = jb.at("b").get<double>();
    else if (!model.domain.lo.empty())
        model.basis.b = 0.5 * (model.domain.hi[0] - model.domain.lo[0]);
    model.theta_max = j.at("theta_max").get<double>();
    model.theta_min = j.at("theta_min").get<double>();
    for (const auto& row : j.at("node_params")) {
        const auto v = row.get<std::vector<double>>();
        model.node_params.push_back(
            Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<long>(v.size())));
    }
    for (const auto& je : j.at("edges")) {
        const int i = je.at("i").get<int>() - 1;
        const int jj = je.at("j").get<int>() - 1;
        const auto& jblk = je.at("block");
        Eigen::MatrixXd blk(model.basis.k, model.basis.k);
        if (static_cast<int>(jblk.size()) != model.basis.k)
            throw std::invalid_argument("edge block must have k rows");
        for (int r = 0; r < model.basis.k; ++r) {
            const auto row = jblk.at(r).get<std::vector<double>>();
            if (static_cast<int>(row.size()) != model.basis.k)
                throw std::invalid_argument("edge block must have k columns");
            for (int s = 0; s < model.basis.k; ++s) blk(r, s) = row[s];
        }
        if (!model.edges.emplace(std::make_pair(i, jj), std::move(blk)).second)
            throw std::invalid_argument("duplicate edge in model file");
    }
    model.d = j.contains("d") ? j.at("d").get<int>() : model.max_degree();
    model.validate();
    return model;
}

inline void write_model_file(const ModelSpec& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open model file for writing: " + path);
    out << model_to_json(model).dump(2) << "\n";
}

inline ModelSpec read_model_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open model file: " + path);
    nlohmann::json j;
    in >> j;
    return model_from_json(j);
}

}  // namespace mrfscreen
