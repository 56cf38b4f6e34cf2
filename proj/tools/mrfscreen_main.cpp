// mrfscreen: learn sparse continuous pairwise MRFs from samples.
// Subcommands: gen | fit | eval | curve | diagnose.

#include <chrono>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mrfscreen/mrfscreen.hpp"

namespace mrf = mrfscreen;
using nlohmann::json;

namespace {

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct HyperParams {
    mrf::BasisFamily basis;
    mrf::Domain domain;
    double theta_max = 1.0, theta_min = 0.1;
    int d = 1;
    mrf::GriseConfig grise;
    mrf::NodePipelineConfig pipeline;
    std::optional<std::string> model_ref;
};

HyperParams read_hyper_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open hyper file: " + path);
    json j;
    in >> j;
    HyperParams h;
    const auto& jb = j.at("basis");
    h.basis.kind = mrf::basis_kind_from_string(jb.at("kind").get<std::string>());
    h.basis.k = jb.at("k").get<int>();
    const auto& jd = j.at("domain");
    h.domain.lo = jd.at("l").get<std::vector<double>>();
    h.domain.hi = jd.at("u").get<std::vector<double>>();
    if (jd.contains("b_l")) {
        h.domain.b_l = jd.at("b_l").get<double>();
        h.domain.b_u = jd.at("b_u").get<double>();
    } else {
        double lmin = 1e300, lmax = 0.0;
        for (size_t i = 0; i < h.domain.lo.size(); ++i) {
            lmin = std::min(lmin, h.domain.hi[i] - h.domain.lo[i]);
            lmax = std::max(lmax, h.domain.hi[i] - h.domain.lo[i]);
        }
        h.domain.b_l = lmin;
        h.domain.b_u = lmax;
    }
    h.basis.b = jb.contains("b") ? jb.at("b").get<double>()
                                 : 0.5 * (h.domain.hi[0] - h.domain.lo[0]);
    h.basis.validate();
    h.domain.validate();
    h.theta_max = j.at("theta_max").get<double>();
    h.theta_min = j.at("theta_min").get<double>();
    h.d = j.at("d").get<int>();
    if (j.contains("grise")) {
        const auto& jg = j.at("grise");
        if (jg.contains("epsilon")) h.grise.epsilon = jg.at("epsilon").get<double>();
        if (jg.contains("max_iters")) h.grise.max_iters = jg.at("max_iters").get<long>();
        if (jg.contains("eta0")) h.grise.eta0 = jg.at("eta0").get<double>();
        if (jg.contains("polish")) h.grise.polish = jg.at("polish").get<bool>();
        if (jg.contains("stall_window")) h.grise.stall_window = jg.at("stall_window").get<long>();
    }
    const int k = h.basis.k;
    h.grise.gamma = h.theta_max * (k + double(k) * k * h.d);
    double phimax = 0.0;
    for (int i = 0; i < h.domain.size(); ++i)
        phimax = std::max(phimax, h.basis.phi_max(h.domain.lo[i], h.domain.hi[i]));
    h.grise.varphi_max = (1.0 + h.domain.b_u) * std::max(phimax, phimax * phimax);
    if (j.contains("node_recovery")) {
        const auto& jn = j.at("node_recovery");
        if (jn.contains("t")) h.pipeline.t = jn.at("t").get<double>();
        if (jn.contains("average_over_z"))
            h.pipeline.average_over_z = jn.at("average_over_z").get<int>();
        if (jn.contains("lasso_max_iters"))
            h.pipeline.lasso_max_iters = jn.at("lasso_max_iters").get<long>();
        if (jn.contains("lasso_tol")) h.pipeline.lasso_tol = jn.at("lasso_tol").get<double>();
        if (jn.contains("rho_max")) h.pipeline.backward.rho_max = jn.at("rho_max").get<double>();
        if (jn.contains("eps6")) h.pipeline.backward.eps6 = jn.at("eps6").get<double>();
        if (jn.contains("quadrature_backward_map"))
            h.pipeline.backward.quadrature_mode = jn.at("quadrature_backward_map").get<bool>();
    }
    if (j.contains("model_ref")) h.model_ref = j.at("model_ref").get<std::string>();
    return h;
}

struct FitOutput {
    mrf::RunReport report;
    std::vector<mrf::GriseSolution> solutions;
    mrf::EdgeSet edges;
};

FitOutput run_fit(const mrf::RowMatrix& samples, const HyperParams& hyper, bool edges_only,
                  std::uint64_t seed) {
    if (samples.cols() != hyper.domain.size())
        throw std::invalid_argument("sample width does not match the hyper-file domain");
    FitOutput out;
    const auto t0 = std::chrono::steady_clock::now();
    out.solutions = mrf::fit_all_nodes(samples, hyper.basis, hyper.domain, hyper.grise);
    out.report.timings_seconds["fit_nodes"] = seconds_since(t0);

    const auto t1 = std::chrono::steady_clock::now();
    long disagreements = 0;
    out.edges = mrf::recover_edges(out.solutions, hyper.basis.k, hyper.theta_min, &disagreements);
    out.report.timings_seconds["recover_edges"] = seconds_since(t1);

    out.report.seed = seed;
    out.report.n = samples.rows();
    out.report.p = hyper.domain.size();
    out.report.k = hyper.basis.k;
    out.report.basis_kind = mrf::to_string(hyper.basis.kind);
    for (const auto& sol : out.solutions) {
        mrf::NodeTelemetry node;
        node.objective = sol.objective;
        node.iterations = sol.iterations_used;
        node.best_iterate = sol.best_iterate_index;
        node.vertex.assign(sol.vertex.data(), sol.vertex.data() + sol.vertex.size());
        out.report.nodes.push_back(std::move(node));
    }
    for (const auto& e : out.edges) out.report.edges.push_back(e);
    out.report.edge_disagreements = disagreements;

    if (!edges_only) {
        const auto t2 = std::chrono::steady_clock::now();
        mrf::NodePipelineConfig cfg = hyper.pipeline;
        cfg.seed = seed;
        const auto pipeline = mrf::full_node_pipeline(samples, hyper.basis, hyper.domain,
                                                      out.solutions, out.edges, hyper.theta_max,
                                                      hyper.d, cfg);
        std::vector<std::vector<double>> node_params;
        for (int i = 0; i < hyper.domain.size(); ++i) {
            const auto row = pipeline.node_params.row(i);
            node_params.emplace_back(row.data(), row.data() + row.size());
        }
        out.report.node_params = std::move(node_params);
        out.report.timings_seconds["node_recovery"] = seconds_since(t2);
    }
    if (hyper.model_ref) {
        out.report.model_ref_path = *hyper.model_ref;
        out.report.model_ref_hash = mrf::content_hash_hex(*hyper.model_ref);
    }
    return out;
}

struct EvalMetrics {
    double linf_error = 0.0;
    mrf::RecoveryScore score;
};

EvalMetrics evaluate_report(const mrf::RunReport& report, const mrf::ModelSpec& truth) {
    if (report.p != truth.p) throw std::invalid_argument("report/truth p mismatch");
    if (report.k != truth.k()) throw std::invalid_argument("report/truth k mismatch");
    const int p = truth.p, k = truth.k();
    EvalMetrics m;
    // edge parameters: read pair (i, j) from node i's stacked estimate
    for (int i = 0; i < p; ++i) {
        mrf::VertexLayout layout(p, k, i);
        if (report.nodes[i].vertex.size() != static_cast<size_t>(layout.dim()))
            throw std::invalid_argument("report vertex dimension mismatch");
        const Eigen::Map<const Eigen::VectorXd> v(report.nodes[i].vertex.data(),
                                                  static_cast<long>(report.nodes[i].vertex.size()));
        for (int j = i + 1; j < p; ++j) {
            const Eigen::MatrixXd* blk = truth.edge_block(i, j);
            for (int r = 0; r < k; ++r)
                for (int s = 0; s < k; ++s) {
                    const double est = v[layout.edge_entry(j, r, s)];
                    const double tru = blk ? (*blk)(r, s) : 0.0;
                    m.linf_error = std::max(m.linf_error, std::abs(est - tru));
                }
        }
    }
    if (report.node_params) {
        for (int i = 0; i < p; ++i)
            for (int r = 0; r < k; ++r)
                m.linf_error = std::max(
                    m.linf_error, std::abs((*report.node_params)[i][r] - truth.node_params[i][r]));
    }
    mrf::EdgeSet est_edges(report.edges.begin(), report.edges.end());
    m.score = mrf::score_recovery(mrf::edge_set_of(truth), est_edges);
    return m;
}

int cmd_gen(const std::string& model_path, long n, const std::string& out_path,
            std::uint64_t seed, const mrf::SamplerConfig& base_config) {
    const mrf::ModelSpec model = mrf::read_model_file(model_path);
    mrf::SamplerConfig config = base_config;
    config.seed = seed;
    mrf::GibbsStats stats;
    const auto t0 = std::chrono::steady_clock::now();
    const mrf::SampleMatrix samples = mrf::gibbs_sample(model, n, config, &stats);
    mrf::write_samples_csv(samples.values, out_path);
    std::cout << "gen: n=" << n << " p=" << model.p
              << " acceptance_rate=" << stats.acceptance_rate()
              << " seconds=" << seconds_since(t0) << "\n";
    return 0;
}

int cmd_fit(const std::string& samples_path, const std::string& hyper_path,
            const std::string& out_path, bool edges_only, bool quadrature_backward,
            std::uint64_t seed) {
    const mrf::RowMatrix samples = mrf::read_samples_csv(samples_path);
    HyperParams hyper = read_hyper_file(hyper_path);
    hyper.pipeline.backward.quadrature_mode = quadrature_backward;
    FitOutput out = run_fit(samples, hyper, edges_only, seed);
    mrf::write_report_file(out.report, out_path);
    std::cout << "fit: n=" << samples.rows() << " p=" << samples.cols()
              << " edges=" << out.edges.size()
              << " disagreements=" << out.report.edge_disagreements << "\n";
    return 0;
}

int cmd_eval(const std::string& report_path, const std::string& truth_path) {
    const mrf::RunReport report = mrf::read_report_file(report_path);
    if (report.model_ref_hash) {
        const std::string actual = mrf::content_hash_hex(truth_path);
        if (actual != *report.model_ref_hash)
            throw std::invalid_argument(
                "truth model file does not match the model referenced by the report "
                "(content hash mismatch)");
    }
    const mrf::ModelSpec truth = mrf::read_model_file(truth_path);
    const EvalMetrics m = evaluate_report(report, truth);
    std::cout << "linf_error=" << m.linf_error << "\n"
              << "precision=" << m.score.precision << "\n"
              << "recall=" << m.score.recall << "\n"
              << "exact=" << (m.score.exact ? "true" : "false") << "\n";
    return 0;
}

int cmd_curve(const std::string& model_path, const std::string& hyper_path,
              const std::vector<long>& n_list, int trials, const std::string& out_path,
              std::uint64_t seed, const mrf::SamplerConfig& base_config) {
    for (size_t i = 1; i < n_list.size(); ++i)
        if (n_list[i] <= n_list[i - 1])
            throw std::invalid_argument("--n-list must be strictly ascending");
    const mrf::ModelSpec model = mrf::read_model_file(model_path);
    const HyperParams hyper = read_hyper_file(hyper_path);
    std::vector<std::vector<std::string>> rows;
    for (long n : n_list) {
        for (int trial = 0; trial < trials; ++trial) {
            const auto t0 = std::chrono::steady_clock::now();
            mrf::SamplerConfig config = base_config;
            config.seed = seed ^ (0x9e3779b97f4a7c15ULL * (n + 1)) ^
                          (0xd1b54a32d192ed03ULL * (trial + 1));
            const mrf::SampleMatrix samples = mrf::gibbs_sample(model, n, config);
            FitOutput fit = run_fit(samples.values, hyper, false, config.seed);
            const EvalMetrics m = evaluate_report(fit.report, model);
            rows.push_back({std::to_string(n), std::to_string(trial),
                            m.score.exact ? "1" : "0", mrf::format_double(m.linf_error),
                            mrf::format_double(seconds_since(t0))});
            std::cout << "curve: n=" << n << " trial=" << trial << " exact=" << m.score.exact
                      << " linf=" << m.linf_error << "\n";
        }
    }
    mrf::write_csv(out_path, {"n", "trial", "exact_recovery", "linf_error", "seconds"}, rows);
    return 0;
}

int cmd_diagnose(const std::string& model_path, int node_1based, double alpha, int quad_nodes,
                 const std::string& kappa_example, const std::string& out_path) {
    const mrf::ModelSpec model = mrf::read_model_file(model_path);
    if (model.p > 3)
        throw std::invalid_argument("diagnose supports p <= 3 (population quadrature)");
    const int node = node_1based - 1;
    if (node < 0 || node >= model.p) throw std::invalid_argument("--node out of range");

    const auto bundle = mrf::covariance_bundle(model, node, quad_nodes);
    const Eigen::VectorXd vstar = mrf::assemble_vertex(model, node);
    const Eigen::VectorXd grad = mrf::population_giso_gradient(model, node, vstar, quad_nodes);
    const double stationarity = grad.lpNorm<Eigen::Infinity>();

    // closed-form kappa for the requested example family, at this model's
    // half-width / degree / magnitude scale
    const double b = 0.5 * (model.domain.hi[0] - model.domain.lo[0]);
    std::string kappa_id = kappa_example;
    if (kappa_id == "auto")
        kappa_id = model.basis.kind == mrf::BasisKind::Harmonic ? "S2" : "S1";
    const double kappa = mrf::kappa_closed_form(mrf::kappa_example_from_string(kappa_id), b,
                                                std::max(1, model.d), model.theta_max);
    const double rho_max = model.theta_max * (1.0 + model.k() * model.d * model.phi_max());
    const double qs = mrf::estimate_qs(model.basis, model.domain.lo[node],
                                       model.domain.hi[node], rho_max);
    const auto constants =
        mrf::complexity_constants(mrf::ComplexityInputs::from_model(model, kappa, qs), alpha);

    json j;
    j["node"] = node_1based;
    auto mat = [](const Eigen::MatrixXd& m) {
        json out = json::array();
        for (long r = 0; r < m.rows(); ++r) {
            json row = json::array();
            for (long c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
            out.push_back(std::move(row));
        }
        return out;
    };
    j["A"] = mat(bundle.A);
    j["B"] = mat(bundle.B);
    j["fisher"] = mat(bundle.fisher);
    if (bundle.sandwich_ok) {
        j["sandwich"] = mat(bundle.sandwich);
        j["fisher_inverse"] = mat(bundle.fisher.inverse());
    } else {
        j["sandwich_omitted"] = "B condition number >= 1e12";
    }
    j["b_condition"] = bundle.b_condition;
    j["stationarity_residual"] = stationarity;
    j["kappa_example"] = kappa_id;
    j["kappa"] = kappa;
    j["q_s_estimate"] = qs;
    j["alpha"] = alpha;
    j["c1_log10"] = constants.log10_c1;
    j["c2_log10"] = constants.log10_c2;
    j["c3_log10"] = constants.log10_c3;
    j["gamma"] = constants.gamma;
    j["varphi_max"] = constants.varphi_max;

    std::cout << "diagnose: node=" << node_1based << "\n";
    if (bundle.sandwich_ok) {
        std::cout << "sandwich_diag=";
        for (long r = 0; r < bundle.sandwich.rows(); ++r)
            std::cout << (r ? "," : "") << bundle.sandwich(r, r);
        const Eigen::MatrixXd jinv = bundle.fisher.inverse();
        std::cout << "\nfisher_inverse_diag=";
        for (long r = 0; r < jinv.rows(); ++r) std::cout << (r ? "," : "") << jinv(r, r);
        std::cout << "\n";
    }
    std::cout << "stationarity_residual=" << stationarity << "\n"
              << "kappa[" << kappa_id << "]=" << kappa << "\n"
              << "q_s_estimate=" << qs << "\n"
              << "c1_log10=" << constants.log10_c1 << " c2_log10=" << constants.log10_c2
              << " c3_log10=" << constants.log10_c3 << "\n";
    if (!out_path.empty()) {
        std::ofstream out(out_path);
        if (!out) throw std::runtime_error("cannot open output file: " + out_path);
        out << j.dump(2) << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mrfscreen: interaction-screening estimation of continuous pairwise MRFs"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags (--seed) may follow the subcommand

    std::uint64_t seed = 0;
    app.add_option("--seed", seed, "RNG seed (every command is deterministic given it)")
        ->capture_default_str();

    mrf::SamplerConfig sampler_config;
    std::string model_path, samples_path, hyper_path, report_path, out_path;
    long n = 1000;
    bool edges_only = false;
    bool quadrature_backward = true;

    auto* gen = app.add_subcommand("gen", "sample a model into a CSV file");
    gen->add_option("--model", model_path, "model JSON file")->required();
    gen->add_option("--n", n, "number of samples")->required();
    gen->add_option("--out", out_path, "output CSV path")->required();
    gen->add_option("--burn-in", sampler_config.burn_in, "burn-in sweeps")->capture_default_str();
    gen->add_option("--thin", sampler_config.thin, "sweeps between retained samples")
        ->capture_default_str();
    gen->add_option("--inner-steps", sampler_config.inner_mrw_steps,
                    "Metropolis proposals per site visit")
        ->capture_default_str();

    auto* fit = app.add_subcommand("fit", "fit structure and parameters from samples");
    fit->add_option("--samples", samples_path, "samples CSV")->required();
    fit->add_option("--config", hyper_path, "hyper-parameter JSON")->required();
    fit->add_option("--out", out_path, "output report JSON")->required();
    fit->add_flag("--edges-only", edges_only, "skip node-parameter recovery");
    fit->add_flag("--quadrature-backward-map,!--no-quadrature-backward-map",
                  quadrature_backward, "deterministic quadrature in the backward map")
        ->capture_default_str();

    auto* eval = app.add_subcommand("eval", "score a report against a truth model");
    eval->add_option("--report", report_path, "report JSON")->required();
    eval->add_option("--truth", model_path, "truth model JSON")->required();

    std::string n_list_str = "1000,10000";
    int trials = 1;
    auto* curve = app.add_subcommand("curve", "error-vs-n experiment grid");
    curve->add_option("--model", model_path, "model JSON file")->required();
    curve->add_option("--config", hyper_path, "hyper-parameter JSON")->required();
    curve->add_option("--n-list", n_list_str, "ascending sample counts, comma separated")
        ->capture_default_str();
    curve->add_option("--trials", trials, "trials per n")->capture_default_str();
    curve->add_option("--out", out_path, "output CSV path")->required();
    curve->add_option("--burn-in", sampler_config.burn_in, "burn-in sweeps")
        ->capture_default_str();
    curve->add_option("--thin", sampler_config.thin, "sweeps between retained samples")
        ->capture_default_str();
    curve->add_option("--inner-steps", sampler_config.inner_mrw_steps,
                      "Metropolis proposals per site visit")
        ->capture_default_str();

    int node_1based = 1;
    double alpha = 0.1;
    int quad_nodes = 128;
    std::string kappa_example = "auto";
    auto* diagnose = app.add_subcommand("diagnose", "population oracles and theory constants");
    diagnose->add_option("--model", model_path, "model JSON file")->required();
    diagnose->add_option("--node", node_1based, "1-based node index")->capture_default_str();
    diagnose->add_option("--alpha", alpha, "accuracy level for the constants")
        ->capture_default_str();
    diagnose->add_option("--quad-nodes", quad_nodes, "quadrature nodes per axis")
        ->capture_default_str();
    diagnose->add_option("--kappa-example", kappa_example, "S1|S2|S3|S4|auto")
        ->capture_default_str();
    diagnose->add_option("--out", out_path, "optional JSON output path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed()) return cmd_gen(model_path, n, out_path, seed, sampler_config);
        if (fit->parsed())
            return cmd_fit(samples_path, hyper_path, out_path, edges_only, quadrature_backward,
                           seed);
        if (eval->parsed()) return cmd_eval(report_path, model_path);
        if (curve->parsed()) {
            std::vector<long> n_list;
            std::stringstream ss(n_list_str);
            std::string item;
            while (std::getline(ss, item, ',')) n_list.push_back(std::stol(item));
            return cmd_curve(model_path, hyper_path, n_list, trials, out_path, seed,
                             sampler_config);
        }
        if (diagnose->parsed())
            return cmd_diagnose(model_path, node_1based, alpha, quad_nodes, kappa_example,
                                out_path);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::domain_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
