#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "oracle_helpers.hpp"

using namespace mrfscreen;
using Catch::Approx;

namespace {

const std::string kWork = "/tmp/mrfscreen_cli_tests";

int run_cli(const std::string& args, const std::string& out_file = "") {
    std::string cmd = std::string(MRFSCREEN_CLI_PATH) + " " + args;
    if (!out_file.empty()) cmd += " > " + out_file + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

double grep_value(const std::string& text, const std::string& key) {
    const auto pos = text.find(key + "=");
    REQUIRE(pos != std::string::npos);
    return std::strtod(text.c_str() + pos + key.size() + 1, nullptr);
}

ModelSpec demo_model() {
    ModelSpec m = oracle::pair_model(0.3, -0.25, 0.7, 1.0, 0.2);
    m.node_params[0][0] = 1.0 / 3.0;  // exercise non-terminating decimals
    return m;
}

}  // namespace

TEST_CASE("model json round-trips bit-exactly") {
    REQUIRE(std::system(("mkdir -p " + kWork).c_str()) == 0);
    RngStream rng(3, 3);
    ModelSpec m = oracle::random_chain_model(rng, 4, 2, BasisKind::Harmonic, 1.3, 0.1, 0.4);
    m.node_params[2][1] = 0.1 + 1e-17;
    const std::string path = kWork + "/model_roundtrip.json";
    write_model_file(m, path);
    const ModelSpec back = read_model_file(path);
    CHECK(back.p == m.p);
    CHECK(back.basis.kind == m.basis.kind);
    CHECK(back.basis.b == m.basis.b);
    CHECK(back.d == m.d);
    CHECK(back.theta_max == m.theta_max);
    for (int i = 0; i < m.p; ++i)
        CHECK((back.node_params[i] - m.node_params[i]).cwiseAbs().maxCoeff() == 0.0);
    for (const auto& [key, blk] : m.edges)
        CHECK((back.edges.at(key) - blk).cwiseAbs().maxCoeff() == 0.0);

    // a second write of the re-read model is byte-identical
    const std::string path2 = kWork + "/model_roundtrip2.json";
    write_model_file(back, path2);
    CHECK(slurp(path) == slurp(path2));
}

TEST_CASE("samples csv round-trips bit-exactly") {
    REQUIRE(std::system(("mkdir -p " + kWork).c_str()) == 0);
    RngStream rng(5, 5);
    RowMatrix s(37, 3);
    for (long t = 0; t < s.rows(); ++t)
        for (int j = 0; j < 3; ++j) s(t, j) = rng.uniform(-1.0, 1.0);
    const std::string path = kWork + "/samples_roundtrip.csv";
    write_samples_csv(s, path);
    const RowMatrix back = read_samples_csv(path);
    REQUIRE(back.rows() == s.rows());
    CHECK((back - s).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("run report round-trips and validates") {
    REQUIRE(std::system(("mkdir -p " + kWork).c_str()) == 0);
    RunReport r;
    r.seed = 42;
    r.n = 100;
    r.p = 2;
    r.k = 1;
    NodeTelemetry node;
    node.objective = 0.93;
    node.iterations = 17;
    node.best_iterate = 12;
    node.vertex = {0.25, -0.5};
    r.nodes = {node, node};
    r.edges = {{0, 1}};
    r.node_params = {{0.3}, {-0.2}};
    r.timings_seconds["fit_nodes"] = 0.01;
    r.model_ref_path = "model.json";
    r.model_ref_hash = "abc123";
    const std::string path = kWork + "/report_roundtrip.json";
    write_report_file(r, path);
    const RunReport back = read_report_file(path);
    CHECK(back.seed == 42);
    CHECK(back.nodes[0].vertex == node.vertex);
    CHECK(back.edges == r.edges);
    CHECK(*back.node_params == *r.node_params);
    CHECK(*back.model_ref_hash == "abc123");

    // non-finite fields are rejected
    RunReport bad = r;
    bad.nodes[0].objective = std::nan("");
    CHECK_THROWS_AS(write_report_file(bad, kWork + "/never.json"), std::runtime_error);

    // unknown major schema versions are rejected
    nlohmann::json j = report_to_json(r);
    j["schema_version"] = "2.0";
    CHECK_THROWS_AS(report_from_json(j), std::runtime_error);
}

TEST_CASE("cli gen: determinism, empty runs, bad files") {
    REQUIRE(std::system(("mkdir -p " + kWork).c_str()) == 0);
    write_model_file(demo_model(), kWork + "/model.json");

    REQUIRE(run_cli("gen --model " + kWork + "/model.json --n 200 --seed 9 --out " + kWork +
                    "/a.csv --burn-in 50 --thin 1") == 0);
    REQUIRE(run_cli("gen --model " + kWork + "/model.json --n 200 --seed 9 --out " + kWork +
                    "/b.csv --burn-in 50 --thin 1") == 0);
    CHECK(slurp(kWork + "/a.csv") == slurp(kWork + "/b.csv"));

    REQUIRE(run_cli("gen --model " + kWork + "/model.json --n 0 --seed 9 --out " + kWork +
                    "/empty.csv") == 0);
    CHECK(slurp(kWork + "/empty.csv") == "x1,x2\r\n");

    CHECK(run_cli("gen --model " + kWork + "/missing.json --n 10 --out " + kWork + "/x.csv",
                  kWork + "/gen_err.txt") != 0);
}

TEST_CASE("cli fit/eval flow with model binding") {
    REQUIRE(std::system(("mkdir -p " + kWork).c_str()) == 0);
    const ModelSpec truth = demo_model();
    write_model_file(truth, kWork + "/model.json");
    REQUIRE(run_cli("gen --model " + kWork + "/model.json --n 4000 --seed 11 --out " + kWork +
                    "/train.csv --burn-in 200 --thin 2") == 0);

    nlohmann::json hyper;
    hyper["basis"] = {{"kind", "polynomial"}, {"k", 1}};
    hyper["domain"] = {{"l", {-1.0, -1.0}}, {"u", {1.0, 1.0}}};
    hyper["theta_max"] = 1.0;
    hyper["theta_min"] = 0.2;
    hyper["d"] = 1;
    hyper["grise"] = {{"max_iters", 400}};
    hyper["node_recovery"] = {{"average_over_z", 4}};
    hyper["model_ref"] = kWork + "/model.json";
    {
        std::ofstream out(kWork + "/hyper.json");
        out << hyper.dump(2);
    }

    REQUIRE(run_cli("fit --samples " + kWork + "/train.csv --config " + kWork +
                    "/hyper.json --seed 13 --out " + kWork + "/report.json") == 0);
    const RunReport report = read_report_file(kWork + "/report.json");
    CHECK(report.p == 2);
    CHECK(report.edges == std::vector<std::pair<int, int>>{{0, 1}});
    REQUIRE(report.node_params.has_value());

    const int code =
        run_cli("eval --report " + kWork + "/report.json --truth " + kWork + "/model.json",
                kWork + "/eval.txt");
    CHECK(code == 0);
    const std::string eval_out = slurp(kWork + "/eval.txt");
    CHECK(grep_value(eval_out, "linf_error") < 0.3);
    CHECK(grep_value(eval_out, "precision") == 1.0);
    CHECK(grep_value(eval_out, "recall") == 1.0);

    // permuted truth file: content hash no longer matches the report
    ModelSpec permuted = truth;
    std::swap(permuted.node_params[0], permuted.node_params[1]);
    write_model_file(permuted, kWork + "/model_permuted.json");
    CHECK(run_cli("eval --report " + kWork + "/report.json --truth " + kWork +
                  "/model_permuted.json", kWork + "/eval_perm.txt") == 2);
    CHECK(slurp(kWork + "/eval_perm.txt").find("hash") != std::string::npos);

    // --edges-only omits node parameters
    REQUIRE(run_cli("fit --samples " + kWork + "/train.csv --config " + kWork +
                    "/hyper.json --seed 13 --edges-only --out " + kWork +
                    "/report_edges.json") == 0);
    CHECK_FALSE(read_report_file(kWork + "/report_edges.json").node_params.has_value());
}

TEST_CASE("eval: report assembled from the truth itself scores perfectly") {
    REQUIRE(std::system(("mkdir -p " + kWork).c_str()) == 0);
    RngStream rng(7, 7);
    const ModelSpec truth =
        oracle::random_chain_model(rng, 3, 1, BasisKind::Polynomial, 1.0, 0.2, 0.5);
    write_model_file(truth, kWork + "/truth3.json");

    RunReport report;
    report.n = 1;
    report.p = truth.p;
    report.k = truth.k();
    for (int i = 0; i < truth.p; ++i) {
        NodeTelemetry node;
        const Eigen::VectorXd v = assemble_vertex(truth, i);
        node.vertex.assign(v.data(), v.data() + v.size());
        node.objective = 1.0;
        report.nodes.push_back(std::move(node));
    }
    std::vector<std::vector<double>> node_params;
    for (int i = 0; i < truth.p; ++i)
        node_params.emplace_back(truth.node_params[i].data(),
                                 truth.node_params[i].data() + truth.k());
    report.node_params = node_params;
    for (const auto& [key, blk] : truth.edges) {
        (void)blk;
        report.edges.push_back(key);
    }
    write_report_file(report, kWork + "/report_truth.json");

    const int code = run_cli("eval --report " + kWork + "/report_truth.json --truth " + kWork +
                             "/truth3.json", kWork + "/eval_truth.txt");
    REQUIRE(code == 0);
    const std::string out = slurp(kWork + "/eval_truth.txt");
    CHECK(grep_value(out, "linf_error") == 0.0);
    CHECK(out.find("exact=true") != std::string::npos);

    // hand-computed fixture: perturb one edge entry by 0.07, one node by -0.04
    RunReport bent = report;
    VertexLayout layout(truth.p, truth.k(), 0);
    bent.nodes[0].vertex[layout.edge_offset(1)] += 0.07;
    (*bent.node_params)[1][0] -= 0.04;
    write_report_file(bent, kWork + "/report_bent.json");
    REQUIRE(run_cli("eval --report " + kWork + "/report_bent.json --truth " + kWork +
                    "/truth3.json", kWork + "/eval_bent.txt") == 0);
    CHECK(grep_value(slurp(kWork + "/eval_bent.txt"), "linf_error") == Approx(0.07).margin(1e-12));

    // p mismatch is an error
    write_model_file(demo_model(), kWork + "/truth2.json");
    CHECK(run_cli("eval --report " + kWork + "/report_truth.json --truth " + kWork +
                  "/truth2.json", kWork + "/eval_mismatch.txt") == 2);
}

TEST_CASE("cli curve writes one row per (n, trial)") {
    REQUIRE(std::system(("mkdir -p " + kWork).c_str()) == 0);
    write_model_file(demo_model(), kWork + "/model.json");
    nlohmann::json hyper;
    hyper["basis"] = {{"kind", "polynomial"}, {"k", 1}};
    hyper["domain"] = {{"l", {-1.0, -1.0}}, {"u", {1.0, 1.0}}};
    hyper["theta_max"] = 1.0;
    hyper["theta_min"] = 0.2;
    hyper["d"] = 1;
    hyper["grise"] = {{"max_iters", 300}};
    {
        std::ofstream out(kWork + "/hyper_curve.json");
        out << hyper.dump(2);
    }
    REQUIRE(run_cli("curve --model " + kWork + "/model.json --config " + kWork +
                    "/hyper_curve.json --n-list 300,900 --trials 2 --seed 3 --burn-in 100 "
                    "--thin 1 --out " + kWork + "/curve.csv",
                    kWork + "/curve.txt") == 0);
    std::ifstream in(kWork + "/curve.csv");
    std::string line;
    long rows = 0;
    std::getline(in, line);
    CHECK(line.find("n,trial,exact_recovery,linf_error,seconds") == 0);
    while (std::getline(in, line))
        if (!line.empty() && line != "\r") ++rows;
    CHECK(rows == 4);

    CHECK(run_cli("curve --model " + kWork + "/model.json --config " + kWork +
                  "/hyper_curve.json --n-list 900,300 --trials 1 --out " + kWork + "/bad.csv",
                  kWork + "/curve_bad.txt") == 2);
}

TEST_CASE("cli diagnose prints the fixture oracle and rejects bad usage") {
    REQUIRE(std::system(("mkdir -p " + kWork).c_str()) == 0);
    write_model_file(oracle::pair_model(0.0, 0.0, 1.0, 1.0, 0.1), kWork + "/fixture.json");
    REQUIRE(run_cli("diagnose --model " + kWork + "/fixture.json --quad-nodes 128 --out " +
                    kWork + "/diag.json", kWork + "/diag.txt") == 0);
    const std::string out = slurp(kWork + "/diag.txt");
    const double s11 = grep_value(out, "sandwich_diag");
    CHECK(s11 == Approx(3.50).epsilon(0.01));
    CHECK(out.find("kappa[S1]") != std::string::npos);
    CHECK(grep_value(out, "stationarity_residual") < 1e-8);

    const nlohmann::json diag = nlohmann::json::parse(slurp(kWork + "/diag.json"));
    CHECK(diag.at("sandwich").at(1).at(1).get<double>() == Approx(11.30).epsilon(0.01));
    CHECK(diag.at("q_s_estimate").get<double>() > 0.0);

    // unknown flag: usage text, exit 2
    CHECK(run_cli("diagnose --model " + kWork + "/fixture.json --definitely-not-a-flag",
                  kWork + "/diag_bad.txt") == 2);

    // p too large for population oracles
    RngStream rng(9, 9);
    write_model_file(oracle::random_chain_model(rng, 4, 1, BasisKind::Polynomial, 1.0, 0.2, 0.5),
                     kWork + "/big.json");
    CHECK(run_cli("diagnose --model " + kWork + "/big.json", kWork + "/diag_big.txt") == 2);
}
