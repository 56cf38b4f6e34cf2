#include <catch2/catch_amalgamated.hpp>

#include "oracle_helpers.hpp"

using namespace mrfscreen;
using Catch::Approx;

namespace {

/// The two-node fixture: f ∝ exp(x1 x2) on [-1,1]^2, k = 1.
ModelSpec fixture_model() { return oracle::pair_model(0.0, 0.0, 1.0, 1.0, 0.1); }

}  // namespace

TEST_CASE("population GISO: normalization, unique minimizer, scaling") {
    const ModelSpec m = fixture_model();
    const Eigen::VectorXd vstar = assemble_vertex(m, 0);

    CHECK(population_giso(m, 0, Eigen::VectorXd::Zero(2)) == Approx(1.0).margin(1e-10));

    const double at_star = population_giso(m, 0, vstar);
    CHECK(population_giso(m, 0, 2.0 * vstar) > at_star);

    RngStream rng(3, 1);
    for (int t = 0; t < 30; ++t) {
        Eigen::VectorXd v = vstar;
        const double radius = 0.05 + 0.3 * rng.uniform01();
        const double angle = rng.uniform(0.0, 2.0 * M_PI);
        v[0] += radius * std::cos(angle);
        v[1] += radius * std::sin(angle);
        if (v.lpNorm<1>() > m.gamma()) continue;
        CHECK(population_giso(m, 0, v) > at_star);
    }

    // stationarity: quadrature gradient vanishes at the true parameter
    CHECK(population_giso_gradient(m, 0, vstar).lpNorm<Eigen::Infinity>() < 1e-8);

    CHECK_THROWS_AS(population_giso(oracle::random_chain_model(rng, 4, 1,
                                                               BasisKind::Polynomial, 1.0, 0.1,
                                                               0.3),
                                    0, Eigen::VectorXd::Zero(1 + 3), 16),
                    std::invalid_argument);
}

TEST_CASE("covariance bundle reproduces the closed forms of the two-node fixture") {
    const ModelSpec m = fixture_model();
    const CovarianceBundle bundle = covariance_bundle(m, 0, 160);
    REQUIRE(bundle.sandwich_ok);

    const double shi1 = oracle::shi(1.0);
    // B = diag(1/(3 Shi(1)), 1/(9 Shi(1)))
    CHECK(bundle.B(0, 0) == Approx(1.0 / (3.0 * shi1)).margin(1e-4));
    CHECK(bundle.B(1, 1) == Approx(1.0 / (9.0 * shi1)).margin(1e-4));
    CHECK(std::abs(bundle.B(0, 1)) < 1e-10);

    // A = diag(1/(e Shi(1)), (2 Shi(1) + 2/e - e)/Shi(1))
    CHECK(bundle.A(0, 0) == Approx(1.0 / (M_E * shi1)).epsilon(1e-6));
    CHECK(bundle.A(1, 1) ==
          Approx((2.0 * shi1 + 2.0 / M_E - M_E) / shi1).epsilon(1e-6));

    // sandwich and Fisher-inverse diagonals, from the same closed forms
    const double s11 = (1.0 / (M_E * shi1)) * 9.0 * shi1 * shi1;
    const double s22 = ((2.0 * shi1 + 2.0 / M_E - M_E) / shi1) * 81.0 * shi1 * shi1;
    CHECK(bundle.sandwich(0, 0) == Approx(s11).epsilon(1e-5));
    CHECK(bundle.sandwich(1, 1) == Approx(s22).epsilon(1e-5));
    CHECK(bundle.sandwich(0, 0) == Approx(3.50).epsilon(0.01));
    CHECK(bundle.sandwich(1, 1) == Approx(11.30).epsilon(0.01));

    const double j11 = 1.0 / (M_E * shi1);
    const double j22 = (2.0 * shi1 + 2.0 / M_E - M_E) / shi1 -
                       std::pow(std::sinh(1.0) / shi1 - 1.0, 2);
    CHECK(bundle.fisher(0, 0) == Approx(j11).epsilon(1e-6));
    CHECK(bundle.fisher(1, 1) == Approx(j22).epsilon(1e-6));
    const Eigen::MatrixXd jinv = bundle.fisher.inverse();
    CHECK(jinv(0, 0) == Approx(1.0 / j11).epsilon(1e-4));
    CHECK(jinv(1, 1) == Approx(1.0 / j22).epsilon(1e-4));

    // symmetry / psd of A and J; estimator is normal but not efficient
    CHECK((bundle.A - bundle.A.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((bundle.fisher - bundle.fisher.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(bundle.A).eigenvalues().minCoeff() >
          -1e-10);
    CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(bundle.fisher)
              .eigenvalues()
              .minCoeff() > -1e-10);
    for (int r = 0; r < 2; ++r)
        CHECK(std::abs(bundle.sandwich(r, r) - jinv(r, r)) > 0.05 * jinv(r, r));
}

TEST_CASE("kappa closed forms") {
    // S.1 at b=1, d=1, theta_max=0.1: (4/3) exp(-3.6)
    const double s1 = kappa_closed_form(KappaExample::LinearS1, 1.0, 1, 0.1);
    CHECK(s1 == Approx((4.0 / 3.0) * std::exp(-3.6)).epsilon(1e-12));
    CHECK(s1 == Approx(0.03644).epsilon(1e-3));

    // monotone decreasing in theta_max
    double prev = kappa_closed_form(KappaExample::LinearS1, 1.0, 1, 0.0);
    for (double t : {0.05, 0.1, 0.2, 0.4}) {
        const double next = kappa_closed_form(KappaExample::LinearS1, 1.0, 1, t);
        CHECK(next < prev);
        prev = next;
    }

    // S.2 at theta_max -> 0 collapses to (pi/2)^2
    CHECK(kappa_closed_form(KappaExample::HarmonicS2, 1.0, 1, 0.0) ==
          Approx(std::pow(M_PI / 2.0, 2)).epsilon(1e-12));

    CHECK(kappa_closed_form(KappaExample::PolyDeg2S3, 1.0, 1, 0.0) > 0.0);
    CHECK(kappa_closed_form(KappaExample::PolyProdS4, 1.0, 1, 0.0) > 0.0);
    CHECK_THROWS_AS(kappa_closed_form(KappaExample::LinearS1, -1.0, 1, 0.1),
                    std::invalid_argument);
    CHECK_THROWS_AS(kappa_example_from_string("S9"), std::invalid_argument);
}

TEST_CASE("condition-1 quadrature: conventions and independent oracle") {
    // S.1-scale model: b = 1, theta_max = 0.1
    const ModelSpec m = oracle::pair_model(0.05, -0.05, 0.1, 0.1, 0.02);

    CHECK(condition1_lhs_quadrature(m, 0, 1, Eigen::MatrixXd::Zero(1, 1)) == 0.0);

    // independent oracle for k = 1: LHS = Delta^2 E[x_i^2 exp(2 h(x_j | x_i))]
    auto oracle_lhs = [&](double delta) {
        std::vector<double> xs, ws;
        scaled_rule(-1.0, 1.0, 128, xs, ws);
        double num = 0.0, den = 0.0;
        for (int a = 0; a < 128; ++a) {
            Eigen::VectorXd x(2);
            x[0] = xs[a];
            x[1] = 0.0;
            // conditional density of x2 given x1 and its entropy
            const Eigen::VectorXd lam = conditional_canonical(m, 1, x);
            const double z = integrate(
                [&](double u) { return std::exp(lam[0] * u); }, -1.0, 1.0, 256);
            const double h = -integrate(
                [&](double u) {
                    const double q = std::exp(lam[0] * u) / z;
                    return q * std::log(q);
                },
                -1.0, 1.0, 256);
            // unnormalized marginal of x1
            const double marg = integrate(
                [&](double u) {
                    Eigen::VectorXd xx(2);
                    xx << xs[a], u;
                    return std::exp(log_density_unnormalized(m, xx));
                },
                -1.0, 1.0, 128);
            num += ws[a] * marg * std::exp(2.0 * (h + std::log(std::abs(delta * xs[a]))));
            den += ws[a] * marg;
        }
        return num / den;
    };

    RngStream rng(7, 0);
    const double kappa = kappa_closed_form(KappaExample::LinearS1, 1.0, 1, 0.1);
    for (int t = 0; t < 10; ++t) {
        const double delta = rng.uniform(-0.2, 0.2);
        if (std::abs(delta) < 1e-3) continue;
        const double lhs =
            condition1_lhs_quadrature(m, 0, 1, Eigen::MatrixXd::Constant(1, 1, delta));
        CHECK(lhs == Approx(oracle_lhs(delta)).epsilon(2e-3));
        CHECK(lhs >= kappa * delta * delta);
    }

    // scale-quadratic lower bound
    const double base = 0.15;
    for (double c : {0.5, 1.0, 2.0}) {
        const double lhs =
            condition1_lhs_quadrature(m, 0, 1, Eigen::MatrixXd::Constant(1, 1, c * base));
        CHECK(lhs >= kappa * c * c * base * base);
    }

    ModelSpec three = oracle::random_chain_model(rng, 3, 1, BasisKind::Polynomial, 1.0, 0.1, 0.3);
    CHECK_THROWS_AS(condition1_lhs_quadrature(three, 0, 1, Eigen::MatrixXd::Zero(1, 1)),
                    std::invalid_argument);
}

TEST_CASE("condition-1 quadrature: harmonic statistic through the branch-sum path") {
    // k = 2 harmonic edge statistics are non-monotone in x_j; exercise the
    // generic change-of-variables branch on a coarse grid
    ModelSpec m;
    m.p = 2;
    m.basis = BasisFamily(BasisKind::Harmonic, 2, 1.0);
    m.domain = Domain::symmetric(2, 1.0);
    m.node_params = {Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(2)};
    Eigen::MatrixXd blk(2, 2);
    blk << 0.1, 0.0, 0.0, 0.1;
    m.edges[{0, 1}] = blk;
    m.theta_max = 0.1;
    m.theta_min = 0.05;
    m.d = 1;
    m.validate();

    Eigen::MatrixXd delta(2, 2);
    delta << 0.1, 0.05, -0.05, 0.1;
    const double lhs = condition1_lhs_quadrature(m, 0, 1, delta, 64, 400);
    CHECK(std::isfinite(lhs));
    CHECK(lhs > 0.0);
    const double kappa = kappa_closed_form(KappaExample::HarmonicS2, 1.0, 1, 0.1);
    CHECK(lhs >= kappa * delta.squaredNorm());
}

TEST_CASE("sample-complexity constants") {
    ComplexityInputs in;
    in.k = 1;
    in.d = 1;
    in.theta_max = 0.1;
    in.b_u = 2.0;
    in.gamma = 0.2;
    in.varphi_max = 3.0;
    in.phi_max = 1.0;
    in.phibar_max = 1.0;
    in.kappa = kappa_closed_form(KappaExample::LinearS1, 1.0, 1, 0.1);
    in.qs = 0.25;

    const auto c = complexity_constants(in, 0.1);
    CHECK(c.c1 > 0.0);
    CHECK(std::isfinite(c.c1));
    CHECK(std::isfinite(c.log10_c2));
    CHECK(std::isfinite(c.c3));

    // homogeneity: c1(alpha/2) / c1(alpha) = 16 exactly
    const auto half = complexity_constants(in, 0.05);
    CHECK(half.c1 / c.c1 == Approx(16.0).epsilon(1e-10));
    CHECK(half.c3 / c.c3 == Approx(256.0).epsilon(1e-10));

    // dual evaluation of the printed c1 formula, straight arithmetic
    const double direct =
        16.0 * M_PI * M_PI * M_E * M_E * std::pow(in.d + 1.0, 2) * in.gamma * in.gamma *
        in.varphi_max * in.varphi_max * std::pow(1.0 + in.gamma * in.varphi_max, 2) *
        std::exp(4.0 * in.gamma * in.varphi_max) / (in.kappa * in.kappa * std::pow(0.1, 4));
    CHECK(c.c1 == Approx(direct).epsilon(1e-10));

    // c3 / c1^2 cancels the exponential and kappa factors
    RngStream rng(11, 2);
    for (int t = 0; t < 20; ++t) {
        ComplexityInputs r = in;
        r.gamma = rng.uniform(0.1, 0.5);
        r.varphi_max = rng.uniform(1.0, 3.0);
        r.kappa = rng.uniform(0.01, 0.5);
        r.d = 1 + static_cast<int>(rng.next_below(3));
        r.k = 1 + static_cast<int>(rng.next_below(2));
        const double alpha = rng.uniform(0.05, 0.9);
        const auto v = complexity_constants(r, alpha);
        const double expected =
            r.k * r.k * std::pow(double(r.d), 4) * std::pow(r.gamma * r.varphi_max, 4) /
            (256.0 * std::pow(M_PI, 4) * std::pow(M_E, 4) * std::pow(r.d + 1.0, 4) *
             std::pow(1.0 + r.gamma * r.varphi_max, 4));
        CHECK(v.c3 / (v.c1 * v.c1) == Approx(expected).epsilon(1e-8));
    }

    ComplexityInputs bad = in;
    bad.kappa = 0.0;
    CHECK_THROWS_AS(complexity_constants(bad, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(complexity_constants(in, 1.5), std::invalid_argument);
}

TEST_CASE("normality study smoke test") {
    const ModelSpec m = fixture_model();
    const NormalityStudy study = normality_study(m, 1500, 120, 99);
    REQUIRE(study.scaled_errors.rows() == 120);
    for (int l = 0; l < 2; ++l) {
        const double se = std::sqrt(study.emp_cov(l, l) / 120.0);
        CHECK(std::abs(study.emp_mean[l]) < 4.0 * se);
        CHECK(study.emp_cov(l, l) ==
              Approx(study.sandwich(l, l)).epsilon(0.5));  // loose smoke bound
    }
}
