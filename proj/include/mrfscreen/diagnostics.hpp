#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include "mrfscreen/grise.hpp"
#include "mrfscreen/model.hpp"
#include "mrfscreen/node_recovery.hpp"
#include "mrfscreen/quadrature.hpp"
#include "mrfscreen/sampler.hpp"
#include "mrfscreen/threads.hpp"

namespace mrfscreen {

namespace detail {

/// Sweeps the tensor-product Gauss-Legendre grid over the full domain and
/// calls visit(x, w * exp(E(x) - shift)); returns the accumulated mass.
/// Restricted to p <= 3, where tensor quadrature stays exact and cheap.
inline double sweep_joint_density(const ModelSpec& model, int nodes,
                                  const std::function<void(const Eigen::VectorXd&, double)>& visit) {
    if (model.p > 3) throw std::invalid_argument("population quadrature supports p <= 3 only");
    std::vector<std::vector<double>> xs(model.p), ws(model.p);
    for (int i = 0; i < model.p; ++i)
        scaled_rule(model.domain.lo[i], model.domain.hi[i], nodes, xs[i], ws[i]);
    Eigen::VectorXd x(model.p);
    for (int i = 0; i < model.p; ++i) x[i] = 0.5 * (model.domain.lo[i] + model.domain.hi[i]);
    const double shift = log_density_unnormalized(model, x);

    double mass = 0.0;
    std::vector<int> idx(model.p, 0);
    for (;;) {
        double w = 1.0;
        for (int i = 0; i < model.p; ++i) {
            x[i] = xs[i][idx[i]];
            w *= ws[i][idx[i]];
        }
        const double dens = w * std::exp(log_density_unnormalized(model, x) - shift);
        mass += dens;
        visit(x, dens);
        int i = 0;
        for (; i < model.p; ++i) {
            if (++idx[i] < nodes) break;
            idx[i] = 0;
        }
        if (i == model.p) break;
    }
    return mass;
}

}  // namespace detail

/// E[exp(-v . phi^(i)(x))] under the model, by tensor quadrature.
inline double population_giso(const ModelSpec& model, int i, const Eigen::VectorXd& v,
                              int quadrature_nodes = 64) {
    VertexLayout layout(model.p, model.k(), i);
    if (v.size() != layout.dim()) throw std::invalid_argument("v dimension mismatch");
    double acc = 0.0;
    Eigen::VectorXd phi(layout.dim());
    const double mass = detail::sweep_joint_density(model, quadrature_nodes,
                                                    [&](const Eigen::VectorXd& x, double w) {
        feature_vector_into(model.basis, model.domain, i, x, phi.data());
        acc += w * std::exp(-v.dot(phi));
    });
    return acc / mass;
}

/// Gradient of the population GISO at v, by tensor quadrature.
inline Eigen::VectorXd population_giso_gradient(const ModelSpec& model, int i,
                                                const Eigen::VectorXd& v,
                                                int quadrature_nodes = 64) {
    VertexLayout layout(model.p, model.k(), i);
    if (v.size() != layout.dim()) throw std::invalid_argument("v dimension mismatch");
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(layout.dim());
    Eigen::VectorXd phi(layout.dim());
    const double mass = detail::sweep_joint_density(model, quadrature_nodes,
                                                    [&](const Eigen::VectorXd& x, double w) {
        feature_vector_into(model.basis, model.domain, i, x, phi.data());
        acc -= w * std::exp(-v.dot(phi)) * phi;
    });
    return acc / mass;
}

/// Population covariance structure of node i's estimator:
///   A        covariance of phi^(i) exp(-theta* . phi^(i))
///   B        cross-covariance of phi^(i) and phi^(i) exp(-theta* . phi^(i))
///   fisher   covariance of phi^(i)
///   sandwich B^{-1} A B^{-1}, when B is invertible (cond < 1e12)
struct CovarianceBundle {
    Eigen::MatrixXd A, B, fisher, sandwich;
    bool sandwich_ok = false;
    double b_condition = 0.0;
};

inline CovarianceBundle covariance_bundle(const ModelSpec& model, int i,
                                          int quadrature_nodes = 128) {
    VertexLayout layout(model.p, model.k(), i);
    const int K = layout.dim();
    const Eigen::VectorXd vstar = assemble_vertex(model, i);
    Eigen::VectorXd phi(K), g(K);
    Eigen::VectorXd m_phi = Eigen::VectorXd::Zero(K), m_g = Eigen::VectorXd::Zero(K);
    Eigen::MatrixXd m_pp = Eigen::MatrixXd::Zero(K, K), m_pg = Eigen::MatrixXd::Zero(K, K),
                    m_gg = Eigen::MatrixXd::Zero(K, K);
    const double mass = detail::sweep_joint_density(model, quadrature_nodes,
                                                    [&](const Eigen::VectorXd& x, double w) {
        feature_vector_into(model.basis, model.domain, i, x, phi.data());
        g = phi * std::exp(-vstar.dot(phi));
        m_phi += w * phi;
        m_g += w * g;
        m_pp.noalias() += w * phi * phi.transpose();
        m_pg.noalias() += w * phi * g.transpose();
        m_gg.noalias() += w * g * g.transpose();
    });
    m_phi /= mass;
    m_g /= mass;
    m_pp /= mass;
    m_pg /= mass;
    m_gg /= mass;

    CovarianceBundle out;
    out.fisher = m_pp - m_phi * m_phi.transpose();
    out.B = m_pg - m_phi * m_g.transpose();
    out.A = m_gg - m_g * m_g.transpose();
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(out.B);
    const double smin = svd.singularValues().minCoeff();
    const double smax = svd.singularValues().maxCoeff();
    out.b_condition = smin > 0 ? smax / smin : std::numeric_limits<double>::infinity();
    if (out.b_condition < 1e12) {
        const Eigen::MatrixXd binv = out.B.inverse();
        out.sandwich = binv * out.A * binv;
        out.sandwich_ok = true;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Condition-1 verification (p = 2)
// ---------------------------------------------------------------------------

/// E[exp{2 h((delta . psi^(i)(x_i, x_j)) | x_{-j})}] by nested quadrature.
/// The inner differential entropy uses change of variables on a grid of the
/// transformed conditional; accuracy is ~1e-3 relative on smooth inputs.
/// delta_block is k x k in (r, s) order with r indexing node i.
inline double condition1_lhs_quadrature(const ModelSpec& model, int i, int j,
                                        const Eigen::MatrixXd& delta_block,
                                        int outer_nodes = 256, int entropy_grid = 2048) {
    if (model.p != 2) throw std::invalid_argument("condition-1 quadrature supports p = 2 only");
    if (i == j || i < 0 || j < 0 || i > 1 || j > 1)
        throw std::invalid_argument("need distinct nodes i, j in {1, 2}");
    const int k = model.k();
    if (delta_block.rows() != k || delta_block.cols() != k)
        throw std::invalid_argument("delta block must be k x k");
    if (delta_block.cwiseAbs().maxCoeff() == 0.0) return 0.0;

    const double loi = model.domain.lo[i], hii = model.domain.hi[i];
    const double loj = model.domain.lo[j], hij = model.domain.hi[j];
    const Eigen::VectorXd center = model.basis.center_average(loi, hii);

    // grid over x_j for the inner entropy
    const int N = entropy_grid;
    const double dxj = (hij - loj) / N;
    std::vector<double> xj(N + 1), fj(N + 1), gval(N + 1), gder(N + 1), q(N + 1);
    for (int m = 0; m <= N; ++m) xj[m] = loj + m * dxj;

    Eigen::VectorXd fi(k), fderiv(k), coeff(k), lambda_j(k);
    Eigen::VectorXd x(2);

    // outer rule over x_i against its (unnormalized) marginal
    std::vector<double> xs, ws;
    scaled_rule(loi, hii, outer_nodes, xs, ws);

    double lhs_acc = 0.0, mass_acc = 0.0;
    for (int a = 0; a < outer_nodes; ++a) {
        const double xi_val = xs[a];
        x[i] = xi_val;
        x[j] = 0.5 * (loj + hij);
        lambda_j = conditional_canonical(model, j, x);

        // conditional density of x_j given x_i, and its normalization
        double shift;
        {
            Eigen::VectorXd f0(k);
            model.basis.eval(x[j], f0.data());
            shift = lambda_j.dot(f0);
        }
        double zc = 0.0;
        for (int m = 0; m <= N; ++m) {
            model.basis.eval(xj[m], fi.data());
            fj[m] = std::exp(lambda_j.dot(fi) - shift);
            zc += (m == 0 || m == N ? 0.5 : 1.0) * fj[m] * dxj;
        }
        for (int m = 0; m <= N; ++m) q[m] = fj[m] / zc;

        // transformed statistic Y(x_j) = sum_s coeff_s phi_s(x_j)
        model.basis.eval(xi_val, fi.data());
        coeff = delta_block.transpose() * (fi - center);
        for (int m = 0; m <= N; ++m) {
            model.basis.eval(xj[m], fi.data());
            gval[m] = coeff.dot(fi);
            model.basis.eval_deriv(xj[m], fderiv.data());
            gder[m] = coeff.dot(fderiv);
        }

        bool monotone = true;
        for (int m = 0; m <= N && monotone; ++m)
            if (gder[m] == 0.0 || (gder[m] > 0) != (gder[0] > 0)) monotone = false;

        double h = 0.0;
        if (monotone) {
            // h(Y) = h(X) + E log|g'(X)|
            for (int m = 0; m <= N; ++m) {
                const double w = (m == 0 || m == N ? 0.5 : 1.0) * dxj;
                if (q[m] > 0) h += w * q[m] * (std::log(std::abs(gder[m])) - std::log(q[m]));
            }
        } else {
            // density of Y at y = g(x): sum over monotone branches of q/|g'|;
            // a level crossing at a segment's left endpoint belongs to that
            // segment, so each branch is counted once
            for (int m = 0; m <= N; ++m) {
                const double y = gval[m];
                double fy = 0.0;
                for (int s = 0; s < N; ++s) {
                    const double d0 = gval[s] - y, d1 = gval[s + 1] - y;
                    if (d0 == 0.0 || (d0 < 0 && d1 > 0) || (d0 > 0 && d1 < 0)) {
                        const double frac = (d0 == d1) ? 0.0 : d0 / (d0 - d1);
                        const double qq = q[s] + frac * (q[s + 1] - q[s]);
                        const double gg = gder[s] + frac * (gder[s + 1] - gder[s]);
                        fy += qq / std::max(std::abs(gg), 1e-12);
                    }
                }
                const double w = (m == 0 || m == N ? 0.5 : 1.0) * dxj;
                if (q[m] > 0 && fy > 0) h += -w * q[m] * std::log(fy);
            }
        }

        // unnormalized marginal weight of x_i
        double marg = 0.0;
        for (int m = 0; m <= N; ++m) {
            x[j] = xj[m];
            x[i] = xi_val;
            marg += (m == 0 || m == N ? 0.5 : 1.0) * dxj *
                    std::exp(log_density_unnormalized(model, x));
        }
        lhs_acc += ws[a] * marg * std::exp(2.0 * h);
        mass_acc += ws[a] * marg;
    }
    return lhs_acc / mass_acc;
}

// ---------------------------------------------------------------------------
// Closed-form kappa values for the standard example families
// ---------------------------------------------------------------------------

enum class KappaExample { LinearS1, HarmonicS2, PolyDeg2S3, PolyProdS4 };

inline double kappa_closed_form(KappaExample example, double b, int d, double theta_max) {
    if (!(b > 0) || d < 1) throw std::invalid_argument("need b > 0 and d >= 1");
    switch (example) {
        case KappaExample::LinearS1:
            return (4.0 * std::pow(b, 4) / 3.0) *
                   std::exp(-6.0 * theta_max * (d + 1) * (1.0 + 2.0 * b) *
                            std::max(b, b * b));
        case KappaExample::HarmonicS2: {
            const double e = std::exp(2.0 * theta_max * (4.0 * d + 2.0) * (1.0 + 2.0 * b));
            return std::pow(M_PI / (2.0 * e), 2.0 * e);
        }
        case KappaExample::PolyDeg2S3:
            return (16.0 * std::pow(b, 4) * std::min(45.0 / 12.0, b * b) / 45.0) *
                   std::exp(-6.0 * theta_max * (4.0 * d + 2.0) * (1.0 + 2.0 * b) *
                            std::max(b, std::pow(b, 4)));
        case KappaExample::PolyProdS4: {
            const double e = std::exp(2.0 * theta_max * (4.0 * d + 2.0) * (1.0 + 2.0 * b) *
                                      std::max(b, std::pow(b, 4)));
            const double base = b * (1.0 + 2.0 * b) / (M_E * e);
            const double expo = (1.0 + 2.0 * b) / b * e + 1.0;
            return M_E * (15.0 * b + 4.0 * std::pow(b, 3)) / (45.0 * (1.0 + 2.0 * b)) *
                   std::pow(base, expo);
        }
    }
    throw std::invalid_argument("unknown kappa example");
}

inline KappaExample kappa_example_from_string(const std::string& s) {
    if (s == "S1") return KappaExample::LinearS1;
    if (s == "S2") return KappaExample::HarmonicS2;
    if (s == "S3") return KappaExample::PolyDeg2S3;
    if (s == "S4") return KappaExample::PolyProdS4;
    throw std::invalid_argument("unknown kappa example id: " + s);
}

// ---------------------------------------------------------------------------
// Sample-complexity constants
// ---------------------------------------------------------------------------

struct ComplexityInputs {
    int k = 1, d = 1;
    double theta_max = 1.0, b_u = 2.0;
    double gamma = 1.0, varphi_max = 1.0;  // centered-feature bound
    double phi_max = 1.0, phibar_max = 1.0;
    double kappa = 1.0, qs = 1.0;

    static ComplexityInputs from_model(const ModelSpec& model, double kappa, double qs) {
        ComplexityInputs in;
        in.k = model.k();
        in.d = model.d;
        in.theta_max = model.theta_max;
        in.b_u = model.domain.b_u;
        in.gamma = model.gamma();
        in.varphi_max = model.varphi_max();
        in.phi_max = model.phi_max();
        in.phibar_max = model.phibar_max();
        in.kappa = kappa;
        in.qs = qs;
        return in;
    }
};

struct SampleComplexityConstants {
    double gamma = 0.0, varphi_max = 0.0, kappa = 0.0, q_s = 0.0;
    double c1 = 0.0, c2 = 0.0, c3 = 0.0;             // may overflow to inf
    double log10_c1 = 0.0, log10_c2 = 0.0, log10_c3 = 0.0;
};

/// Evaluates c1, c2, c3 exactly as printed; computed in log space so the
/// (astronomical) magnitudes stay reportable.
inline SampleComplexityConstants complexity_constants(const ComplexityInputs& in, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must be in (0,1)");
    if (!(in.kappa > 0.0)) throw std::invalid_argument("kappa must be positive");
    if (!(in.qs > 0.0)) throw std::invalid_argument("q^s must be positive");
    const double g = in.gamma, vp = in.varphi_max;
    const double d = in.d;

    const double log_c1 = std::log(16.0) + 2.0 * std::log(M_PI) + 2.0 +
                          2.0 * std::log(d + 1.0) + 2.0 * std::log(g) + 2.0 * std::log(vp) +
                          2.0 * std::log1p(g * vp) + 4.0 * g * vp - 2.0 * std::log(in.kappa) -
                          4.0 * std::log(alpha);
    const double log_c2 = (37.0 * d + 73.0) * std::log(2.0) + 2.0 * d * std::log(in.b_u) +
                          (12.0 * d + 16.0) * std::log(double(in.k)) +
                          (6.0 * d + 9.0) * std::log(d) +
                          (6.0 * d + 8.0) * std::log(in.theta_max) +
                          (8.0 * d + 12.0) * std::log(in.phi_max) +
                          2.0 * d * std::log(in.phibar_max) -
                          (8.0 * d + 16.0) * std::log(alpha) -
                          (4.0 * d + 8.0) * std::log(in.qs);
    const double log_c3 = 2.0 * std::log(double(in.k)) + 4.0 * std::log(d) +
                          8.0 * std::log(g) + 8.0 * std::log(vp) + 8.0 * g * vp -
                          4.0 * std::log(in.kappa) - 8.0 * std::log(alpha);

    SampleComplexityConstants out;
    out.gamma = g;
    out.varphi_max = vp;
    out.kappa = in.kappa;
    out.q_s = in.qs;
    out.c1 = std::exp(log_c1);
    out.c2 = std::exp(log_c2);
    out.c3 = std::exp(log_c3);
    const double l10 = std::log(10.0);
    out.log10_c1 = log_c1 / l10;
    out.log10_c2 = log_c2 / l10;
    out.log10_c3 = log_c3 / l10;
    return out;
}

// ---------------------------------------------------------------------------
// Normality study (p = 2)
// ---------------------------------------------------------------------------

struct NormalityStudy {
    Eigen::MatrixXd scaled_errors;  // reps x dim, rows sqrt(n) (theta_hat - theta*)
    Eigen::VectorXd emp_mean;
    Eigen::MatrixXd emp_cov;
    Eigen::MatrixXd sandwich;
};

/// Repeatedly draws n i.i.d. samples from the p=2 model, solves GRISE for
/// node 1, and collects sqrt(n) (theta_hat - theta*). Replications run
/// concurrently with per-replication RNG streams.
inline NormalityStudy normality_study(const ModelSpec& model, long n, int replications,
                                      std::uint64_t seed, int node = 0,
                                      int quadrature_nodes = 128) {
    if (model.p != 2) throw std::invalid_argument("normality study supports p = 2 only");
    const PairSampler sampler(model);
    const Eigen::VectorXd vstar = assemble_vertex(model, node);
    const int K = static_cast<int>(vstar.size());

    NormalityStudy out;
    out.scaled_errors.resize(replications, K);
    parallel_for(replications, [&](long rep) {
        RngStream rng(seed, 0x7265700ULL + static_cast<std::uint64_t>(rep));
        RowMatrix samples(n, 2);
        for (long t = 0; t < n; ++t) samples.row(t) = sampler.draw(rng).transpose();
        const NodeFeatures features = build_node_features(samples, model.basis, model.domain, node);
        GriseConfig config;
        config.gamma = model.gamma();
        config.varphi_max = model.varphi_max();
        config.epsilon = 1e-9;
        config.max_iters = 50;
        config.polish = true;
        const GriseSolution sol = solve_node(features, config);
        out.scaled_errors.row(rep) = std::sqrt(double(n)) * (sol.vertex - vstar).transpose();
    });
    out.emp_mean = out.scaled_errors.colwise().mean();
    Eigen::MatrixXd centered = out.scaled_errors.rowwise() - out.emp_mean.transpose();
    out.emp_cov = centered.transpose() * centered / double(replications - 1);
    out.sandwich = covariance_bundle(model, node, quadrature_nodes).sandwich;
    return out;
}

}  // namespace mrfscreen
