#pragma once

// Shared test oracles, independent of the library implementation paths they
// check: naive evaluators, finite differences, series, simple statistics.

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Core>

#include "mrfscreen/mrfscreen.hpp"

namespace oracle {

/// Shi(x) = ∫_0^x sinh(t)/t dt by series; converges fast for |x| <= 2.
inline double shi(double x) {
    double term = x, sum = x;
    for (int n = 1; n < 40; ++n) {
        term *= x * x / ((2.0 * n) * (2.0 * n + 1.0));
        sum += term / (2.0 * n + 1.0);
    }
    return sum;
}

/// Naive term-by-term evaluation of the pairwise log density.
inline double naive_log_density(const mrfscreen::ModelSpec& model, const Eigen::VectorXd& x) {
    double e = 0.0;
    for (int i = 0; i < model.p; ++i) {
        const Eigen::VectorXd f = model.basis.eval(x[i]);
        for (int r = 0; r < model.k(); ++r) e += model.node_params[i][r] * f[r];
    }
    for (const auto& [key, blk] : model.edges) {
        const Eigen::VectorXd fi = model.basis.eval(x[key.first]);
        const Eigen::VectorXd fj = model.basis.eval(x[key.second]);
        for (int r = 0; r < model.k(); ++r)
            for (int s = 0; s < model.k(); ++s) e += blk(r, s) * fi[r] * fj[s];
    }
    return e;
}

/// Brute-force GISO: per-sample loop, no vectorization, recomputed features.
inline double naive_giso(const mrfscreen::RowMatrix& samples, const mrfscreen::BasisFamily& basis,
                         const mrfscreen::Domain& domain, int node, const Eigen::VectorXd& v) {
    double acc = 0.0;
    for (long t = 0; t < samples.rows(); ++t) {
        const Eigen::VectorXd phi =
            mrfscreen::feature_vector(basis, domain, node, samples.row(t).transpose());
        acc += std::exp(-v.dot(phi));
    }
    return acc / double(samples.rows());
}

/// Central finite differences of the GISO.
inline Eigen::VectorXd fd_giso_gradient(const mrfscreen::NodeFeatures& features,
                                        const Eigen::VectorXd& v, double h = 1e-5) {
    Eigen::VectorXd g(v.size());
    for (long l = 0; l < v.size(); ++l) {
        Eigen::VectorXd vp = v, vm = v;
        vp[l] += h;
        vm[l] -= h;
        g[l] = (mrfscreen::giso_value(features, vp) - mrfscreen::giso_value(features, vm)) /
               (2.0 * h);
    }
    return g;
}

/// Kolmogorov-Smirnov distance of samples against a CDF callable.
template <typename Cdf>
double ks_distance(std::vector<double> xs, const Cdf& cdf) {
    std::sort(xs.begin(), xs.end());
    const double n = double(xs.size());
    double d = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
        const double c = cdf(xs[i]);
        d = std::max(d, std::abs(c - double(i) / n));
        d = std::max(d, std::abs(c - double(i + 1) / n));
    }
    return d;
}

/// Two-sample chi-square statistic on equal-width bins.
inline double chi2_two_sample(const std::vector<double>& a, const std::vector<double>& b,
                              double lo, double hi, int bins) {
    std::vector<double> ca(bins, 0.0), cb(bins, 0.0);
    auto drop = [&](const std::vector<double>& xs, std::vector<double>& c) {
        for (double x : xs) {
            int g = static_cast<int>((x - lo) / (hi - lo) * bins);
            g = std::min(bins - 1, std::max(0, g));
            c[g] += 1.0;
        }
    };
    drop(a, ca);
    drop(b, cb);
    const double ka = std::sqrt(double(b.size()) / double(a.size()));
    const double kb = 1.0 / ka;
    double stat = 0.0;
    for (int g = 0; g < bins; ++g) {
        const double tot = ca[g] + cb[g];
        if (tot == 0) continue;
        const double diff = ka * ca[g] - kb * cb[g];
        stat += diff * diff / tot;
    }
    return stat;
}

/// Mean of phi under f ∝ exp(rho . phi) on [lo, hi] with dense quadrature;
/// written against the raw basis, independent of quadrature_mean.
inline Eigen::VectorXd dense_mean(const mrfscreen::BasisFamily& basis, const Eigen::VectorXd& rho,
                                  double lo, double hi, int n = 4001) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(basis.k);
    double z = 0.0;
    const double dx = (hi - lo) / (n - 1);
    for (int g = 0; g < n; ++g) {
        const double x = lo + g * dx;
        const Eigen::VectorXd f = basis.eval(x);
        const double w = (g == 0 || g == n - 1 ? 0.5 : 1.0) * std::exp(rho.dot(f));
        z += w;
        acc += w * f;
    }
    return acc / z;
}

/// Simple 2-node fixture: f ∝ exp(theta1 x1 + theta2 x2 + theta12 x1 x2)
/// on [-1,1]^2 with k = 1 polynomial basis.
inline mrfscreen::ModelSpec pair_model(double theta1, double theta2, double theta12,
                                       double theta_max, double theta_min) {
    mrfscreen::ModelSpec m;
    m.p = 2;
    m.basis = mrfscreen::BasisFamily(mrfscreen::BasisKind::Polynomial, 1);
    m.domain = mrfscreen::Domain::symmetric(2, 1.0);
    m.node_params = {Eigen::VectorXd::Constant(1, theta1), Eigen::VectorXd::Constant(1, theta2)};
    if (theta12 != 0.0)
        m.edges[{0, 1}] = Eigen::MatrixXd::Constant(1, 1, theta12);
    m.theta_max = theta_max;
    m.theta_min = theta_min;
    m.d = 1;
    m.validate();
    return m;
}

/// Exhaustive grid search of the GISO over the l1 ball (2-d parameter only):
/// the independent optimality oracle for the entropic-descent solver.
inline double grid_giso_min(const mrfscreen::NodeFeatures& features, double gamma, double step) {
    if (features.dim() != 2) throw std::invalid_argument("grid oracle is 2-d only");
    double best = std::numeric_limits<double>::infinity();
    Eigen::VectorXd v(2);
    const long m = static_cast<long>(std::round(gamma / step));
    for (long a = -m; a <= m; ++a) {
        v[0] = a * step;
        const long rem = m - std::abs(a);
        for (long b = -rem; b <= rem; ++b) {
            v[1] = b * step;
            best = std::min(best, mrfscreen::giso_value(features, v));
        }
    }
    return best;
}

/// Random valid model on symmetric [-b, b]^p domains: chain edges with
/// random sign, magnitudes in [theta_min, theta_max].
inline mrfscreen::ModelSpec random_chain_model(mrfscreen::RngStream& rng, int p, int k,
                                               mrfscreen::BasisKind kind, double b,
                                               double theta_min, double theta_max,
                                               bool node_terms = true) {
    mrfscreen::ModelSpec m;
    m.p = p;
    m.basis = mrfscreen::BasisFamily(kind, k, b);
    m.domain = mrfscreen::Domain::symmetric(p, b);
    auto draw = [&]() {
        const double mag = theta_min + (theta_max - theta_min) * rng.uniform01();
        return rng.uniform01() < 0.5 ? -mag : mag;
    };
    for (int i = 0; i < p; ++i) {
        Eigen::VectorXd v = Eigen::VectorXd::Zero(k);
        if (node_terms)
            for (int r = 0; r < k; ++r) v[r] = draw();
        m.node_params.push_back(v);
    }
    for (int i = 0; i + 1 < p; ++i) {
        Eigen::MatrixXd blk(k, k);
        for (int r = 0; r < k; ++r)
            for (int s = 0; s < k; ++s) blk(r, s) = draw();
        m.edges[{i, i + 1}] = blk;
    }
    m.theta_max = theta_max;
    m.theta_min = theta_min;
    m.d = p > 2 ? 2 : (p > 1 ? 1 : 0);
    m.validate();
    return m;
}

}  // namespace oracle
