#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "mrfscreen/model.hpp"
#include "mrfscreen/sampler.hpp"
#include "mrfscreen/threads.hpp"

namespace mrfscreen {

struct GriseConfig {
    double epsilon = 1e-3;   // target optimality gap (drives the stall rule)
    double gamma = 1.0;      // l1 radius of the search ball
    long max_iters = 2000;   // entropic-descent iteration cap T
    double eta0 = 0.0;       // 0 => sqrt(log(2K+1)) / (2 gamma varphi exp(gamma varphi))
    double varphi_max = 1.0; // centered-feature sup bound, used by the default eta0
    long stall_window = 200; // stop when best fails to improve by epsilon/10 this long
    bool polish = true;      // Newton refinement after entropic descent
    long polish_iters = 60;

    void validate() const {
        if (!(epsilon > 0) || !(gamma > 0) || max_iters < 1)
            throw std::invalid_argument("invalid grise config");
    }
};

struct GriseSolution {
    Eigen::VectorXd vertex;
    double objective = 0.0;
    long iterations_used = 0;
    long best_iterate_index = 0;
};

/// Cached centered features of one node over all samples (n x dim).
struct NodeFeatures {
    int node = 0;
    RowMatrix phi;
    long n() const { return phi.rows(); }
    int dim() const { return static_cast<int>(phi.cols()); }
};

inline NodeFeatures build_node_features(const RowMatrix& samples, const BasisFamily& basis,
                                        const Domain& domain, int node) {
    if (samples.rows() < 1) throw std::invalid_argument("empty sample matrix");
    if (samples.cols() != domain.size()) throw std::invalid_argument("sample width != p");
    NodeFeatures out;
    out.node = node;
    VertexLayout layout(domain.size(), basis.k, node);
    out.phi.resize(samples.rows(), layout.dim());
    Eigen::VectorXd x(samples.cols());
    for (long t = 0; t < samples.rows(); ++t) {
        x = samples.row(t).transpose();
        domain.check_point(x);
        feature_vector_into(basis, domain, node, x, out.phi.row(t).data());
    }
    return out;
}

/// (1/n) sum_t exp(-v . phi_t): the per-node interaction screening objective.
inline double giso_value(const NodeFeatures& features, const Eigen::VectorXd& v) {
    const Eigen::VectorXd a = features.phi * v;
    return (-a.array()).exp().mean();
}

inline double giso_value(const SampleMatrix& samples, const BasisFamily& basis,
                         const Domain& domain, int i, const Eigen::VectorXd& v) {
    return giso_value(build_node_features(samples.values, basis, domain, i), v);
}

/// Gradient coordinate l: -(1/n) sum_t phi_{t,l} exp(-v . phi_t).
/// Returns the objective as well (shares the exponential pass).
inline double giso_value_gradient(const NodeFeatures& features, const Eigen::VectorXd& v,
                                  Eigen::VectorXd& grad) {
    const long n = features.n();
    const Eigen::VectorXd e = (-(features.phi * v).array()).exp();
    grad.noalias() = -(features.phi.transpose() * e) / double(n);
    return e.mean();
}

inline Eigen::VectorXd giso_gradient(const NodeFeatures& features, const Eigen::VectorXd& v) {
    Eigen::VectorXd g(features.dim());
    giso_value_gradient(features, v, g);
    return g;
}

inline Eigen::VectorXd giso_gradient(const SampleMatrix& samples, const BasisFamily& basis,
                                     const Domain& domain, int i, const Eigen::VectorXd& v) {
    return giso_gradient(build_node_features(samples.values, basis, domain, i), v);
}

/// Observer for entropic-descent iterates (telemetry/testing): receives the
/// iterate index (1-based), simplex weights w+, w-, slack y and the objective
/// at that iterate.
using EntropicObserver = std::function<void(long, const Eigen::VectorXd&,
                                            const Eigen::VectorXd&, double, double)>;

/// Exponentiated-gradient descent on the lifted simplex of dimension
/// 2*dim + 1; the candidate parameter at iterate t is gamma (w+ - w-).
/// Weight updates run in log-domain and are renormalized every iteration.
inline GriseSolution entropic_descent(const NodeFeatures& features, const GriseConfig& config,
                                      const EntropicObserver& observer = nullptr) {
    config.validate();
    const int K = features.dim();
    const long N = 2L * K + 1;  // simplex size
    const double gamma = config.gamma;

    // literal initialization: every weight (and the slack) starts at e/N
    const double init = M_E / double(N);
    Eigen::VectorXd lp = Eigen::VectorXd::Constant(K, std::log(init));
    Eigen::VectorXd lm = lp;
    double ly = std::log(init);

    double eta = config.eta0 > 0.0
                     ? config.eta0
                     : std::sqrt(std::log(double(N))) /
                           (2.0 * gamma * config.varphi_max *
                            std::exp(gamma * config.varphi_max));

    Eigen::VectorXd wp(K), wm(K), v(K), grad(K), theta(K);
    Eigen::VectorXd best_theta = Eigen::VectorXd::Zero(K);
    double best_obj = std::numeric_limits<double>::infinity();
    long best_index = 0, last_gain = 1;
    long t = 1;
    for (; t <= config.max_iters; ++t) {
        wp = lp.array().exp();
        wm = lm.array().exp();
        theta = gamma * (wp - wm);
        const double obj = giso_value_gradient(features, theta, grad);
        if (observer) observer(t, wp, wm, std::exp(ly), obj);
        if (obj < best_obj - config.epsilon / 10.0) last_gain = t;
        if (obj < best_obj) {
            best_obj = obj;
            best_theta = theta;
            best_index = t;
        }
        if (t - last_gain >= config.stall_window) break;

        v = gamma * grad;
        lp -= eta * v;
        lm += eta * v;
        // renormalize: subtract log of the total mass
        double m = ly;
        for (int l = 0; l < K; ++l) m = std::max(m, std::max(lp[l], lm[l]));
        double z = std::exp(ly - m);
        for (int l = 0; l < K; ++l) z += std::exp(lp[l] - m) + std::exp(lm[l] - m);
        const double logz = m + std::log(z);
        lp.array() -= logz;
        lm.array() -= logz;
        ly -= logz;
        eta *= std::sqrt(double(t) / double(t + 1));
    }

    GriseSolution sol;
    sol.vertex = best_theta;
    sol.objective = best_obj;
    sol.iterations_used = std::min(t, config.max_iters);
    sol.best_iterate_index = best_index;
    return sol;
}

inline GriseSolution entropic_descent(const SampleMatrix& samples, const BasisFamily& basis,
                                      const Domain& domain, int i, const GriseConfig& config,
                                      const EntropicObserver& observer = nullptr) {
    return entropic_descent(build_node_features(samples.values, basis, domain, i), config,
                            observer);
}

/// Damped-Newton refinement of the GISO inside the l1 ball. The GISO is
/// smooth and convex; when the minimizer is interior (the usual case) this
/// converges quadratically. Steps that would leave the ball are scaled back.
inline Eigen::VectorXd newton_polish(const NodeFeatures& features, Eigen::VectorXd v,
                                     double gamma, long max_iters = 60) {
    const long n = features.n();
    const int K = features.dim();
    Eigen::VectorXd grad(K), step(K);
    Eigen::MatrixXd hess(K, K);
    double obj = giso_value_gradient(features, v, grad);
    for (long it = 0; it < max_iters; ++it) {
        const Eigen::VectorXd e = (-(features.phi * v).array()).exp();
        hess.noalias() = features.phi.transpose() * e.asDiagonal() * features.phi / double(n);
        hess.diagonal().array() += 1e-12 * (1.0 + hess.trace());
        step = hess.ldlt().solve(-grad);
        double scale = 1.0;
        const double l1 = (v + step).lpNorm<1>();
        if (l1 > gamma) {
            // shrink toward the ball boundary along the step direction
            double t_lo = 0.0, t_hi = 1.0;
            for (int b = 0; b < 60; ++b) {
                const double mid = 0.5 * (t_lo + t_hi);
                if ((v + mid * step).lpNorm<1>() <= gamma) t_lo = mid;
                else t_hi = mid;
            }
            scale = t_lo;
        }
        double t_step = scale;
        bool improved = false;
        for (int b = 0; b < 50; ++b) {
            const Eigen::VectorXd cand = v + t_step * step;
            const double cobj = giso_value(features, cand);
            if (cobj < obj) {
                v = cand;
                obj = cobj;
                improved = true;
                break;
            }
            t_step *= 0.5;
        }
        if (!improved) break;
        obj = giso_value_gradient(features, v, grad);
        if (grad.lpNorm<Eigen::Infinity>() < 1e-13 * std::max(1.0, obj)) break;
    }
    return v;
}

/// Entropic descent followed by optional Newton refinement; the reported
/// objective is the best value seen anywhere.
inline GriseSolution solve_node(const NodeFeatures& features, const GriseConfig& config,
                                const EntropicObserver& observer = nullptr) {
    GriseSolution sol = entropic_descent(features, config, observer);
    if (config.polish) {
        const Eigen::VectorXd refined =
            newton_polish(features, sol.vertex, config.gamma, config.polish_iters);
        const double robj = giso_value(features, refined);
        if (robj < sol.objective) {
            sol.vertex = refined;
            sol.objective = robj;
        }
    }
    return sol;
}

/// Coordinatewise projection onto the feasible set Lambda:
/// clamp to theta_max, zero below theta_min/2, push [theta_min/2, theta_min)
/// up to theta_min.
inline Eigen::VectorXd project_to_feasible(const Eigen::VectorXd& v, double theta_min,
                                           double theta_max) {
    Eigen::VectorXd out(v.size());
    for (long l = 0; l < v.size(); ++l) {
        const double a = std::abs(v[l]);
        const double s = v[l] < 0 ? -1.0 : 1.0;
        if (a < theta_min / 2.0)
            out[l] = 0.0;
        else if (a < theta_min)
            out[l] = s * theta_min;
        else
            out[l] = s * std::min(a, theta_max);
    }
    return out;
}

/// One GRISE solve per node; results are ordered by node index and identical
/// whether nodes run sequentially or in parallel.
inline std::vector<GriseSolution> fit_all_nodes(const RowMatrix& samples,
                                                const BasisFamily& basis, const Domain& domain,
                                                const GriseConfig& config) {
    const int p = domain.size();
    std::vector<GriseSolution> out(p);
    parallel_for(p, [&](long i) {
        const NodeFeatures features =
            build_node_features(samples, basis, domain, static_cast<int>(i));
        out[i] = solve_node(features, config);
    });
    return out;
}

}  // namespace mrfscreen
