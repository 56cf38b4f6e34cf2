#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "mrfscreen/csv.hpp"
#include "mrfscreen/model.hpp"
#include "mrfscreen/quadrature.hpp"
#include "mrfscreen/rng.hpp"

namespace mrfscreen {

struct SamplerConfig {
    long burn_in = 1000;      // sweeps discarded up front
    long thin = 10;           // sweeps between retained samples
    int inner_mrw_steps = 5;  // Metropolis proposals per site visit
    std::uint64_t seed = 0;

    void validate() const {
        if (burn_in < 0 || thin < 1 || inner_mrw_steps < 1)
            throw std::invalid_argument("invalid sampler config");
    }
};

struct SampleMatrix {
    long n = 0;
    int p = 0;
    RowMatrix values;  // n x p
};

struct GibbsStats {
    long long proposals = 0;
    long long accepts = 0;
    double acceptance_rate() const {
        return proposals ? double(accepts) / double(proposals) : 0.0;
    }
};

namespace detail {

/// Metropolis accept test for log-weight gap `anew - acur` without exp():
/// P(Exp(1) > acur - anew) = min{1, exp(anew - acur)}, the exact acceptance
/// probability. An exponential is drawn unconditionally so the accept path
/// is branch-free in the hot loops.
inline bool mrw_accept(double acur, double anew, RngStream& rng) {
    return ziggurat_exp().draw(rng) > acur - anew;
}

/// Runs `steps` Metropolis proposals on one coordinate with fixed canonical
/// parameters lambda; returns the final state. Counts proposals/accepts.
inline double mrw_steps_fixed_lambda(const BasisFamily& basis, const Eigen::VectorXd& lambda,
                                     double lo, double hi, double x, long steps,
                                     RngStream& rng, GibbsStats* stats) {
    const int k = basis.k;
    const ZigguratExp& zig = ziggurat_exp();
    long accepts = 0;
    if (basis.kind == BasisKind::Polynomial && k == 1) {
        // Hot path: a(z) = lambda_0 * z; select without branching.
        const double l0 = lambda[0];
        double acur = l0 * x;
        for (long s = 0; s < steps; ++s) {
            const double z = rng.uniform(lo, hi);
            const double anew = l0 * z;
            const bool acc = zig.draw(rng) > acur - anew;
            x = acc ? z : x;
            acur = acc ? anew : acur;
            accepts += acc;
        }
    } else {
        double buf[16];
        std::vector<double> heap;
        double* f = buf;
        if (k > 16) {
            heap.resize(k);
            f = heap.data();
        }
        auto energy = [&](double z) {
            basis.eval(z, f);
            double a = 0.0;
            for (int r = 0; r < k; ++r) a += lambda[r] * f[r];
            return a;
        };
        double acur = energy(x);
        for (long s = 0; s < steps; ++s) {
            const double z = rng.uniform(lo, hi);
            const double anew = energy(z);
            const bool acc = zig.draw(rng) > acur - anew;
            x = acc ? z : x;
            acur = acc ? anew : acur;
            accepts += acc;
        }
    }
    if (stats) {
        stats->proposals += steps;
        stats->accepts += accepts;
    }
    return x;
}

}  // namespace detail

/// One Metropolized-random-walk proposal for site i: draw z ~ Uniform(X_i),
/// accept with probability min{1, exp(lambda.(phi(z) - phi(x_i)))}.
inline double mrw_site_step(const ModelSpec& model, int i, const Eigen::VectorXd& current,
                            RngStream& rng) {
    model.domain.check_point(current);
    const Eigen::VectorXd lambda = conditional_canonical(model, i, current);
    return detail::mrw_steps_fixed_lambda(model.basis, lambda, model.domain.lo[i],
                                          model.domain.hi[i], current[i], 1, rng, nullptr);
}

/// Single-chain Gibbs sampler: one sweep applies inner_mrw_steps MRW proposals
/// to each site in index order. Deterministic given config.seed.
inline SampleMatrix gibbs_sample(const ModelSpec& model, long n, const SamplerConfig& config,
                                 GibbsStats* stats = nullptr) {
    config.validate();
    if (n < 0) throw std::invalid_argument("n must be >= 0");
    SampleMatrix out;
    out.n = n;
    out.p = model.p;
    out.values.resize(n, model.p);
    if (n == 0) return out;

    RngStream rng(config.seed, 0x67696262ULL);  // dedicated gibbs stream
    Eigen::VectorXd x(model.p);
    for (int i = 0; i < model.p; ++i)
        x[i] = rng.uniform(model.domain.lo[i], model.domain.hi[i]);

    auto sweep = [&]() {
        for (int i = 0; i < model.p; ++i) {
            const Eigen::VectorXd lambda = conditional_canonical(model, i, x);
            x[i] = detail::mrw_steps_fixed_lambda(model.basis, lambda, model.domain.lo[i],
                                                  model.domain.hi[i], x[i],
                                                  config.inner_mrw_steps, rng, stats);
        }
    };

    for (long s = 0; s < config.burn_in; ++s) sweep();
    for (long t = 0; t < n; ++t) {
        for (long s = 0; s < config.thin; ++s) sweep();
        out.values.row(t) = x.transpose();
    }
    return out;
}

/// Exact inverse-CDF sampler for a single bounded exponential-family variable
/// f(x) ∝ exp(rho . phi(x)) on [lo, hi], via a tabulated trapezoid CDF.
inline std::vector<double> exact_sample_1d(const BasisFamily& family, const Eigen::VectorXd& rho,
                                           double lo, double hi, long n, RngStream& rng,
                                           int grid = 4096) {
    if (grid < 4096) grid = 4096;
    if (rho.size() != family.k) throw std::invalid_argument("rho length != k");
    const int k = family.k;
    Eigen::VectorXd f(k);
    auto energy = [&](double x) {
        family.eval(x, f.data());
        return rho.dot(f);
    };
    const double dx = (hi - lo) / grid;
    std::vector<double> dens(grid + 1), cdf(grid + 1);
    double emax = -1e300;
    for (int g = 0; g <= grid; ++g) {
        dens[g] = energy(lo + g * dx);
        emax = std::max(emax, dens[g]);
    }
    for (int g = 0; g <= grid; ++g) dens[g] = std::exp(dens[g] - emax);
    cdf[0] = 0.0;
    for (int g = 1; g <= grid; ++g)
        cdf[g] = cdf[g - 1] + 0.5 * (dens[g - 1] + dens[g]) * dx;
    const double z = cdf[grid];
    std::vector<double> out(n);
    for (long t = 0; t < n; ++t) {
        const double u = rng.uniform01() * z;
        const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        int g = static_cast<int>(it - cdf.begin());
        if (g < 1) g = 1;
        if (g > grid) g = grid;
        const double c0 = cdf[g - 1], c1 = cdf[g];
        const double frac = c1 > c0 ? (u - c0) / (c1 - c0) : 0.5;
        out[t] = lo + (g - 1 + frac) * dx;
    }
    return out;
}

/// Exact i.i.d. sampler for two-variable models: tabulated inverse CDF for
/// the x2 marginal, then x1 | x2 by closed form (k = 1 polynomial) or a
/// per-draw tabulated conditional CDF.
class PairSampler {
public:
    PairSampler(const ModelSpec& model, int marginal_grid = 4096, int inner_nodes = 128)
        : model_(model) {
        if (model.p != 2) throw std::invalid_argument("PairSampler requires p = 2");
        const double lo0 = model.domain.lo[0], hi0 = model.domain.hi[0];
        const double lo1 = model.domain.lo[1], hi1 = model.domain.hi[1];
        grid_ = marginal_grid;
        dx_ = (hi1 - lo1) / grid_;
        lo1_ = lo1;
        cdf_.resize(grid_ + 1);
        std::vector<double> dens(grid_ + 1);
        Eigen::VectorXd x(2);
        double emax = -1e300;
        std::vector<double> logm(grid_ + 1);
        Eigen::VectorXd f(model.k());
        for (int g = 0; g <= grid_; ++g) {
            x[1] = lo1 + g * dx_;
            x[0] = 0.5 * (lo0 + hi0);
            const Eigen::VectorXd lambda = conditional_canonical(model, 0, x);
            // log ∫ exp(lambda.phi(u)) du + node terms that only involve x2
            model.basis.eval(x[0], f.data());
            const double shift = lambda.dot(f);
            const double z = integrate(
                [&](double u) {
                    model.basis.eval(u, f.data());
                    return std::exp(lambda.dot(f) - shift);
                },
                lo0, hi0, inner_nodes);
            model.basis.eval(x[1], f.data());
            logm[g] = std::log(z) + shift + model.node_params[1].dot(f);
            emax = std::max(emax, logm[g]);
        }
        for (int g = 0; g <= grid_; ++g) dens[g] = std::exp(logm[g] - emax);
        cdf_[0] = 0.0;
        for (int g = 1; g <= grid_; ++g)
            cdf_[g] = cdf_[g - 1] + 0.5 * (dens[g - 1] + dens[g]) * dx_;
        norm_ = cdf_[grid_];
    }

    Eigen::Vector2d draw(RngStream& rng) const {
        Eigen::Vector2d out;
        const double u = rng.uniform01() * norm_;
        const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
        int g = static_cast<int>(it - cdf_.begin());
        if (g < 1) g = 1;
        if (g > grid_) g = grid_;
        const double c0 = cdf_[g - 1], c1 = cdf_[g];
        const double frac = c1 > c0 ? (u - c0) / (c1 - c0) : 0.5;
        out[1] = lo1_ + (g - 1 + frac) * dx_;

        Eigen::VectorXd x(2);
        x[0] = 0.0;
        x[1] = out[1];
        const Eigen::VectorXd lambda = conditional_canonical(model_, 0, x);
        const double lo0 = model_.domain.lo[0], hi0 = model_.domain.hi[0];
        if (model_.basis.kind == BasisKind::Polynomial && model_.k() == 1) {
            const double a = lambda[0];
            const double v = rng.uniform01();
            if (std::abs(a) < 1e-10) {
                out[0] = lo0 + v * (hi0 - lo0);
            } else {
                // F^{-1}(v) for density ∝ e^{a x} on [lo0, hi0]
                const double m = std::max(a * lo0, a * hi0);
                const double elo = std::exp(a * lo0 - m), ehi = std::exp(a * hi0 - m);
                out[0] = (std::log(elo + v * (ehi - elo)) + m) / a;
            }
            out[0] = std::min(hi0, std::max(lo0, out[0]));
        } else {
            out[0] = exact_sample_1d(model_.basis, lambda, lo0, hi0, 1, rng)[0];
        }
        return out;
    }

private:
    ModelSpec model_;
    int grid_ = 0;
    double dx_ = 0.0, lo1_ = 0.0, norm_ = 0.0;
    std::vector<double> cdf_;
};

}  // namespace mrfscreen
