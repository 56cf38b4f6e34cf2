#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "mrfscreen/grise.hpp"
#include "mrfscreen/model.hpp"
#include "mrfscreen/quadrature.hpp"
#include "mrfscreen/rng.hpp"
#include "mrfscreen/structure.hpp"
#include "mrfscreen/threads.hpp"

namespace mrfscreen {

// ---------------------------------------------------------------------------
// Binning of neighbor values
// ---------------------------------------------------------------------------

/// Tensor-product one-hot encoding of neighbor values with bin width t.
/// Intervals are half-open on the left: x in ((zeta-1) t, zeta t] relative to
/// the variable's lower endpoint; x at the lower endpoint falls in bin 1.
struct BinningScheme {
    double t = 0.0;
    std::vector<int> neighbors;   // ascending node ids
    std::vector<double> lo;       // per-neighbor lower endpoint
    std::vector<long> nbins;      // per-neighbor bin count ceil((u-l)/t)
    std::vector<long> stride;     // row-major strides over neighbors
    long ptilde = 1;

    static constexpr long max_ptilde = 1000000;

    static BinningScheme build(const Domain& domain, std::vector<int> neighbors, double t) {
        if (!(t > 0)) throw std::invalid_argument("bin width t must be positive");
        std::sort(neighbors.begin(), neighbors.end());
        BinningScheme s;
        s.t = t;
        s.neighbors = std::move(neighbors);
        s.ptilde = 1;
        for (int j : s.neighbors) {
            const double len = domain.hi[j] - domain.lo[j];
            const long bins = static_cast<long>(std::ceil(len / t - 1e-12));
            s.lo.push_back(domain.lo[j]);
            s.nbins.push_back(std::max<long>(1, bins));
            if (s.ptilde > max_ptilde / s.nbins.back())
                throw std::invalid_argument(
                    "binning dimension exceeds the 1e6 cap; increase the bin width t");
            s.ptilde *= s.nbins.back();
        }
        s.stride.assign(s.neighbors.size(), 1);
        for (int m = static_cast<int>(s.neighbors.size()) - 2; m >= 0; --m)
            s.stride[m] = s.stride[m + 1] * s.nbins[m + 1];
        return s;
    }

    /// 1-based bin of one coordinate.
    long bin1d(size_t m, double x) const {
        long zeta = static_cast<long>(std::ceil((x - lo[m]) / t - 1e-12));
        if (zeta < 1) zeta = 1;
        if (zeta > nbins[m]) zeta = nbins[m];
        return zeta;
    }

    /// Flat 0-based index of the single nonzero coordinate for the given
    /// neighbor values (ordered like `neighbors`).
    long index(const Eigen::VectorXd& x_neighbors) const {
        if (x_neighbors.size() != static_cast<long>(neighbors.size()))
            throw std::invalid_argument("neighbor value count mismatch");
        long idx = 0;
        for (size_t m = 0; m < neighbors.size(); ++m)
            idx += (bin1d(m, x_neighbors[m]) - 1) * stride[m];
        return idx;
    }
};

/// One-hot vector represented by its single nonzero coordinate.
struct OneHot {
    long index = 0;
    long size = 1;
    Eigen::VectorXd to_dense() const {
        Eigen::VectorXd v = Eigen::VectorXd::Zero(size);
        v[index] = 1.0;
        return v;
    }
};

inline OneHot bin_features(const Eigen::VectorXd& x_neighbors, const BinningScheme& scheme) {
    if (scheme.neighbors.empty()) return {0, 1};
    return {scheme.index(x_neighbors), scheme.ptilde};
}

// ---------------------------------------------------------------------------
// Robust Lasso (l1-constrained least squares, Frank-Wolfe)
// ---------------------------------------------------------------------------

/// Design rows are one-hot: exactly one 1 per row, at column col[row].
struct LassoProblem {
    long ptilde = 1;
    std::vector<long> col;  // per-row nonzero column
    Eigen::VectorXd y;
    double c2tilde = 1.0;

    /// Validates a dense 0/1 design and compresses it; handy for small tests.
    static LassoProblem from_dense(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                                   double c2tilde) {
        LassoProblem p;
        p.ptilde = design.cols();
        p.y = y;
        p.c2tilde = c2tilde;
        p.col.resize(design.rows());
        for (long r = 0; r < design.rows(); ++r) {
            long hot = -1;
            for (long c = 0; c < design.cols(); ++c) {
                const double v = design(r, c);
                if (v == 1.0) {
                    if (hot >= 0) throw std::invalid_argument("design row has two ones");
                    hot = c;
                } else if (v != 0.0) {
                    throw std::invalid_argument("design entries must be 0 or 1");
                }
            }
            if (hot < 0) throw std::invalid_argument("design row has no one");
            p.col[r] = hot;
        }
        return p;
    }

    void validate() const {
        if (!(c2tilde > 0)) throw std::invalid_argument("c2tilde must be positive");
        if (y.size() != static_cast<long>(col.size()))
            throw std::invalid_argument("response length != row count");
        if (!y.allFinite()) throw std::runtime_error("non-finite response");
        for (long c : col)
            if (c < 0 || c >= ptilde) throw std::invalid_argument("design column out of range");
    }
};

/// argmin_{||beta||_1 <= c2tilde} ||y - V beta||_2^2 by Frank-Wolfe with exact
/// line search; stops at duality gap <= tol (default 1e-8 ||y||^2). With a
/// one-hot design each iteration costs O(ptilde) after an O(n) setup.
inline Eigen::VectorXd robust_lasso(const LassoProblem& problem, long max_iters = 200000,
                                    double tol = 0.0) {
    problem.validate();
    const long n = problem.y.size(), m = problem.ptilde;
    if (tol <= 0.0) tol = 1e-8 * problem.y.squaredNorm();

    Eigen::VectorXd count = Eigen::VectorXd::Zero(m);  // rows per column
    Eigen::VectorXd rsum = Eigen::VectorXd::Zero(m);   // residual sum per column
    for (long r = 0; r < n; ++r) {
        count[problem.col[r]] += 1.0;
        rsum[problem.col[r]] += problem.y[r];
    }

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(m);
    const double c2 = problem.c2tilde;
    for (long it = 0; it < max_iters; ++it) {
        // gradient g_b = -2 * (residual sum in column b)
        long bstar = 0;
        double gmax = 0.0, gdotbeta = 0.0;
        for (long b = 0; b < m; ++b) {
            const double g = -2.0 * rsum[b];
            gdotbeta += g * beta[b];
            if (std::abs(g) > std::abs(gmax)) {
                gmax = g;
                bstar = b;
            }
        }
        const double s_val = gmax > 0 ? -c2 : c2;  // LMO vertex coordinate
        const double gap = gdotbeta - gmax * s_val;
        if (gap <= tol) break;

        // direction d = s - beta; V d has entry d[col[row]] per row
        double rd = 0.0, dd = 0.0;
        for (long b = 0; b < m; ++b) {
            const double d = (b == bstar ? s_val : 0.0) - beta[b];
            rd += rsum[b] * d;
            dd += count[b] * d * d;
        }
        if (dd <= 0.0) break;
        double step = rd / dd;
        if (step > 1.0) step = 1.0;
        if (step <= 0.0) break;

        for (long b = 0; b < m; ++b) {
            const double d = (b == bstar ? s_val : 0.0) - beta[b];
            beta[b] += step * d;
            rsum[b] -= step * count[b] * d;
        }
    }
    return beta;
}

// ---------------------------------------------------------------------------
// Conditional means by binned sparse regression
// ---------------------------------------------------------------------------

struct CondMeanEstimate {
    Eigen::MatrixXd mu;            // one row per requested sample index z, k columns
    std::vector<Eigen::VectorXd> beta;  // fitted coefficients per basis index
    BinningScheme scheme;
};

/// For each basis index j: regress phi_j(x_i) on the one-hot bin encoding of
/// the neighbor values (robust Lasso with c2tilde = phi_max (b_u/t)^d), then
/// read the fitted value at each requested sample row z.
inline CondMeanEstimate estimate_conditional_means(
    const RowMatrix& samples, const BasisFamily& basis, const Domain& domain, int i,
    const std::vector<int>& neighbors, double t, const std::vector<long>& zrows, int degree_bound,
    long lasso_max_iters = 200000, double lasso_tol = 0.0) {
    const long n = samples.rows();
    if (n < 1) throw std::invalid_argument("empty sample matrix");
    for (long z : zrows)
        if (z < 0 || z >= n) throw std::invalid_argument("sample index z out of range");

    CondMeanEstimate out;
    out.scheme = BinningScheme::build(domain, neighbors, t);
    const auto& scheme = out.scheme;

    std::vector<long> cols(n);
    Eigen::VectorXd xnb(static_cast<long>(scheme.neighbors.size()));
    for (long r = 0; r < n; ++r) {
        for (size_t m = 0; m < scheme.neighbors.size(); ++m)
            xnb[static_cast<long>(m)] = samples(r, scheme.neighbors[m]);
        cols[r] = bin_features(xnb, scheme).index;
    }

    const int k = basis.k;
    double phimax = 0.0;
    for (int v = 0; v < domain.size(); ++v)
        phimax = std::max(phimax, basis.phi_max(domain.lo[v], domain.hi[v]));
    const double c2 = phimax * std::pow(domain.b_u / t, degree_bound);

    out.mu.resize(static_cast<long>(zrows.size()), k);
    Eigen::VectorXd f(k);
    for (int j = 0; j < k; ++j) {
        LassoProblem problem;
        problem.ptilde = scheme.ptilde;
        problem.col = cols;
        problem.c2tilde = c2;
        problem.y.resize(n);
        for (long r = 0; r < n; ++r) {
            basis.eval(samples(r, i), f.data());
            problem.y[r] = f[j];
        }
        Eigen::VectorXd beta = robust_lasso(problem, lasso_max_iters, lasso_tol);
        for (size_t zi = 0; zi < zrows.size(); ++zi)
            out.mu(static_cast<long>(zi), j) = beta[cols[zrows[zi]]];
        out.beta.push_back(std::move(beta));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Single-variable exponential family utilities
// ---------------------------------------------------------------------------

/// Mean of phi under f(w) ∝ exp(rho . phi(w)) on [lo, hi], by quadrature.
inline Eigen::VectorXd quadrature_mean(const BasisFamily& basis, const Eigen::VectorXd& rho,
                                       double lo, double hi, int nodes = 256) {
    const int k = basis.k;
    std::vector<double> xs, ws;
    scaled_rule(lo, hi, nodes, xs, ws);
    Eigen::VectorXd f(k), acc = Eigen::VectorXd::Zero(k);
    basis.eval(0.5 * (lo + hi), f.data());
    const double shift = rho.dot(f);
    double z = 0.0;
    for (int g = 0; g < nodes; ++g) {
        basis.eval(xs[g], f.data());
        const double w = ws[g] * std::exp(rho.dot(f) - shift);
        z += w;
        acc += w * f;
    }
    return acc / z;
}

/// Covariance of phi under f(w) ∝ exp(rho . phi(w)): the Fisher information
/// of the single-variable family (Hessian of its log partition function).
inline Eigen::MatrixXd quadrature_fisher(const BasisFamily& basis, const Eigen::VectorXd& rho,
                                         double lo, double hi, int nodes = 256) {
    const int k = basis.k;
    std::vector<double> xs, ws;
    scaled_rule(lo, hi, nodes, xs, ws);
    Eigen::VectorXd f(k), mean = Eigen::VectorXd::Zero(k);
    Eigen::MatrixXd second = Eigen::MatrixXd::Zero(k, k);
    basis.eval(0.5 * (lo + hi), f.data());
    const double shift = rho.dot(f);
    double z = 0.0;
    for (int g = 0; g < nodes; ++g) {
        basis.eval(xs[g], f.data());
        const double w = ws[g] * std::exp(rho.dot(f) - shift);
        z += w;
        mean += w * f;
        second.noalias() += w * f * f.transpose();
    }
    mean /= z;
    second /= z;
    return second - mean * mean.transpose();
}

/// Grid estimate of q^s: the smallest Fisher eigenvalue over the box
/// ||rho||_inf <= rho_max, scanned on a per-axis grid.
inline double estimate_qs(const BasisFamily& basis, double lo, double hi, double rho_max,
                          int grid_per_axis = 21, int quad_nodes = 256) {
    const int k = basis.k;
    double total = 1.0;
    for (int j = 0; j < k; ++j) {
        total *= grid_per_axis;
        if (total > 1e6) throw std::invalid_argument("q^s grid too large for this k");
    }
    const long npts = static_cast<long>(total);
    double qs = std::numeric_limits<double>::infinity();
    Eigen::VectorXd rho(k);
    for (long idx = 0; idx < npts; ++idx) {
        long rem = idx;
        for (int j = 0; j < k; ++j) {
            const long g = rem % grid_per_axis;
            rem /= grid_per_axis;
            rho[j] = grid_per_axis == 1
                         ? 0.0
                         : -rho_max + 2.0 * rho_max * double(g) / double(grid_per_axis - 1);
        }
        const Eigen::MatrixXd fisher = quadrature_fisher(basis, rho, lo, hi, quad_nodes);
        const double lmin =
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(fisher).eigenvalues().minCoeff();
        qs = std::min(qs, lmin);
    }
    return qs;
}

// ---------------------------------------------------------------------------
// MRW mean estimation and the backward map
// ---------------------------------------------------------------------------

/// Mixing-budget formula: tau1(eps) = ceil(8 k b_l^{-2} rho_max phi_max
/// exp(12 k rho_max phi_max) log(4 phi_max sqrt(b_u) / (eps sqrt(b_l)))).
inline long mrw_tau1(double eps, int k, double rho_max, double phi_max, double b_l, double b_u) {
    const double v = 8.0 * k * rho_max * phi_max / (b_l * b_l) *
                     std::exp(12.0 * k * rho_max * phi_max) *
                     std::log(4.0 * phi_max * std::sqrt(b_u) / (eps * std::sqrt(b_l)));
    return static_cast<long>(std::ceil(std::max(1.0, v)));
}

/// Chain-count formula: tau2(eps, delta) = ceil(8 phi_max^2 / eps^2 log(2/delta)).
inline long mrw_tau2(double eps, double delta, double phi_max) {
    const double v = 8.0 * phi_max * phi_max / (eps * eps) * std::log(2.0 / delta);
    return static_cast<long>(std::ceil(std::max(1.0, v)));
}

/// Averages phi over tau2 independent Metropolized-random-walk chains, each
/// run for tau1 accept/reject steps from w0 (the recorded state is the one
/// after tau1 + 1 proposals). Chains use independent RNG streams and may run
/// concurrently; the combination order is fixed, so results are reproducible.
inline Eigen::VectorXd mrw_mean_estimate(const BasisFamily& basis, const Eigen::VectorXd& rho,
                                         double lo, double hi, long tau1, long tau2,
                                         std::uint64_t seed, double w0 = std::nan("")) {
    if (rho.size() != basis.k) throw std::invalid_argument("rho length != k");
    if (tau1 < 1 || tau2 < 1) throw std::invalid_argument("tau1, tau2 must be >= 1");
    if (std::isnan(w0)) w0 = 0.5 * (lo + hi);
    const int k = basis.k;

    const long chunk = 4096;
    const long nchunks = (tau2 + chunk - 1) / chunk;
    Eigen::MatrixXd partial = Eigen::MatrixXd::Zero(k, nchunks);
    parallel_for(nchunks, [&](long c) {
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(k);
        Eigen::VectorXd f(k);
        const long m_end = std::min(tau2, (c + 1) * chunk);
        for (long m = c * chunk; m < m_end; ++m) {
            RngStream rng(seed, 0x6d727700ULL + static_cast<std::uint64_t>(m));
            const double w = detail::mrw_steps_fixed_lambda(basis, rho, lo, hi, w0, tau1 + 1,
                                                            rng, nullptr);
            basis.eval(w, f.data());
            acc += f;
        }
        partial.col(c) = acc;
    });
    Eigen::VectorXd total = Eigen::VectorXd::Zero(k);
    for (long c = 0; c < nchunks; ++c) total += partial.col(c);
    return total / double(tau2);
}

struct BackwardMapConfig {
    double rho_max = 0.0;   // <= 0 => derived by the caller (pipeline) or rejected
    double xi = 0.0;        // 0 => 1 / (2 k phi_max^2)
    long tau1 = 0, tau2 = 0;  // 0 => mrw_tau1/mrw_tau2 at (eps5, delta5)
    long tau3 = 0;            // 0 => (c2/c1) log(k rho_max^2 / (eps6^2 - c3))
    double eps5 = 1e-3;
    double delta5 = 0.05;
    double eps6 = 0.05;
    bool quadrature_mode = true;  // deterministic mean evaluation
    int quad_nodes = 256;
    double qs = 0.0;  // 0 => grid estimate
    std::uint64_t seed = 0;

    void validate() const {
        if (!(rho_max > 0) || !(eps6 > 0)) throw std::invalid_argument("invalid backward map config");
    }
};

/// Projected gradient descent for the conjugate-dual (backward) mapping of
/// mean parameters to canonical parameters: iterates
/// rho <- Pi_box(rho - xi (nu_hat(rho) - upsilon_hat)), returning rho^(tau3+1).
inline Eigen::VectorXd backward_map(const BasisFamily& basis, const Eigen::VectorXd& upsilon_hat,
                                    double lo, double hi, const BackwardMapConfig& config) {
    config.validate();
    if (upsilon_hat.size() != basis.k) throw std::invalid_argument("upsilon length != k");
    const int k = basis.k;
    const double phimax = basis.phi_max(lo, hi);
    const double smooth = 2.0 * k * phimax * phimax;
    const double xi = config.xi > 0 ? config.xi : 1.0 / smooth;

    long tau3 = config.tau3;
    if (tau3 < 1) {
        double qs = config.qs;
        if (qs <= 0) qs = estimate_qs(basis, lo, hi, config.rho_max);
        double cbar3 = 0.0;
        if (!config.quadrature_mode) {
            const double e5 = config.eps5;
            cbar3 = 4.0 * k * e5 * (e5 + 2.0 * smooth * config.rho_max + 2.0 * phimax) /
                    (qs * smooth);
        }
        const double denom = config.eps6 * config.eps6 - cbar3;
        if (!(denom > 0))
            throw std::invalid_argument("eps6 too small for the configured mean accuracy");
        const double v = smooth / qs * std::log(k * config.rho_max * config.rho_max / denom);
        tau3 = static_cast<long>(std::ceil(std::max(1.0, v)));
    }
    long tau1 = config.tau1, tau2 = config.tau2;
    if (!config.quadrature_mode && (tau1 < 1 || tau2 < 1)) {
        const double b_l = hi - lo, b_u = hi - lo;
        tau1 = mrw_tau1(config.eps5, k, config.rho_max, phimax, b_l, b_u);
        tau2 = mrw_tau2(config.eps5, config.delta5 / double(tau3), phimax);
    }

    Eigen::VectorXd rho = Eigen::VectorXd::Zero(k);
    for (long r = 0; r <= tau3; ++r) {
        const Eigen::VectorXd nu =
            config.quadrature_mode
                ? quadrature_mean(basis, rho, lo, hi, config.quad_nodes)
                : mrw_mean_estimate(basis, rho, lo, hi, tau1, tau2,
                                    config.seed + static_cast<std::uint64_t>(r) * 0x9e37ULL);
        rho -= xi * (nu - upsilon_hat);
        for (int j = 0; j < k; ++j)
            rho[j] = std::min(config.rho_max, std::max(-config.rho_max, rho[j]));
    }
    return rho;
}

// ---------------------------------------------------------------------------
// Node-parameter assembly
// ---------------------------------------------------------------------------

/// theta_hat_r = lambda_hat_r - sum_{j in N(i)} sum_s Theta_hat^(ij)_{rs} phi_s(x_j^z).
/// Edge blocks are read from node i's stacked estimate.
inline Eigen::VectorXd recover_node_params(const Eigen::VectorXd& lambda_hat,
                                           const Eigen::VectorXd& vertex, int p, int k, int i,
                                           const std::vector<int>& neighbors,
                                           const BasisFamily& basis, const Eigen::VectorXd& x_z) {
    if (lambda_hat.size() != k) throw std::invalid_argument("lambda length != k");
    VertexLayout layout(p, k, i);
    if (vertex.size() != layout.dim()) throw std::invalid_argument("vertex dimension mismatch");
    if (x_z.size() != p) throw std::invalid_argument("sample point dimension mismatch");
    Eigen::VectorXd theta = lambda_hat;
    Eigen::VectorXd f(k);
    for (int j : neighbors) {
        basis.eval(x_z[j], f.data());
        const auto blk = layout.edge_block(vertex, j);
        theta -= blk * f;
    }
    return theta;
}

struct NodePipelineConfig {
    double t = 0.0;          // 0 => 0.1 * b_u
    int average_over_z = 1;  // repeats of the single-z pipeline, averaged
    BackwardMapConfig backward;
    long lasso_max_iters = 200000;
    double lasso_tol = 0.0;
    std::uint64_t seed = 0;
};

struct NodePipelineResult {
    Eigen::MatrixXd node_params;  // p x k
    std::vector<std::vector<long>> z_rows;
};

/// Three-step node recovery for every node: binned sparse regression of the
/// conditional means, backward mapping to canonical parameters, subtraction
/// of the estimated edge contributions at the reference sample.
inline NodePipelineResult full_node_pipeline(const RowMatrix& samples, const BasisFamily& basis,
                                             const Domain& domain,
                                             const std::vector<GriseSolution>& solutions,
                                             const EdgeSet& edges, double theta_max,
                                             int degree_bound, const NodePipelineConfig& config) {
    const int p = domain.size();
    const int k = basis.k;
    const long n = samples.rows();
    if (static_cast<int>(solutions.size()) != p)
        throw std::invalid_argument("one GRISE solution per node required");
    if (n < 1) throw std::invalid_argument("empty sample matrix");
    const double t = config.t > 0 ? config.t : 0.1 * domain.b_u;

    NodePipelineResult result;
    result.node_params.resize(p, k);
    result.z_rows.assign(p, {});
    for (int i = 0; i < p; ++i) {
        std::vector<long>& zr = result.z_rows[i];
        RngStream rng(config.seed, 0x7a5eedULL + static_cast<std::uint64_t>(i));
        for (int rep = 0; rep < std::max(1, config.average_over_z); ++rep)
            zr.push_back(static_cast<long>(rng.next_below(static_cast<std::uint64_t>(n))));
    }

    parallel_for(p, [&](long li) {
        const int i = static_cast<int>(li);
        std::vector<int> nbrs;
        for (const auto& [a, b] : edges) {
            if (a == i) nbrs.push_back(b);
            else if (b == i) nbrs.push_back(a);
        }
        const auto est = estimate_conditional_means(samples, basis, domain, i, nbrs, t,
                                                    result.z_rows[i], degree_bound,
                                                    config.lasso_max_iters, config.lasso_tol);
        BackwardMapConfig bw = config.backward;
        if (bw.rho_max <= 0) {
            // covers the canonical parameters: |lambda_r| <= theta_max (1 + k d phi_max)
            const double phimax = basis.phi_max(domain.lo[i], domain.hi[i]);
            bw.rho_max = theta_max * (1.0 + k * degree_bound * phimax);
        }
        bw.seed = config.seed ^ (0xbacc00ULL + static_cast<std::uint64_t>(i));
        Eigen::VectorXd theta_acc = Eigen::VectorXd::Zero(k);
        for (size_t zi = 0; zi < result.z_rows[i].size(); ++zi) {
            const Eigen::VectorXd mu = est.mu.row(static_cast<long>(zi)).transpose();
            const Eigen::VectorXd lambda =
                backward_map(basis, mu, domain.lo[i], domain.hi[i], bw);
            const Eigen::VectorXd x_z = samples.row(result.z_rows[i][zi]).transpose();
            theta_acc += recover_node_params(lambda, solutions[i].vertex, p, k, i, nbrs, basis,
                                             x_z);
        }
        result.node_params.row(i) =
            (theta_acc / double(result.z_rows[i].size())).transpose();
    });
    return result;
}

}  // namespace mrfscreen
