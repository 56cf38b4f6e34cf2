#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "mrfscreen/basis.hpp"
#include "mrfscreen/quadrature.hpp"

namespace mrfscreen {

/// Per-variable closed intervals plus global bounds on interval lengths.
struct Domain {
    std::vector<double> lo, hi;
    double b_l = 0.0, b_u = 0.0;

    Domain() = default;

    /// p copies of the symmetric interval [-b, b].
    static Domain symmetric(int p, double b) {
        Domain d;
        d.lo.assign(p, -b);
        d.hi.assign(p, b);
        d.b_l = d.b_u = 2.0 * b;
        return d;
    }

    int size() const { return static_cast<int>(lo.size()); }

    void validate() const {
        if (lo.size() != hi.size()) throw std::invalid_argument("domain lo/hi size mismatch");
        if (!(b_l > 0)) throw std::invalid_argument("domain requires b_l > 0");
        for (size_t i = 0; i < lo.size(); ++i) {
            const double len = hi[i] - lo[i];
            if (!(len >= b_l - 1e-12 && len <= b_u + 1e-12))
                throw std::invalid_argument("interval length outside [b_l, b_u]");
        }
    }

    bool contains(int i, double x) const { return x >= lo[i] && x <= hi[i]; }

    void check(int i, double x) const {
        if (!contains(i, x))
            throw std::domain_error("value outside variable domain");
    }

    void check_point(const Eigen::VectorXd& x) const {
        if (x.size() != size()) throw std::invalid_argument("point dimension mismatch");
        for (int i = 0; i < size(); ++i) check(i, x[i]);
    }
};

/// Coordinate layout of the per-node stacked parameter/feature vector:
/// k node entries, then one k*k block per other node j in ascending order,
/// row-major in (r, s) with r indexing this node's basis.
struct VertexLayout {
    int p = 0, k = 0, node = 0;

    VertexLayout(int p_, int k_, int node_) : p(p_), k(k_), node(node_) {
        if (node < 0 || node >= p) throw std::invalid_argument("node index out of range");
    }

    int dim() const { return k + k * k * (p - 1); }

    /// Offset of the edge block toward node j (j != node).
    int edge_offset(int j) const {
        if (j == node || j < 0 || j >= p) throw std::invalid_argument("bad edge node index");
        const int slot = j < node ? j : j - 1;
        return k + slot * k * k;
    }

    int edge_entry(int j, int r, int s) const { return edge_offset(j) + r * k + s; }

    /// k*k block toward node j as a row-major matrix view.
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
    edge_block(const Eigen::VectorXd& v, int j) const {
        return {v.data() + edge_offset(j), k, k};
    }
};

/// Full pairwise MRF specification. Immutable after construction in spirit:
/// all operations below are pure functions of it.
struct ModelSpec {
    int p = 0;
    BasisFamily basis;
    Domain domain;
    std::vector<Eigen::VectorXd> node_params;          // p vectors of length k
    std::map<std::pair<int, int>, Eigen::MatrixXd> edges;  // (i<j) -> k x k block
    double theta_max = 1.0, theta_min = 0.1;
    int d = 0;  // max-degree bound; >= realized degree

    int k() const { return basis.k; }

    int degree(int i) const {
        int deg = 0;
        for (const auto& [key, blk] : edges) {
            (void)blk;
            if (key.first == i || key.second == i) ++deg;
        }
        return deg;
    }

    int max_degree() const {
        int m = 0;
        for (int i = 0; i < p; ++i) m = std::max(m, degree(i));
        return m;
    }

    std::vector<int> neighbors(int i) const {
        std::vector<int> out;
        for (const auto& [key, blk] : edges) {
            (void)blk;
            if (key.first == i) out.push_back(key.second);
            else if (key.second == i) out.push_back(key.first);
        }
        std::sort(out.begin(), out.end());
        return out;
    }

    const Eigen::MatrixXd* edge_block(int i, int j) const {
        const auto it = edges.find({std::min(i, j), std::max(i, j)});
        return it == edges.end() ? nullptr : &it->second;
    }

    /// gamma = theta_max * (k + k^2 d): l1 budget of any per-node stack.
    double gamma() const { return theta_max * (k() + double(k()) * k() * d); }

    double phi_max() const {
        double m = 0.0;
        for (int i = 0; i < p; ++i) m = std::max(m, basis.phi_max(domain.lo[i], domain.hi[i]));
        return m;
    }

    double phibar_max() const {
        double m = 0.0;
        for (int i = 0; i < p; ++i) m = std::max(m, basis.phibar_max(domain.lo[i], domain.hi[i]));
        return m;
    }

    /// Bound on |centered features|: (1 + b_u) max{phi_max, phi_max^2}.
    double varphi_max() const {
        const double pm = phi_max();
        return (1.0 + domain.b_u) * std::max(pm, pm * pm);
    }

    double f_lower() const { return std::exp(-2.0 * gamma() * varphi_max()) / domain.b_u; }
    double f_upper() const { return std::exp(2.0 * gamma() * varphi_max()) / domain.b_l; }

    void validate() const {
        basis.validate();
        domain.validate();
        if (p < 1) throw std::invalid_argument("p must be >= 1");
        if (domain.size() != p) throw std::invalid_argument("domain size != p");
        if (static_cast<int>(node_params.size()) != p)
            throw std::invalid_argument("node_params size != p");
        if (!(theta_max > 0) || !(theta_min > 0) || theta_min > theta_max)
            throw std::invalid_argument("need 0 < theta_min <= theta_max");
        for (const auto& v : node_params) {
            if (v.size() != k()) throw std::invalid_argument("node param length != k");
            check_magnitudes(v.data(), v.size());
        }
        for (const auto& [key, blk] : edges) {
            if (key.first >= key.second || key.first < 0 || key.second >= p)
                throw std::invalid_argument("edge indices must satisfy 0 <= i < j < p");
            if (blk.rows() != k() || blk.cols() != k())
                throw std::invalid_argument("edge block must be k x k");
            check_magnitudes(blk.data(), blk.size());
            if (blk.cwiseAbs().maxCoeff() == 0.0)
                throw std::invalid_argument("edge block must contain a nonzero entry");
        }
        if (max_degree() > d) throw std::invalid_argument("declared max degree d too small");
    }

private:
    void check_magnitudes(const double* v, Eigen::Index n) const {
        for (Eigen::Index t = 0; t < n; ++t) {
            const double a = std::abs(v[t]);
            if (a > theta_max + 1e-12)
                throw std::invalid_argument("parameter magnitude above theta_max");
            if (a != 0.0 && a < theta_min - 1e-12)
                throw std::invalid_argument("nonzero parameter magnitude below theta_min");
        }
    }
};

// ---------------------------------------------------------------------------
// Basis / feature evaluation
// ---------------------------------------------------------------------------

inline Eigen::VectorXd eval_basis(const BasisFamily& family, const Domain& domain,
                                  int i, double x) {
    domain.check(i, x);
    return family.eval(x);
}

/// phi(x) ⊗ phi(y) in row-major (r, s) order: entry r*k+s = phi_r(x) phi_s(y).
inline Eigen::VectorXd eval_edge_basis(const BasisFamily& family, const Domain& domain,
                                       int i, int j, double x, double y) {
    domain.check(i, x);
    domain.check(j, y);
    const Eigen::VectorXd fx = family.eval(x), fy = family.eval(y);
    Eigen::VectorXd out(family.k * family.k);
    for (int r = 0; r < family.k; ++r)
        for (int s = 0; s < family.k; ++s) out[r * family.k + s] = fx[r] * fy[s];
    return out;
}

/// phi(x) minus its uniform average over X_i: the locally centered basis.
inline Eigen::VectorXd centered_basis(const BasisFamily& family, const Domain& domain,
                                      int i, double x) {
    domain.check(i, x);
    return family.eval(x) - family.center_average(domain.lo[i], domain.hi[i]);
}

/// psi(x, y) centered in the first argument against the uniform density on X_i.
inline Eigen::VectorXd centered_edge_basis(const BasisFamily& family, const Domain& domain,
                                           int i, int j, double x, double y) {
    domain.check(i, x);
    domain.check(j, y);
    const Eigen::VectorXd cx =
        family.eval(x) - family.center_average(domain.lo[i], domain.hi[i]);
    const Eigen::VectorXd fy = family.eval(y);
    Eigen::VectorXd out(family.k * family.k);
    for (int r = 0; r < family.k; ++r)
        for (int s = 0; s < family.k; ++s) out[r * family.k + s] = cx[r] * fy[s];
    return out;
}

/// Stacked centered feature vector of node i at point x, in VertexLayout order.
inline void feature_vector_into(const BasisFamily& family, const Domain& domain, int i,
                                const Eigen::VectorXd& x, double* out) {
    const int k = family.k;
    const Eigen::VectorXd cx =
        family.eval(x[i]) - family.center_average(domain.lo[i], domain.hi[i]);
    for (int r = 0; r < k; ++r) out[r] = cx[r];
    int off = k;
    Eigen::VectorXd fy(k);
    const int p = domain.size();
    for (int j = 0; j < p; ++j) {
        if (j == i) continue;
        family.eval(x[j], fy.data());
        for (int r = 0; r < k; ++r)
            for (int s = 0; s < k; ++s) out[off + r * k + s] = cx[r] * fy[s];
        off += k * k;
    }
}

inline Eigen::VectorXd feature_vector(const BasisFamily& family, const Domain& domain,
                                      int i, const Eigen::VectorXd& x) {
    domain.check_point(x);
    VertexLayout layout(domain.size(), family.k, i);
    Eigen::VectorXd out(layout.dim());
    feature_vector_into(family, domain, i, x, out.data());
    return out;
}

inline Eigen::VectorXd feature_vector(const ModelSpec& model, int i, const Eigen::VectorXd& x) {
    return feature_vector(model.basis, model.domain, i, x);
}

// ---------------------------------------------------------------------------
// Density
// ---------------------------------------------------------------------------

/// Sum of node and edge potentials (log of the unnormalized density).
inline double log_density_unnormalized(const ModelSpec& model, const Eigen::VectorXd& x) {
    model.domain.check_point(x);
    const int k = model.k();
    Eigen::MatrixXd phis(k, model.p);
    for (int i = 0; i < model.p; ++i) model.basis.eval(x[i], phis.col(i).data());
    double e = 0.0;
    for (int i = 0; i < model.p; ++i) e += model.node_params[i].dot(phis.col(i));
    for (const auto& [key, blk] : model.edges)
        e += phis.col(key.first).dot(blk * phis.col(key.second));
    return e;
}

/// Stacks node i's true parameters into VertexLayout order; blocks toward
/// j < i are transposed so that the leading index always tracks node i.
inline Eigen::VectorXd assemble_vertex(const ModelSpec& model, int i) {
    const int k = model.k();
    VertexLayout layout(model.p, k, i);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(layout.dim());
    v.head(k) = model.node_params[i];
    for (int j = 0; j < model.p; ++j) {
        if (j == i) continue;
        const Eigen::MatrixXd* blk = model.edge_block(i, j);
        if (!blk) continue;
        const int off = layout.edge_offset(j);
        for (int r = 0; r < k; ++r)
            for (int s = 0; s < k; ++s)
                v[off + r * k + s] = i < j ? (*blk)(r, s) : (*blk)(s, r);
    }
    return v;
}

/// Canonical parameters of x_i | x_{-i}:
/// lambda_r = theta^(i)_r + sum_{j != i} sum_s Theta^(ij)_{rs} phi_s(x_j).
inline Eigen::VectorXd conditional_canonical(const ModelSpec& model, int i,
                                             const Eigen::VectorXd& x) {
    const int k = model.k();
    Eigen::VectorXd lambda = model.node_params[i];
    Eigen::VectorXd fy(k);
    for (int j = 0; j < model.p; ++j) {
        if (j == i) continue;
        const Eigen::MatrixXd* blk = model.edge_block(i, j);
        if (!blk) continue;
        model.domain.check(j, x[j]);
        model.basis.eval(x[j], fy.data());
        if (i < j)
            lambda += (*blk) * fy;
        else
            lambda += blk->transpose() * fy;
    }
    return lambda;
}

/// exp(lambda . phi(x_i)) normalized over X_i by fixed-order quadrature.
inline double conditional_density(const ModelSpec& model, int i, double x_i,
                                  const Eigen::VectorXd& x, int quadrature_nodes = 256) {
    if (quadrature_nodes < 64) throw std::invalid_argument("need >= 64 quadrature nodes");
    model.domain.check(i, x_i);
    const Eigen::VectorXd lambda = conditional_canonical(model, i, x);
    const int k = model.k();
    Eigen::VectorXd f(k);
    auto energy = [&](double u) {
        model.basis.eval(u, f.data());
        return lambda.dot(f);
    };
    const double shift = energy(x_i);
    const double z = integrate([&](double u) { return std::exp(energy(u) - shift); },
                               model.domain.lo[i], model.domain.hi[i], quadrature_nodes);
    if (!std::isfinite(z) || z <= 0.0)
        throw std::runtime_error("conditional density normalization failed");
    return 1.0 / z;
}

}  // namespace mrfscreen
