#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace mrfscreen {

enum class BasisKind { Polynomial, Harmonic };

inline std::string to_string(BasisKind kind) {
    return kind == BasisKind::Polynomial ? "polynomial" : "harmonic";
}

inline BasisKind basis_kind_from_string(const std::string& s) {
    if (s == "polynomial") return BasisKind::Polynomial;
    if (s == "harmonic") return BasisKind::Harmonic;
    throw std::invalid_argument("unknown basis kind: " + s);
}

/// Basis of the node-potential function space.
///
/// Polynomial: phi_r(x) = x^r, r = 1..k.
/// Harmonic:   k = 2m interleaved pairs (sin(r pi x / b), cos(r pi x / b)),
///             r = 1..m, with b the frequency scale (half-length of the
///             symmetric domain in the default setup).
struct BasisFamily {
    BasisKind kind = BasisKind::Polynomial;
    int k = 1;
    double b = 1.0;  // harmonic frequency scale; unused for polynomial

    BasisFamily() = default;
    BasisFamily(BasisKind kind_, int k_, double b_ = 1.0) : kind(kind_), k(k_), b(b_) {
        validate();
    }

    void validate() const {
        if (k < 1) throw std::invalid_argument("basis dimension k must be positive");
        if (kind == BasisKind::Harmonic) {
            if (k % 2 != 0) throw std::invalid_argument("harmonic basis requires even k");
            if (!(b > 0)) throw std::invalid_argument("harmonic scale b must be positive");
        }
    }

    int size() const { return k; }

    /// (phi_1(x), ..., phi_k(x)) into out[0..k).
    void eval(double x, double* out) const {
        if (kind == BasisKind::Polynomial) {
            double v = 1.0;
            for (int r = 0; r < k; ++r) {
                v *= x;
                out[r] = v;
            }
        } else {
            const double w = M_PI * x / b;
            for (int r = 0; r < k / 2; ++r) {
                out[2 * r] = std::sin((r + 1) * w);
                out[2 * r + 1] = std::cos((r + 1) * w);
            }
        }
    }

    Eigen::VectorXd eval(double x) const {
        Eigen::VectorXd out(k);
        eval(x, out.data());
        return out;
    }

    /// (phi_1'(x), ..., phi_k'(x)) into out[0..k).
    void eval_deriv(double x, double* out) const {
        if (kind == BasisKind::Polynomial) {
            double v = 1.0;
            out[0] = 1.0;
            for (int r = 1; r < k; ++r) {
                v *= x;
                out[r] = (r + 1) * v;
            }
        } else {
            const double w = M_PI * x / b;
            for (int r = 0; r < k / 2; ++r) {
                const double f = (r + 1) * M_PI / b;
                out[2 * r] = f * std::cos((r + 1) * w);
                out[2 * r + 1] = -f * std::sin((r + 1) * w);
            }
        }
    }

    /// sup_{x in [lo,hi]} max_r |phi_r(x)|.
    double phi_max(double lo, double hi) const {
        if (kind == BasisKind::Harmonic) return 1.0;
        const double B = std::max(std::abs(lo), std::abs(hi));
        return std::max(B, std::pow(B, k));
    }

    /// sup_{x in [lo,hi]} max_r |phi_r'(x)|.
    double phibar_max(double lo, double hi) const {
        if (kind == BasisKind::Harmonic) return (k / 2) * M_PI / b;
        const double B = std::max(std::abs(lo), std::abs(hi));
        return std::max(1.0, k * std::pow(B, k - 1));
    }

    /// Closed-form centering integrals: out[r] = ∫_lo^hi phi_r(y) dy.
    void center_integral(double lo, double hi, double* out) const {
        if (kind == BasisKind::Polynomial) {
            double plo = lo, phi_ = hi;
            for (int r = 0; r < k; ++r) {
                plo *= lo;
                phi_ *= hi;
                out[r] = (phi_ - plo) / (r + 2.0);
            }
        } else {
            for (int r = 0; r < k / 2; ++r) {
                const double f = (r + 1) * M_PI / b;
                out[2 * r] = (std::cos(f * lo) - std::cos(f * hi)) / f;
                out[2 * r + 1] = (std::sin(f * hi) - std::sin(f * lo)) / f;
            }
        }
    }

    Eigen::VectorXd center_integral(double lo, double hi) const {
        Eigen::VectorXd out(k);
        center_integral(lo, hi, out.data());
        return out;
    }

    /// Uniform average over [lo, hi]: the local centering offset. Using the
    /// average (not the plain integral) is what makes every centered basis
    /// integrate to zero against the uniform density on any interval.
    Eigen::VectorXd center_average(double lo, double hi) const {
        return center_integral(lo, hi) / (hi - lo);
    }
};

}  // namespace mrfscreen
