#pragma once

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>
#include <vector>

namespace mrfscreen {

/// Gauss-Legendre rule on [-1, 1].
struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// Nodes by Newton iteration on P_n; cached per order.
inline const QuadratureRule& gauss_legendre(int n) {
    if (n < 1) throw std::invalid_argument("quadrature order must be >= 1");
    static std::map<int, QuadratureRule> cache;
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;

    QuadratureRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = x;
            for (int j = 2; j <= n; ++j) {
                const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes[i] = -x;
        rule.nodes[n - 1 - i] = x;
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    return cache.emplace(n, std::move(rule)).first->second;
}

/// ∫_a^b f(x) dx by an n-point Gauss-Legendre rule.
template <typename F>
double integrate(const F& f, double a, double b, int n) {
    const auto& rule = gauss_legendre(n);
    const double c = 0.5 * (b - a), m = 0.5 * (a + b);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += rule.weights[i] * f(m + c * rule.nodes[i]);
    return c * sum;
}

/// Scaled nodes/weights for [a, b], for callers that sweep grids themselves.
inline void scaled_rule(double a, double b, int n,
                        std::vector<double>& xs, std::vector<double>& ws) {
    const auto& rule = gauss_legendre(n);
    const double c = 0.5 * (b - a), m = 0.5 * (a + b);
    xs.resize(n);
    ws.resize(n);
    for (int i = 0; i < n; ++i) {
        xs[i] = m + c * rule.nodes[i];
        ws[i] = c * rule.weights[i];
    }
}

}  // namespace mrfscreen
