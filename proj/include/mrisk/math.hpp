#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <stdexcept>
#include <utility>
#include <vector>

namespace mrisk {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Standard normal density and distribution function.
inline double norm_pdf(double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * kPi);
}

inline double norm_cdf(double x) {
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

// Inverse of norm_cdf, by Newton iteration from a rational seed.
inline double norm_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("norm_quantile: p outside (0,1)");
    // Moro-style seed
    double x;
    {
        double q = p - 0.5;
        if (std::abs(q) < 0.42) {
            double r = q * q;
            x = q * (2.50662823884 + r * (-18.61500062529 + r * (41.39119773534 + r * -25.44106049637))) /
                (1.0 + r * (-8.47351093090 + r * (23.08336743743 + r * (-21.06224101826 + r * 3.13082909833))));
        } else {
            double r = q > 0 ? 1.0 - p : p;
            double s = std::log(-std::log(r));
            x = 0.3374754822726147 + s * (0.9761690190917186 + s * (0.1607979714918209 +
                s * (0.0276438810333863 + s * (0.0038405729373609 + s * (0.0003951896511919 +
                s * (0.0000321767881768 + s * (0.0000002888167364 + s * 0.0000003960315187)))))));
            if (q < 0) x = -x;
        }
    }
    for (int it = 0; it < 4; ++it) {
        double e = norm_cdf(x) - p;
        x -= e / std::max(norm_pdf(x), 1e-300);
    }
    return x;
}

// E[(G - c)_+^2] for G ~ N(0,1).
inline double expected_pos_part_sq(double c) {
    return (1.0 + c * c) * norm_cdf(-c) - c * norm_pdf(c);
}

// E[G^2 1{|G| > m}]
inline double gauss_sq_tail(double m) {
    return 2.0 * (m * norm_pdf(m) + norm_cdf(-m));
}

// ---------------------------------------------------------------------------
// Golden-section search.
// ---------------------------------------------------------------------------

struct GoldenResult {
    double x;
    double value;
};

// Minimizes a unimodal f on [a, b] to relative x-tolerance rel_tol.
inline GoldenResult golden_min(const std::function<double(double)>& f, double a, double b,
                               double rel_tol = 1e-10, int max_iter = 200) {
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = b - invphi * (b - a);
    double x2 = a + invphi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    for (int i = 0; i < max_iter && (b - a) > rel_tol * (std::abs(a) + std::abs(b) + 1e-30); ++i) {
        if (f1 <= f2) {
            b = x2; x2 = x1; f2 = f1;
            x1 = b - invphi * (b - a);
            f1 = f(x1);
        } else {
            a = x1; x1 = x2; f1 = f2;
            x2 = a + invphi * (b - a);
            f2 = f(x2);
        }
    }
    double xm = 0.5 * (a + b);
    return {xm, f(xm)};
}

inline GoldenResult golden_max(const std::function<double(double)>& f, double a, double b,
                               double rel_tol = 1e-10, int max_iter = 200) {
    auto r = golden_min([&](double x) { return -f(x); }, a, b, rel_tol, max_iter);
    return {r.x, -r.value};
}

// ---------------------------------------------------------------------------
// Gauss-Legendre and Gauss-Hermite rules, cached per node count.
// ---------------------------------------------------------------------------

struct QuadRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

// Nodes/weights on [-1, 1].
inline const QuadRule& gauss_legendre(int n) {
    static std::map<int, QuadRule> cache;
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    QuadRule r;
    r.nodes.resize(n);
    r.weights.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it2 = 0; it2 < 100; ++it2) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
            }
            pp = n * (x * p0 - p1) / (x * x - 1.0);
            double dx = p0 / pp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        r.nodes[i] = -x;
        r.nodes[n - 1 - i] = x;
        r.weights[i] = 2.0 / ((1.0 - x * x) * pp * pp);
        r.weights[n - 1 - i] = r.weights[i];
    }
    return cache.emplace(n, std::move(r)).first->second;
}

// Probabilists' Gauss-Hermite: E[f(G)] ~= sum w_i f(x_i) for G ~ N(0,1).
inline const QuadRule& gauss_hermite_prob(int n) {
    static std::map<int, QuadRule> cache;
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    // physicists' rule via Newton on H_n, then rescale by sqrt(2)
    QuadRule r;
    r.nodes.resize(n);
    r.weights.resize(n);
    const double pim4 = 0.7511255444649425;  // pi^{-1/4}
    double z = 0.0;
    int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        if (i == 0) z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -1.0 / 6.0);
        else if (i == 1) z -= 1.14 * std::pow((double)n, 0.426) / z;
        else if (i == 2) z = 1.86 * z - 0.86 * r.nodes[0];
        else if (i == 3) z = 1.91 * z - 0.91 * r.nodes[1];
        else z = 2.0 * z - r.nodes[i - 2];
        double pp = 0.0;
        for (int its = 0; its < 200; ++its) {
            double p1 = pim4, p2 = 0.0;
            for (int j = 0; j < n; ++j) {
                double p3 = p2;
                p2 = p1;
                p1 = z * std::sqrt(2.0 / (j + 1.0)) * p2 - std::sqrt((double)j / (j + 1.0)) * p3;
            }
            pp = std::sqrt(2.0 * n) * p2;
            double dz = p1 / pp;
            z -= dz;
            if (std::abs(dz) < 1e-14) break;
        }
        r.nodes[i] = z;  // store physicists' node temporarily (descending)
        r.nodes[n - 1 - i] = -z;
        double w = 2.0 / (pp * pp);
        r.weights[i] = w;
        r.weights[n - 1 - i] = w;
    }
    double wsum = 0.0;
    for (double w : r.weights) wsum += w;  // = sqrt(pi)
    for (int i = 0; i < n; ++i) {
        r.nodes[i] *= std::sqrt(2.0);
        r.weights[i] /= wsum;
    }
    return cache.emplace(n, std::move(r)).first->second;
}

}  // namespace mrisk
