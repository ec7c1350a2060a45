#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mrisk/math.hpp"
#include "mrisk/rng.hpp"

namespace mrisk {

class UnboundedFunctional : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Mixture law on R: point masses plus standard Gaussian / standard Cauchy
// components (each component may carry its own scale).
struct MarginalLaw {
    struct Atom {
        double weight;
        double location;
    };
    enum class ContKind { Gaussian, Cauchy };
    struct Continuous {
        double weight;
        ContKind kind;
        double sigma = 1.0;  // scale of the component
    };

    std::vector<Atom> atoms;
    std::vector<Continuous> components;

    static MarginalLaw point_mass(double x = 0.0) { return {{{1.0, x}}, {}}; }
    static MarginalLaw gaussian(double sigma = 1.0) {
        return {{}, {{1.0, ContKind::Gaussian, sigma}}};
    }
    static MarginalLaw sparse_gaussian(double w0, double sigma = 1.0) {
        return {{{w0, 0.0}}, {{1.0 - w0, ContKind::Gaussian, sigma}}};
    }
    static MarginalLaw sparse_cauchy(double w0, double sigma = 1.0) {
        return {{{w0, 0.0}}, {{1.0 - w0, ContKind::Cauchy, sigma}}};
    }

    void validate() const {
        double total = 0.0;
        for (const auto& a : atoms) {
            if (a.weight < 0) throw std::invalid_argument("law: negative atom weight");
            total += a.weight;
        }
        for (const auto& c : components) {
            if (c.weight < 0) throw std::invalid_argument("law: negative component weight");
            if (!(c.sigma > 0)) throw std::invalid_argument("law: component scale must be positive");
            total += c.weight;
        }
        if (std::abs(total - 1.0) > 1e-12)
            throw std::invalid_argument("law: weights must sum to 1, got " + std::to_string(total));
    }

    bool has_cauchy() const {
        for (const auto& c : components)
            if (c.kind == ContKind::Cauchy) return true;
        return false;
    }

    bool has_continuous() const { return !components.empty(); }

    double continuous_weight() const {
        double w = 0.0;
        for (const auto& c : components) w += c.weight;
        return w;
    }

    // P(W != 0)
    double prob_nonzero() const {
        double p = continuous_weight();
        for (const auto& a : atoms)
            if (a.location != 0.0) p += a.weight;
        return p;
    }

    double second_moment() const {
        double m = 0.0;
        for (const auto& a : atoms) m += a.weight * a.location * a.location;
        for (const auto& c : components) {
            if (c.kind == ContKind::Cauchy) return kInf;
            m += c.weight * c.sigma * c.sigma;
        }
        return m;
    }

    double cdf(double x) const {
        double p = 0.0;
        for (const auto& a : atoms)
            if (a.location <= x) p += a.weight;
        for (const auto& c : components) {
            double u = x / c.sigma;
            p += c.weight *
                 (c.kind == ContKind::Gaussian ? norm_cdf(u)
                                               : 0.5 + std::atan(u) / kPi);
        }
        return p;
    }

    // P(|W| > q) as a function of q (right-continuous, non-increasing)
    double tail_abs(double q) const {
        double p = 0.0;
        for (const auto& a : atoms)
            if (std::abs(a.location) > q) p += a.weight;
        for (const auto& c : components) {
            double u = q / c.sigma;
            p += c.weight * (c.kind == ContKind::Gaussian
                                 ? 2.0 * norm_cdf(-u)
                                 : 1.0 - 2.0 * std::atan(u) / kPi);
        }
        return p;
    }

    // inf { q >= 0 : P(|W| > q) <= x }
    double quantile_abs(double x) const {
        if (x >= tail_abs(0.0)) return 0.0;
        if (x <= 0.0) throw std::invalid_argument("quantile_abs: x must be positive");
        double lo = 0.0, hi = 1.0;
        while (tail_abs(hi) > x) hi *= 2.0;
        for (int it = 0; it < 200 && hi - lo > 1e-10 * (1.0 + hi); ++it) {
            double mid = 0.5 * (lo + hi);
            if (tail_abs(mid) > x) lo = mid; else hi = mid;
        }
        return hi;
    }

    // One draw from the law given three uniforms and a standard normal.
    double draw(double u_select, double gauss, double u_aux) const {
        double acc = 0.0;
        for (const auto& a : atoms) {
            acc += a.weight;
            if (u_select < acc) return a.location;
        }
        for (const auto& c : components) {
            acc += c.weight;
            if (u_select < acc) {
                if (c.kind == ContKind::Gaussian) return c.sigma * gauss;
                return c.sigma * std::tan(kPi * (u_aux - 0.5));
            }
        }
        // u_select ~ 1 within rounding: last component
        if (!components.empty()) {
            const auto& c = components.back();
            if (c.kind == ContKind::Gaussian) return c.sigma * gauss;
            return c.sigma * std::tan(kPi * (u_aux - 0.5));
        }
        return atoms.back().location;
    }
};

inline std::vector<double> sample(const MarginalLaw& law, std::size_t n, std::uint64_t seed,
                                  std::uint64_t stream_id = 0) {
    Philox rng(seed, stream_id);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto d = gauss_draw(rng, 0, i);
        out[i] = law.draw(d.u_select, d.g, d.u_aux);
    }
    return out;
}

// Functional of (G, W) with G ~ N(0,1) independent of W ~ law.
struct Integrand {
    std::function<double(double, double)> phi;  // phi(g, w)
    // optional: kink locations in g for fixed w (enables segment splitting)
    std::function<std::vector<double>(double)> g_kinks;
    // optional: kink locations in w for fixed g; together with g_coeff this
    // lets the engine integrate the variable in which the kinks move fastest
    // with the split rule and the slow one with Gauss-Hermite
    std::function<std::vector<double>(double)> w_kinks;
    double g_coeff = 1.0;              // kink speed in g relative to w
    bool bounded_by_quadratic = true;  // |phi| <= C (1 + g^2 + w^2)
    bool bounded = false;              // sup |phi| < inf (allows Cauchy without the flag below)
    bool cauchy_safe = false;          // integrable against Cauchy tails even if unbounded
};

struct ExpectValue {
    double value = 0.0;
    double error_estimate = 0.0;
};

// Deterministic mixed quadrature / Monte Carlo expectation engine.
//
// Atoms are handled exactly; Gaussian components by Gauss-Hermite in w with a
// kink-split Gauss-Legendre inner rule in g; Cauchy components by Monte Carlo
// over the joint pair. Results are bit-identical for a fixed seed regardless
// of how many workers the MC part is split into.
class ExpectationEngine {
public:
    int gh_nodes = 61;
    std::size_t mc_samples = 2'000'000;
    std::uint64_t master_seed = 0;
    int workers = 1;
    bool with_error = true;  // rerun quadrature at half resolution for an error estimate

    ExpectValue expect_gw(const Integrand& f, const MarginalLaw& law) const {
        law.validate();
        if (law.has_cauchy() && !(f.bounded || f.cauchy_safe))
            throw UnboundedFunctional(
                "expect_gw: functional not flagged integrable against Cauchy tails");

        ExpectValue out;
        for (const auto& a : law.atoms) {
            ExpectValue e = gauss_inner(f, a.location, gh_nodes);
            out.value += a.weight * e.value;
            if (with_error) {
                ExpectValue e2 = gauss_inner(f, a.location, gh_nodes / 2 + 1);
                out.error_estimate += a.weight * std::abs(e.value - e2.value);
            }
        }
        for (const auto& c : law.components) {
            if (c.kind == MarginalLaw::ContKind::Gaussian) {
                ExpectValue e = gauss_component(f, c.sigma, gh_nodes);
                out.value += c.weight * e.value;
                if (with_error) {
                    ExpectValue e2 = gauss_component(f, c.sigma, gh_nodes / 2 + 1);
                    out.error_estimate +=
                        c.weight * (std::abs(e.value - e2.value) + e.error_estimate);
                }
            } else {
                ExpectValue e = cauchy_component(f, c.sigma);
                out.value += c.weight * e.value;
                out.error_estimate += c.weight * e.error_estimate;
            }
        }
        return out;
    }

private:
    // E[phi(G, w0)] for fixed w0, splitting at the integrand's g-kinks.
    ExpectValue gauss_inner(const Integrand& f, double w0, int n) const {
        std::vector<double> cuts{-10.0, 10.0};
        if (f.g_kinks) {
            for (double k : f.g_kinks(w0))
                if (k > -10.0 && k < 10.0) cuts.push_back(k);
        }
        std::sort(cuts.begin(), cuts.end());
        const QuadRule& gl = gauss_legendre(std::max(8, n / 2));
        double total = 0.0;
        constexpr double inv_sqrt2pi = 0.3989422804014326779;
        for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
            double a = cuts[s], b = cuts[s + 1];
            int pieces = std::max(1, static_cast<int>(std::ceil((b - a) / 2.5)));
            double h = (b - a) / pieces;
            for (int p = 0; p < pieces; ++p) {
                double lo = a + p * h, half = 0.5 * h;
                double mid = lo + half;
                double acc = 0.0;
                for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
                    double g = mid + half * gl.nodes[i];
                    acc += gl.weights[i] * f.phi(g, w0) * std::exp(-0.5 * g * g);
                }
                total += acc * half * inv_sqrt2pi;
            }
        }
        return {total, 0.0};
    }

    // E[phi(g0, sigma W')] over W' ~ N(0,1), splitting at the integrand's
    // w-kinks. Used when the kinks move faster in w than in g.
    ExpectValue w_inner(const Integrand& f, double g0, double sigma, int n) const {
        std::vector<double> cuts{-10.0, 10.0};
        if (f.w_kinks) {
            for (double k : f.w_kinks(g0)) {
                double ks = k / sigma;
                if (ks > -10.0 && ks < 10.0) cuts.push_back(ks);
            }
        }
        std::sort(cuts.begin(), cuts.end());
        const QuadRule& gl = gauss_legendre(std::max(8, n / 2));
        double total = 0.0;
        constexpr double inv_sqrt2pi = 0.3989422804014326779;
        for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
            double a = cuts[s], b = cuts[s + 1];
            int pieces = std::max(1, static_cast<int>(std::ceil((b - a) / 2.5)));
            double h = (b - a) / pieces;
            for (int p = 0; p < pieces; ++p) {
                double lo = a + p * h, half = 0.5 * h;
                double mid = lo + half;
                double acc = 0.0;
                for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
                    double ws = mid + half * gl.nodes[i];
                    acc += gl.weights[i] * f.phi(g0, sigma * ws) * std::exp(-0.5 * ws * ws);
                }
                total += acc * half * inv_sqrt2pi;
            }
        }
        return {total, 0.0};
    }

    ExpectValue gauss_component(const Integrand& f, double sigma, int n) const {
        const QuadRule& gh = gauss_hermite_prob(n);
        ExpectValue out;
        // split the fast-kink variable, Gauss-Hermite the slow one
        bool swap = f.w_kinks && std::abs(f.g_coeff) < sigma;
        for (std::size_t i = 0; i < gh.nodes.size(); ++i) {
            ExpectValue inner = swap ? w_inner(f, gh.nodes[i], sigma, gh_nodes)
                                     : gauss_inner(f, sigma * gh.nodes[i], gh_nodes);
            out.value += gh.weights[i] * inner.value;
        }
        return out;
    }

    ExpectValue cauchy_component(const Integrand& f, double sigma) const {
        constexpr std::size_t kBlock = 4096;
        std::size_t blocks = (mc_samples + kBlock - 1) / kBlock;
        double sum = 0.0, sum_sq = 0.0;
        std::size_t count = 0;
        // fixed block -> worker assignment and per-block partial sums keep the
        // reduction order independent of the worker count
        for (std::size_t b = 0; b < blocks; ++b) {
            Philox rng(master_seed, 0x9E3779B97F4A7C15ULL ^ b);
            double bs = 0.0, bss = 0.0;
            std::size_t lo = b * kBlock, hi = std::min(mc_samples, lo + kBlock);
            for (std::size_t i = lo; i < hi; ++i) {
                auto d = gauss_draw(rng, 0, i - lo);
                double w = sigma * std::tan(kPi * (d.u_aux - 0.5));
                double v = f.phi(d.g, w);
                bs += v;
                bss += v * v;
            }
            sum += bs;
            sum_sq += bss;
            count += hi - lo;
        }
        double mean = sum / count;
        double var = std::max(0.0, sum_sq / count - mean * mean);
        double se = std::sqrt(var / count);
        return {mean, 3.0 * se};
    }
};

}  // namespace mrisk
