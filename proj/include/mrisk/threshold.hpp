#pragma once

#include <cmath>
#include <stdexcept>

#include "mrisk/marginals.hpp"
#include "mrisk/math.hpp"
#include "mrisk/scalar_convex.hpp"

namespace mrisk {

class DegenerateNoise : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// E[dist(G, t * subdiff f(W))^2] with G ~ N(0,1) independent of W ~ law.
// Exact in G: for the interval [a, b] = t * subdiff f(w),
//   E[dist(G, [a,b])^2] = (1+b^2) Phi(-b) - b phi(b) + (1+a^2) Phi(a) + a phi(a).
// On a continuous component f is differentiable a.e., so the interval is a
// point d and the contribution is 1 + t^2 E[f'(W)^2] (via quadrature / MC).
namespace detail {

// E[f'(W)^2] over one continuous component (the derivative is bounded by the
// Lipschitz constant, so Monte Carlo over a Cauchy component is safe).
inline double deriv_sq_moment(const ScalarConvexFunction& f, const MarginalLaw::Continuous& c,
                              const ExpectationEngine& engine) {
    if (c.kind == MarginalLaw::ContKind::Gaussian) {
        const QuadRule& gh = gauss_hermite_prob(engine.gh_nodes);
        double m2 = 0.0;
        for (std::size_t i = 0; i < gh.nodes.size(); ++i) {
            double d = f.subdiff(c.sigma * gh.nodes[i]).lo;
            m2 += gh.weights[i] * d * d;
        }
        return m2;
    }
    Integrand integ;
    integ.bounded = true;
    integ.phi = [&f](double, double w) {
        double d = f.subdiff(w).lo;
        return d * d;
    };
    MarginalLaw sub;
    sub.components.push_back({1.0, MarginalLaw::ContKind::Cauchy, c.sigma});
    return engine.expect_gw(integ, sub).value;
}

// J(t) with the t-independent component moments precomputed.
class DistSqCurve {
public:
    DistSqCurve(const ScalarConvexFunction& f, const MarginalLaw& law,
                const ExpectationEngine& engine)
        : f_(f), law_(law) {
        for (const auto& c : law.components)
            moments_.push_back(deriv_sq_moment(f, c, engine));
    }

    double operator()(double t) const {
        double total = 0.0;
        for (const auto& at : law_.atoms) {
            SubdiffInterval s = f_.subdiff(at.location);
            double a = t * s.lo, b = t * s.hi;
            total += at.weight * (expected_pos_part_sq(b) + expected_pos_part_sq(-a));
        }
        for (std::size_t i = 0; i < law_.components.size(); ++i)
            total += law_.components[i].weight * (1.0 + t * t * moments_[i]);
        return total;
    }

private:
    ScalarConvexFunction f_;
    MarginalLaw law_;
    std::vector<double> moments_;
};

}  // namespace detail

inline double expected_dist_sq(const ScalarConvexFunction& f, const MarginalLaw& law, double t,
                               const ExpectationEngine& engine = {}) {
    law.validate();
    if (!(t > 0)) throw std::invalid_argument("expected_dist_sq: t must be positive");
    return detail::DistSqCurve(f, law, engine)(t);
}

struct JMin {
    double t = 0.0;     // argmin (0 means the infimum is attained in the t -> 0 limit)
    double value = 1.0;  // inf_t E[dist(G, t subdiff f(W))^2], always <= 1
    bool boundary = false;
};

// J(t) = E[dist(G, t subdiff f(W))^2] is convex in t with J(0+) = 1; minimize
// over log t. Pure quadratic behaviour near 0 (differentiable f) gives the
// analytic boundary value 1.
inline JMin minimize_j(const ScalarConvexFunction& f, const MarginalLaw& law,
                       const ExpectationEngine& engine = {}) {
    law.validate();
    detail::DistSqCurve curve(f, law, engine);
    auto J = [&](double logt) { return curve(std::exp(logt)); };
    GoldenResult r = golden_min(J, std::log(1e-8), std::log(1e8), 1e-12, 300);
    JMin out;
    if (r.value >= 1.0 - 1e-12 || r.x <= std::log(1e-8) + 1e-6) {
        out.t = 0.0;
        out.value = std::min(1.0, r.value);
        out.boundary = true;
    } else {
        out.t = std::exp(r.x);
        out.value = r.value;
        out.boundary = r.x >= std::log(1e8) - 1e-6;
    }
    return out;
}

struct PerfectThreshold {
    double delta = kInf;
    bool infinite = false;    // j_min within 1e-12 of 1 (denominator vanishes)
    bool borderline = false;  // minimizer pinned at the search boundary
    double j_loss = 1.0;      // inf_t E[dist(G, t subdiff loss(Z))^2]
    double j_reg = 1.0;       // numerator for the regularized case
};

// Unregularized perfect-recovery threshold: delta_* = 1 / (1 - j_min).
inline PerfectThreshold delta_perfect_unreg(const ScalarConvexFunction& loss,
                                            const MarginalLaw& noise,
                                            const ExpectationEngine& engine = {}) {
    if (noise.prob_nonzero() <= 0.0)
        throw DegenerateNoise("delta_perfect: noise is identically zero");
    JMin j = minimize_j(loss, noise, engine);
    PerfectThreshold out;
    out.j_loss = j.value;
    out.borderline = j.boundary && j.t != 0.0;
    if (j.value >= 1.0 - 1e-12) {
        out.infinite = true;
        out.delta = kInf;
    } else {
        out.delta = 1.0 / (1.0 - j.value);
    }
    return out;
}

// Regularized threshold: delta_* = inf_t E[dist(H, t subdiff reg(X))^2]
//                                  / (1 - inf_t E[dist(G, t subdiff loss(Z))^2]).
inline PerfectThreshold delta_perfect_reg(const ScalarConvexFunction& loss,
                                          const MarginalLaw& noise,
                                          const ScalarConvexFunction& reg,
                                          const MarginalLaw& signal,
                                          const ExpectationEngine& engine = {}) {
    if (noise.prob_nonzero() <= 0.0)
        throw DegenerateNoise("delta_perfect: noise is identically zero");
    JMin jl = minimize_j(loss, noise, engine);
    JMin jr = minimize_j(reg, signal, engine);
    PerfectThreshold out;
    out.j_loss = jl.value;
    out.j_reg = jr.value;
    out.borderline = (jl.boundary && jl.t != 0.0) || (jr.boundary && jr.t != 0.0);
    if (jl.value >= 1.0 - 1e-12) {
        out.infinite = true;
        out.delta = kInf;
    } else {
        out.delta = jr.value / (1.0 - jl.value);
    }
    return out;
}

// ---------------------------------------------------------------------------
// A priori upper bounds on the solution size alpha*.
// ---------------------------------------------------------------------------

namespace detail {

// Small-ball constant c_delta used in the coercivity argument.
inline double c_delta_unreg(double delta) {
    if (!(delta > 1.0)) throw std::invalid_argument("alpha bound: requires delta > 1");
    double r = 1.0 - 1.0 / delta;             // in (0, 1)
    double c1 = norm_quantile(1.0 - r / 8.0);  // P(|G| > c1) <= r/4
    double ctil = 2.0 * c1 / std::sqrt(r);
    double cs = std::min({1.0, 1.0 / (2.0 * ctil), 0.75 / (ctil * ctil)});
    return std::min(cs * cs * std::sqrt(r) / 4.0, std::pow(cs, 4) / 16.0);
}

}  // namespace detail

struct AlphaBound {
    double alpha_max = kInf;
    bool finite = false;
};

// Unregularized:  alpha* <= (L / (a c)) q(c a^2 / L^2) + b / (a c)  where
// (a, b) is the coercivity pair of the loss, L its Lipschitz constant,
// q the |Z|-quantile function of the noise and c the small-ball constant.
inline AlphaBound alpha_upper_bound_unreg(const ScalarConvexFunction& loss,
                                          const MarginalLaw& noise, double delta) {
    AlphaBound out;
    double L = loss.lipschitz();
    if (L == kInf || !(delta > 1.0)) return out;
    CoercivityPair cp = loss.coercivity();
    if (!(cp.a > 0)) return out;
    double c = detail::c_delta_unreg(delta);
    double x = c * cp.a * cp.a / (L * L);
    double q = noise.quantile_abs(std::min(x, noise.tail_abs(0.0) * (1.0 - 1e-15) + 1e-300));
    if (x >= noise.tail_abs(0.0)) q = 0.0;
    out.alpha_max = (L / (cp.a * c)) * q + cp.b / (cp.a * c);
    out.finite = true;
    return out;
}

namespace detail {

// Regularized small-ball constant: the loss part concentrates as in the
// unregularized case while the reg part needs truncation levels M_a, M_b, M_c
// controlling the Gaussian tail of the design.
inline double c_delta_reg(double delta) {
    double idel = 1.0 / delta;
    auto level = [&](double target) {
        double lo = 0.0, hi = 40.0;
        for (int it = 0; it < 200; ++it) {
            double mid = 0.5 * (lo + hi);
            if (std::sqrt((1.0 + idel) * gauss_sq_tail(mid)) > target) lo = mid; else hi = mid;
        }
        return hi;
    };
    double ma = level(0.5);
    double mb = level(0.25);
    double mc_lvl = 0.0;
    {
        double target = std::sqrt(delta) / 4.0;
        double lo = 0.0, hi = 40.0;
        for (int it = 0; it < 200; ++it) {
            double mid = 0.5 * (lo + hi);
            if (std::sqrt(gauss_sq_tail(mid)) > target) lo = mid; else hi = mid;
        }
        mc_lvl = hi;
    }
    double c_l12 = std::max(4.0 * std::sqrt(1.0 + idel) * ma, 8.0 * (mb + mc_lvl));
    // Paley-Zygmund small-ball step, as in the unregularized chain with
    // C1 replaced by c_l12
    double ctil = c_l12;
    double cs = std::min({1.0, 1.0 / (2.0 * ctil), 0.75 / (ctil * ctil)});
    return std::min(cs * cs / 4.0, std::pow(cs, 4) / 16.0);
}

}  // namespace detail

// Regularized: with A = min(delta * a_loss, a_reg), Ltot = delta * L_loss +
// L_reg, B = delta * b_loss + b_reg and C the regularized small-ball constant,
//   alpha* <= (2 / (A C^2)) (2 Ltot q(C^4 A^2 / (36 Ltot^2)) + B),
// q again the |Z|-quantile of the noise.
inline AlphaBound alpha_upper_bound_reg(const ScalarConvexFunction& loss,
                                        const MarginalLaw& noise,
                                        const ScalarConvexFunction& reg, double delta) {
    AlphaBound out;
    double Ll = loss.lipschitz(), Lr = reg.lipschitz();
    if (Ll == kInf || Lr == kInf || !(delta > 0.0)) return out;
    CoercivityPair cl = loss.coercivity();
    CoercivityPair cr = reg.coercivity();
    double A = std::min(delta * cl.a, cr.a);
    if (!(A > 0)) return out;
    double Ltot = delta * Ll + Lr;
    double B = delta * cl.b + cr.b;
    double C = detail::c_delta_reg(delta);
    double x = std::pow(C, 4) * A * A / (36.0 * Ltot * Ltot);
    double q = x >= noise.tail_abs(0.0) ? 0.0 : noise.quantile_abs(x);
    out.alpha_max = (2.0 / (A * C * C)) * (2.0 * Ltot * q + B);
    out.finite = true;
    return out;
}

}  // namespace mrisk
