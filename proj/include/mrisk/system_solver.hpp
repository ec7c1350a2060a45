#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mrisk/marginals.hpp"
#include "mrisk/math.hpp"
#include "mrisk/scalar_convex.hpp"
#include "mrisk/threshold.hpp"

namespace mrisk {

enum class SolveStatus { Converged, AtZero, MaxIter };

struct SystemSolution {
    double alpha = 0.0;
    double kappa = kInf;
    double beta = 0.0;
    double nu = 0.0;
    std::vector<double> residuals;
    int iterations = 0;
    SolveStatus status = SolveStatus::Converged;
    std::vector<std::string> warnings;
};

class NoConvergence : public std::runtime_error {
public:
    NoConvergence(const std::string& msg, SystemSolution best)
        : std::runtime_error(msg), best_solution(std::move(best)) {}
    SystemSolution best_solution;
};

class InvalidAssumption : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

// E[env_loss(c G + Z; tau) - loss(Z)]
inline ExpectValue big_l(const ScalarConvexFunction& loss, const MarginalLaw& noise, double c,
                         double tau, const ExpectationEngine& engine) {
    Integrand f;
    f.phi = [&loss, c, tau](double g, double w) {
        return loss.moreau_env(c * g + w, tau) - loss.eval(w);
    };
    if (c != 0.0) {
        auto kinks = loss.prox_kinks(tau);
        f.g_kinks = [kinks, c](double w) {
            std::vector<double> out;
            for (double k : kinks) out.push_back((k - w) / c);
            return out;
        };
    }
    // env(x; tau) - loss(x) in [-Lip^2 tau / 2, 0] and loss is Lipschitz in its
    // argument, so the integrand grows at most linearly in |g|, uniformly in w
    f.cauchy_safe = loss.lipschitz() < kInf;
    return engine.expect_gw(f, noise);
}

// First two moments of the prox residual x - prox[kappa loss](x), x = alpha G + Z.
struct ProxMoments {
    ExpectValue sq;     // E[(x - prox)^2]
    ExpectValue cross;  // E[(x - prox) G]
};

inline ProxMoments prox_moments(const ScalarConvexFunction& loss, const MarginalLaw& noise,
                                double alpha, double kappa, const ExpectationEngine& engine) {
    bool lip = loss.lipschitz() < kInf;
    auto kinks = loss.prox_kinks(kappa);
    auto g_kinks = [kinks, alpha](double w) {
        std::vector<double> out;
        for (double k : kinks) out.push_back((k - w) / alpha);
        return out;
    };
    auto w_kinks = [kinks, alpha](double g) {
        std::vector<double> out;
        for (double k : kinks) out.push_back(k - alpha * g);
        return out;
    };
    Integrand f1;
    f1.phi = [&loss, alpha, kappa](double g, double w) {
        double x = alpha * g + w;
        double d = x - loss.prox(x, kappa);
        return d * d;
    };
    f1.g_kinks = g_kinks;
    f1.w_kinks = w_kinks;
    f1.g_coeff = alpha;
    f1.bounded = lip;  // |x - prox| <= kappa * Lip
    Integrand f2 = f1;
    f2.phi = [&loss, alpha, kappa](double g, double w) {
        double x = alpha * g + w;
        return (x - loss.prox(x, kappa)) * g;
    };
    f2.bounded = false;
    f2.cauchy_safe = lip;
    return {engine.expect_gw(f1, noise), engine.expect_gw(f2, noise)};
}

// Reg-side moments: P = prox[nu^{-1} reg](nu^{-1} beta H + X).
struct RegMoments {
    ExpectValue sq;     // E[(P - X)^2]
    ExpectValue cross;  // E[H (P - X)]
};

inline RegMoments reg_moments(const ScalarConvexFunction& reg, const MarginalLaw& signal,
                              double beta, double nu, const ExpectationEngine& engine) {
    double tau = 1.0 / nu;
    double c = beta / nu;
    bool lip = reg.lipschitz() < kInf;
    auto kinks = reg.prox_kinks(tau);
    auto g_kinks = [kinks, c](double w) {
        std::vector<double> out;
        for (double k : kinks) out.push_back((k - w) / c);
        return out;
    };
    auto w_kinks = [kinks, c](double h) {
        std::vector<double> out;
        for (double k : kinks) out.push_back(k - c * h);
        return out;
    };
    Integrand f1;
    f1.phi = [&reg, c, tau](double h, double w) {
        double d = reg.prox(c * h + w, tau) - w;
        return d * d;
    };
    f1.g_kinks = g_kinks;
    f1.w_kinks = w_kinks;
    f1.g_coeff = c;
    f1.cauchy_safe = lip;  // |P - X| <= c|h| + tau * Lip
    Integrand f2 = f1;
    f2.phi = [&reg, c, tau](double h, double w) {
        return h * (reg.prox(c * h + w, tau) - w);
    };
    return {engine.expect_gw(f1, signal), engine.expect_gw(f2, signal)};
}

}  // namespace detail

struct PotentialEval {
    double value = 0.0;
    double b_star = 0.0;  // inner maximizer; kappa = alpha / b_star
};

// M(alpha) = sup_{b>0} L(alpha, alpha/b) - alpha b / (2 delta), M(0) = 0.
inline PotentialEval potential_unreg_full(double alpha, const ScalarConvexFunction& loss,
                                          const MarginalLaw& noise, double delta,
                                          const ExpectationEngine& engine = {}) {
    if (!(delta > 1.0)) throw std::invalid_argument("potential_unreg: requires delta > 1");
    if (alpha == 0.0) return {0.0, 0.0};
    ExpectationEngine eng = engine;
    eng.with_error = false;
    auto obj = [&](double logb) {
        double b = std::exp(logb);
        return detail::big_l(loss, noise, alpha, alpha / b, eng).value -
               alpha * b / (2.0 * delta);
    };
    // concave in b: walk the peak into a bracket, then golden-section
    double lm = 0.0, step = std::log(2.0);
    double fm = obj(lm);
    double fl = obj(lm - step), fr = obj(lm + step);
    int guard = 0;
    while (fr > fm && guard++ < 60) {
        lm += step; fl = fm; fm = fr; fr = obj(lm + step);
    }
    while (fl > fm && guard++ < 60) {
        lm -= step; fr = fm; fm = fl; fl = obj(lm - step);
    }
    GoldenResult r = golden_max(obj, lm - step, lm + step, 1e-11, 200);
    return {r.value, std::exp(r.x)};
}

inline double potential_unreg(double alpha, const ScalarConvexFunction& loss,
                              const MarginalLaw& noise, double delta,
                              const ExpectationEngine& engine = {}) {
    return potential_unreg_full(alpha, loss, noise, delta, engine).value;
}

// Diagnostic evaluator of the regularized potential
//   M(alpha) = sup_{beta, tau_h > 0} inf_{tau_g > 0}
//     beta tau_g / 2 + delta L(alpha, tau_g/beta) - alpha tau_h / 2
//     - alpha beta^2 / (2 tau_h) + R(alpha beta / tau_h, alpha / tau_h)
// solved by coordinate ascent over (beta, tau_h) with a golden inner inf.
inline double potential_reg(double alpha, const ScalarConvexFunction& loss,
                            const ScalarConvexFunction& reg, const MarginalLaw& noise,
                            const MarginalLaw& signal, double delta,
                            const ExpectationEngine& engine = {}) {
    if (alpha == 0.0) return 0.0;
    ExpectationEngine eng = engine;
    eng.with_error = false;
    eng.gh_nodes = std::max(21, engine.gh_nodes / 2);
    auto big_r = [&](double c, double tau) {
        Integrand f;
        f.phi = [&reg, c, tau](double h, double w) {
            return reg.moreau_env(c * h + w, tau) - reg.eval(w);
        };
        f.cauchy_safe = reg.lipschitz() < kInf;
        return eng.expect_gw(f, signal).value;
    };
    auto inner = [&](double beta, double tau_h) {
        auto g = [&](double log_tg) {
            double tg = std::exp(log_tg);
            return beta * tg / 2.0 + delta * detail::big_l(loss, noise, alpha, tg / beta, eng).value;
        };
        GoldenResult r = golden_min(g, std::log(1e-6), std::log(1e6), 1e-8, 150);
        return r.value - alpha * tau_h / 2.0 - alpha * beta * beta / (2.0 * tau_h) +
               big_r(alpha * beta / tau_h, alpha / tau_h);
    };
    double lb = 0.0, lt = 0.0, val = inner(1.0, 1.0);
    for (int sweep = 0; sweep < 6; ++sweep) {
        GoldenResult rb = golden_max([&](double x) { return inner(std::exp(x), std::exp(lt)); },
                                     lb - 3.0, lb + 3.0, 1e-6, 80);
        lb = rb.x;
        GoldenResult rt = golden_max([&](double x) { return inner(std::exp(lb), std::exp(x)); },
                                     lt - 3.0, lt + 3.0, 1e-6, 80);
        lt = rt.x;
        if (std::abs(rt.value - val) < 1e-9 * (1.0 + std::abs(val)) && sweep > 1) {
            val = rt.value;
            break;
        }
        val = rt.value;
    }
    return val;
}

// ---------------------------------------------------------------------------
// Unregularized solver.
// ---------------------------------------------------------------------------

inline SystemSolution solve_unreg(const ScalarConvexFunction& loss, const MarginalLaw& noise,
                                  double delta, double tol = 1e-6,
                                  const ExpectationEngine& engine = {}) {
    if (!(delta > 1.0)) throw std::invalid_argument("solve_unreg: requires delta > 1");
    SystemSolution sol;
    auto rep = loss.validate("loss");
    sol.warnings = rep.warnings;
    if (noise.prob_nonzero() <= 0.0)
        throw DegenerateNoise("solve_unreg: noise is identically zero");

    PerfectThreshold th = delta_perfect_unreg(loss, noise, engine);
    if (delta >= th.delta) {
        // confirm with the right-derivative of the potential at 0
        double eps = 1e-4;
        double md = potential_unreg(eps, loss, noise, delta, engine) / eps;
        if (md < -1e2 * tol)
            sol.warnings.push_back("threshold test and potential derivative disagree: M'(0+)=" +
                                   std::to_string(md));
        sol.status = SolveStatus::AtZero;
        sol.alpha = 0.0;
        sol.kappa = kInf;
        sol.residuals = {0.0, 0.0};
        return sol;
    }

    ExpectationEngine eng = engine;
    eng.with_error = false;

    // the scan only needs a rough minimizer; the Newton polish below runs at
    // full resolution
    ExpectationEngine escan = eng;
    escan.gh_nodes = std::min(escan.gh_nodes, 21);
    escan.mc_samples = std::min<std::size_t>(escan.mc_samples, 200000);

    // bracket alpha* and localize with golden-section on the potential
    double hi;
    AlphaBound ub = alpha_upper_bound_unreg(loss, noise, delta);
    if (ub.finite && ub.alpha_max > 0 && std::isfinite(ub.alpha_max)) {
        hi = 2.0 * ub.alpha_max;
    } else {
        hi = 1.0;
        double guard = 0;
        while (potential_unreg(2.0 * hi, loss, noise, delta, escan) <
                   potential_unreg(hi, loss, noise, delta, escan) &&
               guard++ < 40)
            hi *= 2.0;
        hi *= 2.0;
    }
    double lo = std::min(1e-6, 1e-9 * hi);
    GoldenResult g = golden_min(
        [&](double la) { return potential_unreg(std::exp(la), loss, noise, delta, escan); },
        std::log(lo), std::log(hi), 1e-4, 200);
    double alpha0 = std::exp(g.x);
    double kappa0 =
        alpha0 / std::max(potential_unreg_full(alpha0, loss, noise, delta, escan).b_star,
                          1e-12);

    // Newton polish on the relative residuals of the two-equation system,
    // in (log alpha, log kappa)
    auto resid = [&](double la, double lk, double* floor_out) {
        double a = std::exp(la), k = std::exp(lk);
        detail::ProxMoments m = detail::prox_moments(loss, noise, a, k, eng);
        if (floor_out) {
            ExpectationEngine efull = engine;
            detail::ProxMoments mf = detail::prox_moments(loss, noise, a, k, efull);
            *floor_out = std::max(delta * mf.sq.error_estimate / (a * a),
                                  delta * mf.cross.error_estimate / a);
        }
        return std::array<double, 2>{delta * m.sq.value / (a * a) - 1.0,
                                     delta * m.cross.value / a - 1.0};
    };
    double la = std::log(alpha0), lk = std::log(kappa0);
    auto r = resid(la, lk, nullptr);
    auto norm = [](const std::array<double, 2>& v) {
        return std::max(std::abs(v[0]), std::abs(v[1]));
    };
    int iters = 0;
    for (; iters < 60 && norm(r) > 0.25 * tol; ++iters) {
        const double h = 1e-6;
        auto ra = resid(la + h, lk, nullptr);
        auto rk = resid(la, lk + h, nullptr);
        double j00 = (ra[0] - r[0]) / h, j01 = (rk[0] - r[0]) / h;
        double j10 = (ra[1] - r[1]) / h, j11 = (rk[1] - r[1]) / h;
        double det = j00 * j11 - j01 * j10;
        if (std::abs(det) < 1e-14) break;
        double da = -(j11 * r[0] - j01 * r[1]) / det;
        double dk = -(-j10 * r[0] + j00 * r[1]) / det;
        double step = 1.0;
        bool ok = false;
        for (int bt = 0; bt < 7; ++bt, step *= 0.5) {
            auto rn = resid(la + step * da, lk + step * dk, nullptr);
            if (norm(rn) < norm(r)) {
                la += step * da;
                lk += step * dk;
                r = rn;
                ok = true;
                break;
            }
        }
        if (!ok) break;
    }

    double floor = 0.0;
    r = resid(la, lk, &floor);
    sol.alpha = std::exp(la);
    sol.kappa = std::exp(lk);
    sol.residuals = {r[0], r[1]};
    sol.iterations = iters;
    double accept = std::max(tol, 3.0 * floor);
    sol.status = norm(r) <= accept ? SolveStatus::Converged : SolveStatus::MaxIter;
    if (sol.status == SolveStatus::MaxIter && norm(r) > std::max(1e-2, accept))
        throw NoConvergence("solve_unreg: residuals stalled at " + std::to_string(norm(r)), sol);
    return sol;
}

// ---------------------------------------------------------------------------
// Regularized solver.
// ---------------------------------------------------------------------------

// dist-based certificate that alpha = 0 solves the regularized problem at this
// regularization level: inf_t { E[dist(H, t drg(X))^2] + delta E[dist(G, t
// dloss(Z))^2] } <= delta. The two subdifferentials share the scale t, which
// is what ties the fixed regularization strength into the threshold ratio.
inline bool zero_certificate_reg(const ScalarConvexFunction& loss, const MarginalLaw& noise,
                                 const ScalarConvexFunction& reg, const MarginalLaw& signal,
                                 double delta, const ExpectationEngine& engine = {}) {
    detail::DistSqCurve jl(loss, noise, engine), jr(reg, signal, engine);
    auto obj = [&](double logt) {
        double t = std::exp(logt);
        return jr(t) + delta * jl(t);
    };
    GoldenResult r = golden_min(obj, std::log(1e-8), std::log(1e8), 1e-11, 300);
    return r.value <= delta * (1.0 + 1e-10);
}

inline SystemSolution solve_reg(const ScalarConvexFunction& loss,
                                const ScalarConvexFunction& reg, const MarginalLaw& noise,
                                const MarginalLaw& signal, double delta, double tol = 1e-6,
                                const ExpectationEngine& engine = {},
                                std::optional<std::array<double, 4>> init = std::nullopt) {
    if (!(delta > 0.0)) throw std::invalid_argument("solve_reg: requires delta > 0");
    SystemSolution sol;
    auto lrep = loss.validate("loss");
    auto rrep = reg.validate("reg");
    sol.warnings = lrep.warnings;
    sol.warnings.insert(sol.warnings.end(), rrep.warnings.begin(), rrep.warnings.end());
    if (noise.prob_nonzero() <= 0.0)
        throw InvalidAssumption("solve_reg: noise is identically zero");
    if (!reg.kink_points().empty() && !signal.has_continuous())
        throw InvalidAssumption(
            "solve_reg: kinked regularizer requires an unbounded signal law");

    PerfectThreshold th = delta_perfect_reg(loss, noise, reg, signal, engine);
    if (delta >= th.delta && zero_certificate_reg(loss, noise, reg, signal, delta, engine)) {
        sol.status = SolveStatus::AtZero;
        sol.alpha = 0.0;
        sol.kappa = kInf;
        sol.residuals = {0.0, 0.0, 0.0, 0.0};
        return sol;
    }

    ExpectationEngine eng = engine;
    eng.with_error = false;

    double a0, b0, k0, n0;
    if (init) {
        a0 = (*init)[0]; b0 = (*init)[1]; k0 = (*init)[2]; n0 = (*init)[3];
    } else {
        double m2 = signal.second_moment();
        a0 = std::isfinite(m2) && m2 > 0 ? std::sqrt(m2) : 1.0;
        k0 = 1.0;
        // beta, nu from the loss-side equations at (a0, k0); eq 4 alone is
        // degenerate in beta (it always admits beta = 0)
        detail::ProxMoments pm = detail::prox_moments(loss, noise, a0, k0, eng);
        b0 = std::max(std::sqrt(delta * std::max(pm.sq.value, 1e-12)) / k0, 1e-3);
        n0 = std::max(delta * pm.cross.value / (a0 * k0), 1e-3);
    }

    auto resid = [&](const std::array<double, 4>& u, double* floor_out) {
        double a = std::exp(std::clamp(u[0], -60.0, 60.0));
        double b = std::exp(std::clamp(u[1], -60.0, 60.0));
        double k = std::exp(std::clamp(u[2], -60.0, 60.0));
        double n = std::exp(std::clamp(u[3], -60.0, 60.0));
        detail::ProxMoments pm = detail::prox_moments(loss, noise, a, k, eng);
        detail::RegMoments rm = detail::reg_moments(reg, signal, b, n, eng);
        if (floor_out) {
            ExpectationEngine efull = engine;
            detail::ProxMoments pf = detail::prox_moments(loss, noise, a, k, efull);
            detail::RegMoments rf = detail::reg_moments(reg, signal, b, n, efull);
            *floor_out = std::max({rf.sq.error_estimate / (a * a),
                                   delta * pf.sq.error_estimate / (b * b * k * k),
                                   delta * pf.cross.error_estimate / (n * a * k),
                                   rf.cross.error_estimate / (k * b)});
        }
        return std::array<double, 4>{
            rm.sq.value / (a * a) - 1.0,
            delta * pm.sq.value / (b * b * k * k) - 1.0,
            delta * pm.cross.value / (n * a * k) - 1.0,
            rm.cross.value / (k * b) - 1.0};
    };
    auto norm = [](const std::array<double, 4>& v) {
        double m = 0.0;
        for (double x : v) m = std::max(m, std::abs(x));
        return m;
    };

    std::array<double, 4> u{std::log(a0), std::log(b0), std::log(k0), std::log(n0)};
    auto r = resid(u, nullptr);
    int iters = 0;
    for (; iters < 120 && norm(r) > 0.25 * tol; ++iters) {
        const double h = 1e-6;
        double J[4][4];
        for (int j = 0; j < 4; ++j) {
            auto up = u;
            up[j] += h;
            auto rp = resid(up, nullptr);
            for (int i = 0; i < 4; ++i) J[i][j] = (rp[i] - r[i]) / h;
        }
        // Gaussian elimination with partial pivoting for J d = -r
        double A[4][5];
        for (int i = 0; i < 4; ++i) {
            for (int j = 0; j < 4; ++j) A[i][j] = J[i][j];
            A[i][4] = -r[i];
        }
        bool singular = false;
        for (int c = 0; c < 4; ++c) {
            int piv = c;
            for (int i = c + 1; i < 4; ++i)
                if (std::abs(A[i][c]) > std::abs(A[piv][c])) piv = i;
            if (std::abs(A[piv][c]) < 1e-14) { singular = true; break; }
            if (piv != c)
                for (int j = 0; j < 5; ++j) std::swap(A[c][j], A[piv][j]);
            for (int i = c + 1; i < 4; ++i) {
                double m = A[i][c] / A[c][c];
                for (int j = c; j < 5; ++j) A[i][j] -= m * A[c][j];
            }
        }
        if (singular) break;
        std::array<double, 4> d{};
        for (int i = 3; i >= 0; --i) {
            double s = A[i][4];
            for (int j = i + 1; j < 4; ++j) s -= A[i][j] * d[j];
            d[i] = s / A[i][i];
        }
        double dmax = 0.0;
        for (double x : d) dmax = std::max(dmax, std::abs(x));
        if (dmax > 1.5)
            for (double& x : d) x *= 1.5 / dmax;
        double step = 1.0;
        bool ok = false;
        for (int bt = 0; bt < 8; ++bt, step *= 0.5) {
            auto un = u;
            for (int i = 0; i < 4; ++i) un[i] += step * d[i];
            auto rn = resid(un, nullptr);
            if (norm(rn) < norm(r)) {
                u = un;
                r = rn;
                ok = true;
                break;
            }
        }
        if (!ok) break;
    }

    double floor = 0.0;
    r = resid(u, &floor);
    sol.alpha = std::exp(u[0]);
    sol.beta = std::exp(u[1]);
    sol.kappa = std::exp(u[2]);
    sol.nu = std::exp(u[3]);
    sol.residuals = {r[0], r[1], r[2], r[3]};
    sol.iterations = iters;
    double accept = std::max(tol, 3.0 * floor);
    sol.status = norm(r) <= accept ? SolveStatus::Converged : SolveStatus::MaxIter;
    if (sol.status == SolveStatus::MaxIter && norm(r) > std::max(1e-2, accept)) {
        // heavy regularization can shrink the whole signal below quadrature
        // resolution: the first three equations hold while the fourth's right
        // side underflows to zero and alpha sits at the saturation value
        // sqrt(E[X^2]). Report that point instead of failing.
        double m2 = signal.second_moment();
        detail::RegMoments rm = detail::reg_moments(reg, signal, sol.beta, sol.nu, eng);
        bool saturated = std::isfinite(m2) &&
                         std::abs(rm.cross.value) <= 1e-12 * sol.kappa * sol.beta &&
                         std::abs(r[0]) <= accept && std::abs(r[1]) <= accept &&
                         std::abs(r[2]) <= accept &&
                         std::abs(sol.alpha * sol.alpha - m2) <= 1e-6 * m2;
        if (!saturated)
            throw NoConvergence("solve_reg: residuals stalled at " + std::to_string(norm(r)),
                                sol);
        sol.warnings.push_back(
            "regularization saturates the estimator at zero; alpha fixed at the "
            "signal's root second moment");
        sol.alpha = std::sqrt(m2);
    }
    return sol;
}

// ---------------------------------------------------------------------------
// Lambda sweep.
// ---------------------------------------------------------------------------

struct RiskCurvePoint {
    double lambda = 0.0;
    double alpha = 0.0;
    SolveStatus status = SolveStatus::Converged;
    double residual_max = 0.0;
    int iterations = 0;
    std::string error;
};

inline std::vector<RiskCurvePoint> risk_curve(const ScalarConvexFunction& loss,
                                              const ScalarConvexFunction& reg_base,
                                              const MarginalLaw& noise,
                                              const MarginalLaw& signal, double delta,
                                              const std::vector<double>& lambda_grid,
                                              double tol = 1e-6,
                                              const ExpectationEngine& engine = {}) {
    std::vector<RiskCurvePoint> out;
    std::optional<std::array<double, 4>> warm;
    for (double lam : lambda_grid) {
        if (!(lam > 0)) throw std::invalid_argument("risk_curve: lambda grid must be positive");
        RiskCurvePoint pt;
        pt.lambda = lam;
        try {
            SystemSolution s =
                solve_reg(loss, reg_base.scaled(lam), noise, signal, delta, tol, engine, warm);
            pt.alpha = s.alpha;
            pt.status = s.status;
            pt.iterations = s.iterations;
            for (double rr : s.residuals) pt.residual_max = std::max(pt.residual_max, std::abs(rr));
            if (s.status != SolveStatus::AtZero)
                warm = {{s.alpha, s.beta, s.kappa, s.nu}};
            else
                warm.reset();
        } catch (const NoConvergence& e) {
            pt.status = SolveStatus::MaxIter;
            pt.alpha = e.best_solution.alpha;
            pt.error = e.what();
            warm.reset();
        }
        out.push_back(pt);
    }
    return out;
}

}  // namespace mrisk
