#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "mrisk/math.hpp"

namespace mrisk {

// Closed subdifferential interval [lo, hi] of a scalar convex function.
struct SubdiffInterval {
    double lo;
    double hi;

    bool contains(double s, double slack = 0.0) const { return s >= lo - slack && s <= hi + slack; }
    // squared distance from s to t * [lo, hi]
    double dist_sq_scaled(double s, double t) const {
        double below = t * lo - s;
        double above = s - t * hi;
        double d = std::max({below, above, 0.0});
        return d * d;
    }
};

// Lower bound f(x) - f(0) >= a|x| - b.
struct CoercivityPair {
    double a;
    double b;
};

enum class LossKind { Abs, Huber, PseudoHuber, Quantile, Square };

class NotMinimizedAtZero : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A builtin scalar convex function with closed-form value, prox, Moreau
// envelope and subdifferential. Normalized so argmin f = {0} and f(0) = 0.
// A positive scale factor turns f into scale * f (used for lambda * reg).
class ScalarConvexFunction {
public:
    static ScalarConvexFunction abs() { return {LossKind::Abs, 0.0, 1.0}; }
    static ScalarConvexFunction huber(double bend) {
        if (!(bend > 0)) throw std::invalid_argument("huber: bend must be positive");
        return {LossKind::Huber, bend, 1.0};
    }
    static ScalarConvexFunction pseudo_huber() { return {LossKind::PseudoHuber, 0.0, 1.0}; }
    static ScalarConvexFunction quantile(double q) {
        if (!(q > 0 && q < 1)) throw std::invalid_argument("quantile: q must lie in (0,1)");
        return {LossKind::Quantile, q, 1.0};
    }
    static ScalarConvexFunction square() { return {LossKind::Square, 0.0, 1.0}; }

    ScalarConvexFunction scaled(double lambda) const {
        if (!(lambda > 0)) throw std::invalid_argument("scaled: lambda must be positive");
        ScalarConvexFunction f = *this;
        f.scale_ *= lambda;
        return f;
    }

    LossKind kind() const { return kind_; }
    double param() const { return param_; }
    double scale() const { return scale_; }

    double lipschitz() const {
        switch (kind_) {
            case LossKind::Abs: return scale_;
            case LossKind::Huber: return scale_ * param_;
            case LossKind::PseudoHuber: return scale_;
            case LossKind::Quantile: return scale_ * std::max(param_, 1.0 - param_);
            case LossKind::Square: return kInf;
        }
        return kInf;
    }

    double eval(double x) const { return scale_ * base_eval(x); }

    // argmin_v tau * f(v) + (x - v)^2 / 2
    double prox(double x, double tau) const {
        if (!(tau > 0)) throw std::invalid_argument("prox: tau must be positive");
        return base_prox(x, tau * scale_);
    }

    // min_u (x - u)^2 / (2 tau) + f(u)
    double moreau_env(double x, double tau) const {
        double p = prox(x, tau);
        double d = x - p;
        return d * d / (2.0 * tau) + eval(p);
    }

    // d/dx moreau_env(x, tau) = (x - prox(x, tau)) / tau
    double env_deriv(double x, double tau) const { return (x - prox(x, tau)) / tau; }

    SubdiffInterval subdiff(double x) const {
        SubdiffInterval s = base_subdiff(x);
        return {scale_ * s.lo, scale_ * s.hi};
    }

    // Coercivity pair from supporting lines at +-1 (a, b with f - f(0) >= a|x| - b).
    CoercivityPair coercivity() const {
        double d1 = subdiff(1.0).lo;    // > 0
        double dm1 = subdiff(-1.0).hi;  // < 0
        double a = std::min(d1, -dm1);
        double b = std::max({d1 - eval(1.0), -dm1 - eval(-1.0), 0.0});
        return {a, b};
    }

    // Kinks of f itself (finitely many; empty for C^1 builtins).
    std::vector<double> kink_points() const {
        switch (kind_) {
            case LossKind::Abs:
            case LossKind::Quantile: return {0.0};
            default: return {};
        }
    }

    // Points where x -> prox(x, tau) is non-smooth.
    std::vector<double> prox_kinks(double tau) const {
        double t = tau * scale_;
        switch (kind_) {
            case LossKind::Abs: return {-t, t};
            case LossKind::Huber: {
                double m = param_;
                return {-m * (1.0 + t), m * (1.0 + t)};
            }
            case LossKind::Quantile: return {-t * (1.0 - param_), t * param_};
            default: return {};
        }
    }

    struct ValidationReport {
        bool ok = true;
        std::vector<std::string> warnings;
    };

    // Warns on non-Lipschitz losses (there are noise laws with infinite
    // alpha*); throws NotMinimizedAtZero if argmin f != {0}.
    ValidationReport validate(const std::string& role = "loss") const {
        ValidationReport rep;
        SubdiffInterval at0 = subdiff(0.0);
        if (!(at0.lo <= 0.0 && at0.hi >= 0.0) || !(subdiff(1e-8).hi > 0.0) ||
            !(subdiff(-1e-8).lo < 0.0)) {
            throw NotMinimizedAtZero(role + ": function is not minimized (only) at 0");
        }
        if (lipschitz() == kInf) {
            rep.warnings.push_back(role +
                                   ": not Lipschitz; some noise laws give an infinite solution");
        }
        return rep;
    }

private:
    ScalarConvexFunction(LossKind k, double p, double s) : kind_(k), param_(p), scale_(s) {}

    double base_eval(double x) const {
        switch (kind_) {
            case LossKind::Abs: return std::abs(x);
            case LossKind::Huber: {
                double m = param_;
                return std::abs(x) <= m ? 0.5 * x * x : m * std::abs(x) - 0.5 * m * m;
            }
            case LossKind::PseudoHuber: return std::sqrt(1.0 + x * x) - 1.0;
            case LossKind::Quantile: {
                double q = param_;
                return x >= 0 ? q * x : -(1.0 - q) * x;
            }
            case LossKind::Square: return 0.5 * x * x;
        }
        return 0.0;
    }

    double base_prox(double x, double t) const {
        switch (kind_) {
            case LossKind::Abs:
                if (x > t) return x - t;
                if (x < -t) return x + t;
                return 0.0;
            case LossKind::Huber: {
                double m = param_;
                if (std::abs(x) <= m * (1.0 + t)) return x / (1.0 + t);
                return x - t * m * (x > 0 ? 1.0 : -1.0);
            }
            case LossKind::PseudoHuber: {
                // solve v + t v / sqrt(1 + v^2) = x by safeguarded Newton
                if (x == 0.0) return 0.0;
                double lo = 0.0, hi = std::abs(x);
                double ax = std::abs(x);
                double v = ax / (1.0 + t);  // start from the small-|v| linearization
                for (int it = 0; it < 100; ++it) {
                    double s = std::sqrt(1.0 + v * v);
                    double fv = v + t * v / s - ax;
                    if (fv > 0) hi = v; else lo = v;
                    double dfv = 1.0 + t / (s * s * s);
                    double step = fv / dfv;
                    double vn = v - step;
                    if (!(vn > lo && vn < hi)) vn = 0.5 * (lo + hi);
                    if (std::abs(vn - v) <= 1e-12 * (1.0 + std::abs(v))) { v = vn; break; }
                    v = vn;
                }
                return x > 0 ? v : -v;
            }
            case LossKind::Quantile: {
                double q = param_;
                if (x > t * q) return x - t * q;
                if (x < -t * (1.0 - q)) return x + t * (1.0 - q);
                return 0.0;
            }
            case LossKind::Square: return x / (1.0 + t);
        }
        return x;
    }

    SubdiffInterval base_subdiff(double x) const {
        switch (kind_) {
            case LossKind::Abs:
                if (x > 0) return {1.0, 1.0};
                if (x < 0) return {-1.0, -1.0};
                return {-1.0, 1.0};
            case LossKind::Huber: {
                double m = param_;
                double d = std::abs(x) <= m ? x : m * (x > 0 ? 1.0 : -1.0);
                return {d, d};
            }
            case LossKind::PseudoHuber: {
                double d = x / std::sqrt(1.0 + x * x);
                return {d, d};
            }
            case LossKind::Quantile: {
                double q = param_;
                if (x > 0) return {q, q};
                if (x < 0) return {-(1.0 - q), -(1.0 - q)};
                return {-(1.0 - q), q};
            }
            case LossKind::Square: return {x, x};
        }
        return {0.0, 0.0};
    }

    LossKind kind_;
    double param_;
    double scale_;
};

}  // namespace mrisk
