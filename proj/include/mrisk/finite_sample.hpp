#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "mrisk/marginals.hpp"
#include "mrisk/rng.hpp"
#include "mrisk/scalar_convex.hpp"

namespace mrisk {

class Unbounded : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ProblemInstance {
    int n = 0, p = 0;
    Eigen::MatrixXd A;   // iid N(0, 1/p) entries
    Eigen::VectorXd x0;
    Eigen::VectorXd z;
    Eigen::VectorXd y;   // A x0 + z
    std::uint64_t seed = 0;
    bool z_capped = false;  // heavy-tailed noise clamped at +-1e12
};

inline ProblemInstance generate(int n, int p, const MarginalLaw& noise_law,
                                const MarginalLaw& signal_law, std::uint64_t seed) {
    if (n < 1 || p < 1) throw std::invalid_argument("generate: n, p must be >= 1");
    noise_law.validate();
    signal_law.validate();
    ProblemInstance inst;
    inst.n = n;
    inst.p = p;
    inst.seed = seed;
    inst.A.resize(n, p);
    const double sd = 1.0 / std::sqrt(static_cast<double>(p));
    Philox arng(seed, 1);
    for (int j = 0; j < p; ++j)
        for (int i = 0; i < n; ++i)
            inst.A(i, j) = sd * gauss_draw(arng, j, i).g;
    Philox xrng(seed, 2);
    inst.x0.resize(p);
    for (int j = 0; j < p; ++j) {
        auto d = gauss_draw(xrng, 0, j);
        inst.x0[j] = signal_law.draw(d.u_select, d.g, d.u_aux);
    }
    Philox zrng(seed, 3);
    inst.z.resize(n);
    for (int i = 0; i < n; ++i) {
        auto d = gauss_draw(zrng, 0, i);
        double v = noise_law.draw(d.u_select, d.g, d.u_aux);
        if (std::abs(v) > 1e12) {
            v = v > 0 ? 1e12 : -1e12;
            inst.z_capped = true;
        }
        inst.z[i] = v;
    }
    inst.y = inst.A * inst.x0 + inst.z;
    return inst;
}

inline double operator_norm(const Eigen::MatrixXd& A) {
    Eigen::VectorXd v = Eigen::VectorXd::Ones(A.cols()).normalized();
    double s = 0.0;
    for (int it = 0; it < 50; ++it) {
        v = (A.transpose() * (A * v)).eval();
        s = v.norm();
        if (s == 0.0) return 0.0;
        v /= s;
    }
    return std::sqrt(s);
}

struct MEstimatorResult {
    Eigen::VectorXd x;
    int iterations = 0;
    bool converged = false;
    std::vector<double> accepted_merits;  // incumbent objective values, non-increasing
};

// Solves min_x sum_i loss(y_i - (Ax)_i) + sum_j reg(x_j) by Douglas-Rachford
// splitting of F(x, r) = sum reg + sum loss over the affine set {Ax + r = y},
// with r standing for the residual vector y - Ax. Both prox steps are exact:
// F is separable and projection onto the affine set reuses one Cholesky
// factorization of (A A^T + I).
inline MEstimatorResult solve_mestimator(const ProblemInstance& inst,
                                         const ScalarConvexFunction& loss,
                                         const ScalarConvexFunction* reg, double tol = 1e-8,
                                         int max_iter = 20000,
                                         const Eigen::VectorXd* warm = nullptr) {
    const int n = inst.n, p = inst.p;
    const double anorm = std::max(operator_norm(inst.A), 1e-12);
    const double rho = anorm;  // prox parameter 1/rho on F

    Eigen::LLT<Eigen::MatrixXd> llt(
        (inst.A * inst.A.transpose() + Eigen::MatrixXd::Identity(n, n)).eval());

    auto objective = [&](const Eigen::VectorXd& x) {
        double obj = 0.0;
        Eigen::VectorXd r = inst.y - inst.A * x;
        for (int i = 0; i < n; ++i) obj += loss.eval(r[i]);
        if (reg)
            for (int j = 0; j < p; ++j) obj += reg->eval(x[j]);
        return obj;
    };

    Eigen::VectorXd sx = warm ? *warm : Eigen::VectorXd::Zero(p);
    Eigen::VectorXd sr = inst.y - inst.A * sx;
    MEstimatorResult res;
    double best = std::numeric_limits<double>::infinity();
    Eigen::VectorXd ux(p), ur(n), vx(p), vr(n);
    const double scale = 1.0 + inst.x0.lpNorm<Eigen::Infinity>() + std::abs(inst.y.mean());
    int it = 0;
    for (; it < max_iter; ++it) {
        // u = prox_{F/rho}(s), componentwise
        for (int j = 0; j < p; ++j) ux[j] = reg ? reg->prox(sx[j], 1.0 / rho) : sx[j];
        for (int i = 0; i < n; ++i) ur[i] = loss.prox(sr[i], 1.0 / rho);
        // v = Proj_{Ax + r = y}(2u - s)
        Eigen::VectorXd px = 2.0 * ux - sx, pr = 2.0 * ur - sr;
        Eigen::VectorXd wlam = llt.solve(inst.A * px + pr - inst.y);
        vx = px - inst.A.transpose() * wlam;
        vr = pr - wlam;
        sx += vx - ux;
        sr += vr - ur;

        if (vx.lpNorm<Eigen::Infinity>() > 1e10 * scale)
            throw Unbounded("solve_mestimator: iterates diverged (degenerate problem)");

        if (it % 10 == 0 || it == max_iter - 1) {
            double merit = objective(vx);
            if (merit < best) {
                best = merit;
                res.accepted_merits.push_back(merit);
                res.x = vx;
            }
            double gap = (ux - vx).norm() + (ur - vr).norm();
            if (gap <= tol * std::sqrt(static_cast<double>(n + p)) * (1.0 + anorm) && it > 20) {
                res.converged = true;
                ++it;
                break;
            }
        }
    }
    res.iterations = it;
    if (res.x.size() == 0) res.x = vx;
    return res;
}

inline double empirical_risk(const ProblemInstance& inst, const Eigen::VectorXd& xhat) {
    return (xhat - inst.x0).squaredNorm() / inst.p;
}

struct RecoveryCertificate {
    bool recovered = false;
    double certificate_norm = 0.0;
    std::optional<double> lambda_witness;
};

// Perfect recovery holds iff 0 is in A^T subdiff loss(z): search the product
// of intervals s_i in subdiff loss(z_i) for a minimizer of |A^T s| by
// accelerated projected gradient.
inline RecoveryCertificate certify_perfect_recovery_unreg(const ProblemInstance& inst,
                                                          const ScalarConvexFunction& loss,
                                                          double tol = -1.0) {
    const int n = inst.n;
    if (tol < 0) tol = 1e-8 * inst.A.norm();
    std::vector<SubdiffInterval> box(n);
    for (int i = 0; i < n; ++i) box[i] = loss.subdiff(inst.z[i]);
    double L = std::pow(std::max(operator_norm(inst.A), 1e-12), 2);
    Eigen::VectorXd s(n), sy(n), sprev(n);
    for (int i = 0; i < n; ++i) s[i] = std::clamp(0.0, box[i].lo, box[i].hi);
    sy = s;
    sprev = s;
    double tfista = 1.0;
    double cert = (inst.A.transpose() * s).norm();
    for (int it = 0; it < 2000 && cert > 0.5 * tol; ++it) {
        Eigen::VectorXd grad = inst.A * (inst.A.transpose() * sy);
        Eigen::VectorXd snew = sy - grad / L;
        for (int i = 0; i < n; ++i) snew[i] = std::clamp(snew[i], box[i].lo, box[i].hi);
        double tnew = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tfista * tfista));
        sy = snew + ((tfista - 1.0) / tnew) * (snew - sprev);
        sprev = snew;
        tfista = tnew;
        s = snew;
        cert = (inst.A.transpose() * s).norm();
    }
    RecoveryCertificate out;
    out.certificate_norm = cert;
    out.recovered = cert <= tol;
    return out;
}

// Conic KKT feasibility at a fixed lambda: is A^T subdiff loss(z) within
// reach of lambda subdiff reg(x0)? Block minimization of |A^T s - v| over the
// two product boxes.
inline double kkt_gap_reg(const ProblemInstance& inst, const ScalarConvexFunction& loss,
                          const ScalarConvexFunction& reg_scaled) {
    const int n = inst.n, p = inst.p;
    std::vector<SubdiffInterval> sbox(n), vbox(p);
    for (int i = 0; i < n; ++i) sbox[i] = loss.subdiff(inst.z[i]);
    for (int j = 0; j < p; ++j) vbox[j] = reg_scaled.subdiff(inst.x0[j]);
    double L = std::pow(std::max(operator_norm(inst.A), 1e-12), 2);
    Eigen::VectorXd s(n), v(p);
    for (int i = 0; i < n; ++i) s[i] = std::clamp(0.0, sbox[i].lo, sbox[i].hi);
    double gap = 0.0;
    for (int it = 0; it < 1500; ++it) {
        Eigen::VectorXd ats = inst.A.transpose() * s;
        for (int j = 0; j < p; ++j) v[j] = std::clamp(ats[j], vbox[j].lo, vbox[j].hi);
        Eigen::VectorXd resid = ats - v;
        gap = resid.norm();
        if (gap <= 1e-10 * (1.0 + inst.A.norm())) break;
        Eigen::VectorXd snew = s - inst.A * resid / L;
        for (int i = 0; i < n; ++i) snew[i] = std::clamp(snew[i], sbox[i].lo, sbox[i].hi);
        if ((snew - s).norm() <= 1e-14 * (1.0 + s.norm())) { s = snew; break; }
        s = snew;
    }
    Eigen::VectorXd ats = inst.A.transpose() * s;
    for (int j = 0; j < p; ++j) v[j] = std::clamp(ats[j], vbox[j].lo, vbox[j].hi);
    return (ats - v).norm();
}

// Sweeps the lambda grid, declaring recovery at the first lambda with
// max_j |xhat_j - x0_j| under tolerance; cross-checked against the conic KKT
// gap so grid misses are caught.
inline RecoveryCertificate certify_perfect_recovery_reg(const ProblemInstance& inst,
                                                        const ScalarConvexFunction& loss,
                                                        const ScalarConvexFunction& reg,
                                                        const std::vector<double>& lambda_grid,
                                                        double tol = -1.0) {
    if (tol < 0) tol = 1e-6 * (1.0 + inst.x0.lpNorm<Eigen::Infinity>());
    const double kkt_tol = 1e-8 * inst.A.norm();
    RecoveryCertificate out;
    double best_gap = std::numeric_limits<double>::infinity();
    Eigen::VectorXd warm = inst.x0;
    for (double lam : lambda_grid) {
        ScalarConvexFunction rs = reg.scaled(lam);
        double gap = kkt_gap_reg(inst, loss, rs);
        best_gap = std::min(best_gap, gap);
        if (gap <= kkt_tol) {
            auto sol = solve_mestimator(inst, loss, &rs, 1e-9, 20000, &warm);
            warm = sol.x;
            if ((sol.x - inst.x0).lpNorm<Eigen::Infinity>() <= tol) {
                out.recovered = true;
                out.lambda_witness = lam;
                out.certificate_norm = gap;
                return out;
            }
        }
    }
    out.certificate_norm = best_gap;
    out.recovered = best_gap <= kkt_tol;
    return out;
}

struct ExperimentRecord {
    int replicate = 0;
    int n = 0, p = 0;
    double delta = 0.0;
    double lambda = 0.0;
    std::uint64_t seed = 0;
    double empirical_risk = 0.0;
    bool recovered = false;
    int solver_iters = 0;
    double kkt_certificate_norm = 0.0;
};

}  // namespace mrisk
