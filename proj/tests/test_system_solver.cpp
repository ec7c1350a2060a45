#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "mrisk/system_solver.hpp"
#include "mrisk/threshold.hpp"

using namespace mrisk;

namespace {
const auto kL1 = ScalarConvexFunction::abs();
const auto kNoise33 = MarginalLaw::sparse_gaussian(0.7, 1.0);
const auto kSignal33 = MarginalLaw::sparse_gaussian(0.9, 1.0);
}  // namespace

TEST_CASE("square loss with gaussian noise has a closed form") {
    ExpectationEngine eng;
    // prox(u) = u/(1+k) turns the system into alpha^2 = s^2/(d-1), k = 1/(d-1)
    for (double d : {1.5, 2.0, 4.0}) {
        auto s = solve_unreg(ScalarConvexFunction::square(), MarginalLaw::gaussian(1.0), d,
                             1e-8, eng);
        CHECK(s.alpha == Catch::Approx(std::sqrt(1.0 / (d - 1.0))).margin(1e-5));
        CHECK(s.kappa == Catch::Approx(1.0 / (d - 1.0)).margin(1e-5));
        CHECK(s.status == SolveStatus::Converged);
    }
}

TEST_CASE("solution is zero above the perfect-recovery threshold") {
    ExpectationEngine eng;
    auto s = solve_unreg(kL1, kSignal33, 2.0, 1e-6, eng);  // threshold 1.4899
    CHECK(s.status == SolveStatus::AtZero);
    CHECK(s.alpha == 0.0);
    CHECK(std::isinf(s.kappa));
}

TEST_CASE("unregularized potential is zero at zero and midpoint convex") {
    ExpectationEngine eng;
    eng.with_error = false;
    auto noise = MarginalLaw::gaussian(1.0);
    CHECK(potential_unreg(0.0, kL1, noise, 1.7, eng) == 0.0);
    std::vector<double> as = {0.2, 0.6, 1.0, 1.8};
    for (std::size_t i = 0; i + 2 < as.size(); ++i) {
        double m1 = potential_unreg(as[i], kL1, noise, 1.7, eng);
        double m2 = potential_unreg(as[i + 2], kL1, noise, 1.7, eng);
        double mid = potential_unreg(0.5 * (as[i] + as[i + 2]), kL1, noise, 1.7, eng);
        CHECK(mid <= 0.5 * (m1 + m2) + 1e-7);
    }
}

TEST_CASE("huber solution satisfies the two-equation system") {
    ExpectationEngine eng;
    auto loss = ScalarConvexFunction::huber(1.0);
    auto noise = MarginalLaw::gaussian(1.0);
    auto s = solve_unreg(loss, noise, 1.6, 1e-8, eng);
    REQUIRE(s.status == SolveStatus::Converged);
    auto pm = detail::prox_moments(loss, noise, s.alpha, s.kappa, eng);
    CHECK(std::abs(1.6 * pm.sq.value / (s.alpha * s.alpha) - 1.0) < 1e-6);
    CHECK(std::abs(1.6 * pm.cross.value / s.alpha - 1.0) < 1e-6);
}

TEST_CASE("regularized solve matches frozen reference point") {
    ExpectationEngine eng;
    double delta = 0.7 * 0.9276743833;
    auto s = solve_reg(kL1, kL1.scaled(0.5), kNoise33, kSignal33, delta, 1e-9, eng);
    REQUIRE(s.status == SolveStatus::Converged);
    CHECK(s.alpha == Catch::Approx(0.243594).margin(2e-5));
    CHECK(s.beta == Catch::Approx(0.582251).margin(2e-4));
    CHECK(s.kappa == Catch::Approx(0.329933).margin(2e-4));
    CHECK(s.nu == Catch::Approx(1.284284).margin(2e-4));
}

TEST_CASE("regularized solve reports zero inside the recovery region") {
    ExpectationEngine eng;
    double delta = 1.3 * 0.9276743833;
    auto s = solve_reg(kL1, kL1.scaled(1.5), kNoise33, kSignal33, delta, 1e-8, eng);
    CHECK(s.status == SolveStatus::AtZero);
    CHECK(s.alpha == 0.0);
}

TEST_CASE("assumption violations are rejected") {
    ExpectationEngine eng;
    // kinked regularizer with atom-only signal and kinks hit by atoms
    CHECK_THROWS_AS(
        solve_reg(kL1, kL1, kNoise33, MarginalLaw::point_mass(0.0), 1.0, 1e-8, eng),
        InvalidAssumption);
    CHECK_THROWS_AS(solve_unreg(kL1, MarginalLaw::point_mass(0.0), 2.0, 1e-8, eng),
                    DegenerateNoise);
}

TEST_CASE("risk curve is monotone toward the signal power at large lambda") {
    ExpectationEngine eng;
    std::vector<double> grid = {0.3, 0.6, 1.0, 2.0, 5.0};
    double delta = 0.7 * 0.9276743833;
    auto curve = risk_curve(kL1, kL1, kNoise33, kSignal33, delta, grid, 1e-8, eng);
    REQUIRE(curve.size() == grid.size());
    for (const auto& pt : curve) CHECK(pt.alpha >= 0.0);
    // heavy regularization pushes the estimate to zero: alpha^2 -> E[X^2] = 0.1
    CHECK(curve.back().alpha * curve.back().alpha < 0.11);
    CHECK(curve.back().alpha * curve.back().alpha > 0.02);
}

TEST_CASE("lambda to zero recovers the unregularized solution") {
    ExpectationEngine eng;
    auto un = solve_unreg(kL1, kNoise33, 2.0, 1e-8, eng);
    auto re = solve_reg(kL1, kL1.scaled(1e-3), kNoise33, MarginalLaw::gaussian(1.0), 2.0,
                        1e-8, eng);
    REQUIRE(un.status == SolveStatus::Converged);
    REQUIRE(re.status == SolveStatus::Converged);
    CHECK(re.alpha == Catch::Approx(un.alpha).epsilon(0.02));
}
