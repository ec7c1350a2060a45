#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "mrisk/rng.hpp"
#include "mrisk/threshold.hpp"

using namespace mrisk;

namespace {
const auto kSparse09 = MarginalLaw::sparse_gaussian(0.9, 1.0);
const auto kSparse07 = MarginalLaw::sparse_gaussian(0.7, 1.0);
const auto kL1 = ScalarConvexFunction::abs();
}  // namespace

TEST_CASE("normal quantile inverts the cdf across the whole range") {
    for (double p = 0.02; p < 0.999; p += 0.013) {
        double x = norm_quantile(p);
        CHECK(norm_cdf(x) == Catch::Approx(p).margin(1e-12));
    }
}

TEST_CASE("closed-form distance curve matches Monte Carlo") {
    ExpectationEngine eng;
    double t = 0.8;
    double val = expected_dist_sq(kL1, kSparse09, t, eng);
    // brute force over Philox gaussians
    Philox rng(11, 0);
    double acc = 0.0;
    const int n = 400000;
    for (int i = 0; i < n; ++i) {
        auto d = gauss_draw(rng, 0, i);
        double g = d.g;
        double w = kSparse09.draw(d.u_select, gauss_draw(rng, 1, i).g, d.u_aux);
        double dist;
        if (w == 0.0)
            dist = std::max(std::abs(g) - t, 0.0);  // dist to [-t, t]
        else
            dist = std::abs(g - t * (w > 0 ? 1.0 : -1.0));
        acc += dist * dist;
    }
    CHECK(val == Catch::Approx(acc / n).margin(0.01));
}

TEST_CASE("sparse-plus-gaussian L1 minimum and threshold") {
    ExpectationEngine eng;
    auto j = minimize_j(kL1, kSparse09, eng);
    CHECK(j.value == Catch::Approx(0.32879351).margin(1e-7));
    CHECK(j.t == Catch::Approx(1.140171).margin(1e-4));

    auto th = delta_perfect_unreg(kL1, kSparse09, eng);
    CHECK_FALSE(th.infinite);
    CHECK(th.delta == Catch::Approx(1.48985448).margin(1e-7));

    auto th07 = delta_perfect_unreg(kL1, kSparse07, eng);
    CHECK(th07.j_loss == Catch::Approx(0.64557229).margin(1e-7));
    CHECK(th07.delta == Catch::Approx(2.82145).margin(1e-4));

    auto th05 = delta_perfect_unreg(kL1, MarginalLaw::sparse_gaussian(0.5, 1.0), eng);
    CHECK(th05.delta == Catch::Approx(5.927679).margin(1e-4));
}

TEST_CASE("differentiable loss gives an infinite threshold") {
    ExpectationEngine eng;
    auto th = delta_perfect_unreg(ScalarConvexFunction::huber(1.0), kSparse09, eng);
    CHECK(th.infinite);
    CHECK(th.j_loss == Catch::Approx(1.0).margin(1e-6));
}

TEST_CASE("regularized threshold combines both minima") {
    ExpectationEngine eng;
    auto th = delta_perfect_reg(kL1, kSparse07, kL1, kSparse09, eng);
    CHECK(th.delta == Catch::Approx(0.9276743833).margin(1e-7));
    CHECK(th.j_loss == Catch::Approx(0.64557229).margin(1e-7));
    CHECK(th.j_reg == Catch::Approx(0.32879351).margin(1e-7));
}

TEST_CASE("degenerate noise is rejected") {
    ExpectationEngine eng;
    CHECK_THROWS_AS(delta_perfect_unreg(kL1, MarginalLaw::point_mass(0.0), eng),
                    DegenerateNoise);
}

TEST_CASE("cauchy contamination thresholds") {
    ExpectationEngine eng;
    eng.mc_samples = 400000;
    for (auto [s, want] : {std::pair{0.1, 1.48985}, {0.2, 2.04553}, {0.3, 2.82145}}) {
        auto th = delta_perfect_unreg(kL1, MarginalLaw::sparse_cauchy(1.0 - s, 1.0), eng);
        CHECK(th.delta == Catch::Approx(want).margin(2e-3));
    }
}

TEST_CASE("alpha bound is finite for Lipschitz losses above delta one") {
    auto b = alpha_upper_bound_unreg(kL1, kSparse09, 1.2);
    CHECK(b.finite);
    CHECK(b.alpha_max > 0);
    auto nb = alpha_upper_bound_unreg(ScalarConvexFunction::square(), kSparse09, 2.0);
    CHECK_FALSE(nb.finite);
}
