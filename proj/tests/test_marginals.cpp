#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "mrisk/marginals.hpp"

using namespace mrisk;

TEST_CASE("law validation rejects bad weights") {
    MarginalLaw law;
    law.atoms.push_back({0.4, 0.0});
    CHECK_THROWS_AS(law.validate(), std::invalid_argument);
    law.components.push_back({0.6, MarginalLaw::ContKind::Gaussian, 1.0});
    CHECK_NOTHROW(law.validate());
}

TEST_CASE("moments of mixture laws") {
    auto law = MarginalLaw::sparse_gaussian(0.9, 1.0);
    CHECK(law.second_moment() == Catch::Approx(0.1));
    CHECK(law.prob_nonzero() == Catch::Approx(0.1));
    CHECK(std::isinf(MarginalLaw::sparse_cauchy(0.9, 1.0).second_moment()));
    CHECK(MarginalLaw::point_mass(0.0).prob_nonzero() == 0.0);
}

TEST_CASE("quadrature reproduces analytic Gaussian moments") {
    ExpectationEngine eng;
    auto law = MarginalLaw::gaussian(2.0);
    Integrand second;
    second.phi = [](double, double w) { return w * w; };
    auto m2 = eng.expect_gw(second, law);
    CHECK(m2.value == Catch::Approx(4.0).epsilon(1e-10));

    Integrand fourth;
    fourth.phi = [](double, double w) { return w * w * w * w; };
    CHECK(eng.expect_gw(fourth, law).value == Catch::Approx(48.0).epsilon(1e-8));

    Integrand cross;  // E[g^2 w^2] factorizes
    cross.phi = [](double g, double w) { return g * g * w * w; };
    CHECK(eng.expect_gw(cross, law).value == Catch::Approx(4.0).epsilon(1e-8));
}

TEST_CASE("kink splitting handles non-smooth integrands") {
    ExpectationEngine eng;
    auto law = MarginalLaw::point_mass(0.0);
    Integrand pos;  // E[max(g,0)] = 1/sqrt(2*pi)
    pos.phi = [](double g, double) { return std::max(g, 0.0); };
    pos.g_kinks = [](double) { return std::vector<double>{0.0}; };
    CHECK(eng.expect_gw(pos, law).value ==
          Catch::Approx(1.0 / std::sqrt(2.0 * kPi)).epsilon(1e-9));
}

TEST_CASE("cauchy expectations need an explicit boundedness promise") {
    ExpectationEngine eng;
    auto law = MarginalLaw::sparse_cauchy(0.5, 1.0);
    Integrand raw;
    raw.phi = [](double, double w) { return w * w; };
    CHECK_THROWS_AS(eng.expect_gw(raw, law), UnboundedFunctional);

    Integrand clipped;
    clipped.phi = [](double, double w) { return w != 0.0 ? 1.0 : 0.0; };
    clipped.bounded = true;
    auto v = eng.expect_gw(clipped, law);
    CHECK(v.value == Catch::Approx(0.5).margin(3 * v.error_estimate + 1e-3));
}

TEST_CASE("monte carlo blocks are deterministic across runs") {
    ExpectationEngine a, b;
    a.master_seed = b.master_seed = 7;
    a.mc_samples = b.mc_samples = 100000;
    auto law = MarginalLaw::sparse_cauchy(0.8, 1.0);
    Integrand f;
    f.phi = [](double g, double w) { return std::tanh(g + w); };
    f.bounded = true;
    CHECK(a.expect_gw(f, law).value == b.expect_gw(f, law).value);
}

TEST_CASE("cdf and absolute quantile agree") {
    auto law = MarginalLaw::sparse_gaussian(0.9, 1.0);
    double q = law.quantile_abs(0.01);
    CHECK(law.tail_abs(q) == Catch::Approx(0.01).margin(1e-8));
    CHECK(law.cdf(0.0) >= 0.5);
}

TEST_CASE("sampling matches the law's mixture weights") {
    auto law = MarginalLaw::sparse_gaussian(0.9, 1.0);
    auto xs = sample(law, 20000, 3, 0);
    int zeros = 0;
    for (double x : xs) zeros += (x == 0.0);
    CHECK(std::abs(zeros / 20000.0 - 0.9) < 0.01);
}
