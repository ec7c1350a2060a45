#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "mrisk/rng.hpp"
#include "mrisk/scalar_convex.hpp"

using namespace mrisk;

TEST_CASE("abs prox is soft thresholding") {
    auto f = ScalarConvexFunction::abs();
    CHECK(f.prox(3.0, 1.0) == Catch::Approx(2.0));
    CHECK(f.prox(-3.0, 1.0) == Catch::Approx(-2.0));
    CHECK(f.prox(0.5, 1.0) == 0.0);
    CHECK(f.prox(0.5, 2.0) == 0.0);
    CHECK(f.moreau_env(0.5, 1.0) == Catch::Approx(0.125));
    CHECK(f.moreau_env(3.0, 1.0) == Catch::Approx(2.5));
}

TEST_CASE("square prox shrinks linearly") {
    auto f = ScalarConvexFunction::square();
    // argmin_v (v-x)^2/(2t) + v^2/2 = x/(1+t)
    CHECK(f.prox(2.0, 1.0) == Catch::Approx(1.0));
    CHECK(f.prox(2.0, 3.0) == Catch::Approx(0.5));
}

TEST_CASE("huber prox matches piecewise closed form") {
    auto f = ScalarConvexFunction::huber(1.0);
    // |x| <= m(1+t): quadratic region, prox = x/(1+t)
    CHECK(f.prox(1.0, 1.0) == Catch::Approx(0.5));
    // |x| > m(1+t): linear region, prox = x - t*m*sign(x)
    CHECK(f.prox(5.0, 1.0) == Catch::Approx(4.0));
    CHECK(f.prox(-5.0, 2.0) == Catch::Approx(-3.0));
}

TEST_CASE("quantile prox matches asymmetric soft thresholding") {
    double q = 0.3;
    auto f = ScalarConvexFunction::quantile(q);
    // subgradient is -(1-q) below 0 and q above
    CHECK(f.prox(5.0, 1.0) == Catch::Approx(5.0 - q));
    CHECK(f.prox(-5.0, 1.0) == Catch::Approx(-5.0 + (1 - q)));
    CHECK(f.prox(0.1, 1.0) == 0.0);
    CHECK(f.prox(-0.5, 1.0) == 0.0);
}

TEST_CASE("pseudo-huber prox solves its stationarity equation") {
    auto f = ScalarConvexFunction::pseudo_huber();
    for (double x : {-7.3, -1.0, -0.2, 0.0, 0.4, 2.0, 11.0}) {
        for (double t : {0.1, 1.0, 4.0}) {
            double v = f.prox(x, t);
            double station = v + t * v / std::sqrt(1.0 + v * v) - x;
            CHECK(std::abs(station) < 1e-9);
        }
    }
}

TEST_CASE("scaled prox identity") {
    auto f = ScalarConvexFunction::abs();
    auto g = f.scaled(2.5);
    for (double x : {-4.0, -0.3, 0.7, 9.0}) {
        for (double t : {0.2, 1.0, 3.0}) {
            CHECK(g.prox(x, t) == Catch::Approx(f.prox(x, 2.5 * t)).margin(1e-14));
        }
    }
}

TEST_CASE("prox is firmly non-expansive") {
    Philox rng(42, 0);
    std::vector<ScalarConvexFunction> fs = {
        ScalarConvexFunction::abs(),       ScalarConvexFunction::huber(1.0),
        ScalarConvexFunction::pseudo_huber(), ScalarConvexFunction::quantile(0.3),
        ScalarConvexFunction::square()};
    for (int i = 0; i < 2000; ++i) {
        auto u = rng.uniform4(0, i);
        const auto& f = fs[i % fs.size()];
        double x = 20.0 * (u[0] - 0.5), y = 20.0 * (u[1] - 0.5);
        double t = 0.01 + 5.0 * u[2];
        double px = f.prox(x, t), py = f.prox(y, t);
        CHECK((px - py) * (px - py) <= (px - py) * (x - y) + 1e-12);
    }
}

TEST_CASE("envelope derivative matches finite differences") {
    auto fs = {ScalarConvexFunction::abs(), ScalarConvexFunction::huber(0.7),
               ScalarConvexFunction::pseudo_huber(), ScalarConvexFunction::quantile(0.6)};
    for (const auto& f : fs) {
        for (double x : {-3.1, -0.4, 0.3, 2.7}) {
            double t = 1.3, h = 1e-5;
            double fd = (f.moreau_env(x + h, t) - f.moreau_env(x - h, t)) / (2 * h);
            CHECK(std::abs(f.env_deriv(x, t) - fd) < 1e-6);
        }
    }
}

TEST_CASE("subdifferential intervals") {
    auto f = ScalarConvexFunction::abs();
    auto s0 = f.subdiff(0.0);
    CHECK(s0.lo == -1.0);
    CHECK(s0.hi == 1.0);
    CHECK(f.subdiff(2.0).lo == 1.0);
    auto q = ScalarConvexFunction::quantile(0.3);
    CHECK(q.subdiff(0.0).lo == Catch::Approx(-0.7));
    CHECK(q.subdiff(0.0).hi == Catch::Approx(0.3));
    auto h = ScalarConvexFunction::huber(1.0);
    CHECK(h.subdiff(0.5).lo == Catch::Approx(0.5));
    CHECK(h.subdiff(3.0).hi == Catch::Approx(1.0));
}

TEST_CASE("coercivity pair gives valid linear lower bound") {
    for (const auto& f : {ScalarConvexFunction::abs(), ScalarConvexFunction::huber(1.0),
                          ScalarConvexFunction::quantile(0.3)}) {
        auto cp = f.coercivity();
        REQUIRE(cp.a > 0);
        for (double x : {-50.0, -3.0, -1.0, 1.0, 2.0, 40.0}) {
            CHECK(f.eval(x) >= cp.a * std::abs(x) - cp.b - 1e-10);
        }
    }
}

TEST_CASE("validation flags losses not minimized at zero") {
    auto f = ScalarConvexFunction::abs();
    CHECK(f.validate("loss").ok);
    auto sq = ScalarConvexFunction::square();
    auto rep = sq.validate("loss");
    CHECK(rep.ok);
    CHECK_FALSE(rep.warnings.empty());  // non-Lipschitz warning
}
