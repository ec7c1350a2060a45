#include <catch2/catch_amalgamated.hpp>

#include "mrisk/config.hpp"

using namespace mrisk;

TEST_CASE("loss descriptors round-trip") {
    for (const char* txt :
         {R"({"kind":"abs"})", R"({"kind":"huber","bend":0.7})",
          R"({"kind":"quantile","q":0.3,"scale":2.0})", R"({"kind":"pseudo_huber"})",
          R"({"kind":"square"})"}) {
        auto f = loss_from_json(json::parse(txt));
        auto back = loss_from_json(loss_to_json(f));
        CHECK(back.kind() == f.kind());
        CHECK(back.param() == f.param());
        CHECK(back.scale() == f.scale());
    }
    CHECK(loss_from_json(json::parse(R"({"kind":"l1"})")).kind() == LossKind::Abs);
    CHECK_THROWS_AS(loss_from_json(json::parse(R"({"kind":"cubic"})")), ConfigError);
}

TEST_CASE("law descriptors round-trip") {
    auto j = json::parse(
        R"({"atoms":[{"weight":0.9,"location":0}],
            "components":[{"kind":"gaussian","weight":0.1,"sigma":2.0}]})");
    auto law = law_from_json(j);
    CHECK(law.atoms.size() == 1);
    CHECK(law.components.size() == 1);
    auto back = law_from_json(law_to_json(law));
    CHECK(back.second_moment() == law.second_moment());
    CHECK_THROWS_AS(law_from_json(json::parse(R"({"atoms":[{"weight":0.5,"location":0}]})")),
                    ConfigError);
}

TEST_CASE("run config applies defaults and overrides") {
    auto j = json::parse(R"({"loss":{"kind":"abs"},
                             "noise":{"components":[{"kind":"gaussian","weight":1,"sigma":1}]},
                             "delta":2.0,"seed":9})");
    auto cfg = RunConfig::from_json(j);
    CHECK(cfg.gh_nodes == Defaults::gh_nodes);
    CHECK(cfg.mc_samples == Defaults::mc_samples);
    CHECK(cfg.tol == Defaults::tol);
    CHECK(cfg.master_seed == 9);
    REQUIRE(cfg.delta);
    CHECK(*cfg.delta == 2.0);
    CHECK(cfg.lambda_grid.size() == static_cast<std::size_t>(Defaults::lambda_count));
    CHECK(cfg.lambda_grid.front() == Catch::Approx(Defaults::lambda_min));
    CHECK(cfg.lambda_grid.back() == Catch::Approx(Defaults::lambda_max));

    auto j2 = cfg.to_json();
    auto cfg2 = RunConfig::from_json(j2);
    CHECK(cfg2.master_seed == 9);
    CHECK(cfg2.lambda_grid == cfg.lambda_grid);
}

TEST_CASE("log grid endpoints") {
    auto g = RunConfig::log_grid(1e-2, 1e2, 5);
    REQUIRE(g.size() == 5);
    CHECK(g[0] == Catch::Approx(1e-2));
    CHECK(g[2] == Catch::Approx(1.0));
    CHECK(g[4] == Catch::Approx(1e2));
}
