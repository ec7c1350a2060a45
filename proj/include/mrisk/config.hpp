#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mrisk/marginals.hpp"
#include "mrisk/scalar_convex.hpp"

namespace mrisk {

using json = nlohmann::json;

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Central defaults table (documented in the README).
struct Defaults {
    static constexpr int gh_nodes = 61;
    static constexpr std::size_t mc_samples = 2'000'000;
    static constexpr double tol = 1e-6;
    static constexpr double lambda_min = 1e-3;
    static constexpr double lambda_max = 1e3;
    static constexpr int lambda_count = 60;
    static constexpr std::uint64_t master_seed = 0;
};

inline json loss_to_json(const ScalarConvexFunction& f) {
    json j;
    switch (f.kind()) {
        case LossKind::Abs: j["kind"] = "abs"; break;
        case LossKind::Huber: j["kind"] = "huber"; j["bend"] = f.param(); break;
        case LossKind::PseudoHuber: j["kind"] = "pseudo_huber"; break;
        case LossKind::Quantile: j["kind"] = "quantile"; j["q"] = f.param(); break;
        case LossKind::Square: j["kind"] = "square"; break;
    }
    if (f.scale() != 1.0) j["scale"] = f.scale();
    return j;
}

inline ScalarConvexFunction loss_from_json(const json& j) {
    if (!j.contains("kind")) throw ConfigError("loss descriptor: missing \"kind\"");
    std::string kind = j.at("kind");
    ScalarConvexFunction f = [&] {
        if (kind == "abs" || kind == "l1") return ScalarConvexFunction::abs();
        if (kind == "huber") return ScalarConvexFunction::huber(j.value("bend", 1.0));
        if (kind == "pseudo_huber") return ScalarConvexFunction::pseudo_huber();
        if (kind == "quantile") return ScalarConvexFunction::quantile(j.value("q", 0.5));
        if (kind == "square" || kind == "l2") return ScalarConvexFunction::square();
        throw ConfigError("loss descriptor: unknown kind \"" + kind + "\"");
    }();
    double scale = j.value("scale", 1.0);
    return scale == 1.0 ? f : f.scaled(scale);
}

inline json law_to_json(const MarginalLaw& law) {
    json j;
    j["atoms"] = json::array();
    for (const auto& a : law.atoms)
        j["atoms"].push_back({{"weight", a.weight}, {"location", a.location}});
    j["components"] = json::array();
    for (const auto& c : law.components)
        j["components"].push_back(
            {{"kind", c.kind == MarginalLaw::ContKind::Gaussian ? "gaussian" : "cauchy"},
             {"weight", c.weight},
             {"sigma", c.sigma}});
    return j;
}

inline MarginalLaw law_from_json(const json& j) {
    MarginalLaw law;
    for (const auto& a : j.value("atoms", json::array()))
        law.atoms.push_back({a.at("weight"), a.value("location", 0.0)});
    for (const auto& c : j.value("components", json::array())) {
        std::string kind = c.at("kind");
        if (kind != "gaussian" && kind != "cauchy")
            throw ConfigError("law descriptor: unknown component kind \"" + kind + "\"");
        law.components.push_back({c.at("weight"),
                                  kind == "gaussian" ? MarginalLaw::ContKind::Gaussian
                                                     : MarginalLaw::ContKind::Cauchy,
                                  c.value("sigma", 1.0)});
    }
    try {
        law.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("law descriptor: ") + e.what());
    }
    return law;
}

struct RunConfig {
    std::optional<ScalarConvexFunction> loss;
    std::optional<ScalarConvexFunction> reg;
    std::optional<MarginalLaw> noise;
    std::optional<MarginalLaw> signal;
    std::optional<double> delta;
    std::vector<double> delta_grid;
    std::vector<double> lambda_grid;
    std::vector<double> s_grid;  // mixture-weight grid for phase diagrams
    int gh_nodes = Defaults::gh_nodes;
    std::size_t mc_samples = Defaults::mc_samples;
    double tol = Defaults::tol;
    std::uint64_t master_seed = Defaults::master_seed;
    int n = 0, p = 0;
    int replicates = 20;
    std::string out;
    bool svg = false;
    int m_arg = 400;       // statdim vector length (CLI-only)
    int samples_arg = 200; // statdim Monte Carlo samples (CLI-only)

    ExpectationEngine engine() const {
        ExpectationEngine e;
        e.gh_nodes = gh_nodes;
        e.mc_samples = mc_samples;
        e.master_seed = master_seed;
        return e;
    }

    static std::vector<double> log_grid(double lo, double hi, int count) {
        std::vector<double> g(count);
        for (int i = 0; i < count; ++i)
            g[i] = lo * std::pow(hi / lo, count == 1 ? 0.0 : double(i) / (count - 1));
        return g;
    }

    static RunConfig from_json(const json& j) {
        RunConfig c;
        if (j.contains("loss")) c.loss = loss_from_json(j.at("loss"));
        if (j.contains("reg")) c.reg = loss_from_json(j.at("reg"));
        if (j.contains("noise")) c.noise = law_from_json(j.at("noise"));
        if (j.contains("signal")) c.signal = law_from_json(j.at("signal"));
        if (j.contains("delta")) c.delta = j.at("delta").get<double>();
        if (j.contains("delta_grid")) c.delta_grid = j.at("delta_grid").get<std::vector<double>>();
        if (j.contains("s_grid")) c.s_grid = j.at("s_grid").get<std::vector<double>>();
        if (j.contains("lambda_grid")) {
            c.lambda_grid = j.at("lambda_grid").get<std::vector<double>>();
        } else {
            c.lambda_grid = log_grid(j.value("lambda_min", Defaults::lambda_min),
                                     j.value("lambda_max", Defaults::lambda_max),
                                     j.value("lambda_count", Defaults::lambda_count));
        }
        c.gh_nodes = j.value("gh_nodes", Defaults::gh_nodes);
        c.mc_samples = j.value("mc_samples", Defaults::mc_samples);
        c.tol = j.value("tol", Defaults::tol);
        c.master_seed = j.value("seed", Defaults::master_seed);
        c.n = j.value("n", 0);
        c.p = j.value("p", 0);
        c.replicates = j.value("replicates", 20);
        c.out = j.value("out", "");
        c.svg = j.value("svg", false);
        c.validate_basic();
        return c;
    }

    void validate_basic() const {
        if (gh_nodes < 3) throw ConfigError("gh_nodes must be >= 3");
        if (tol <= 0) throw ConfigError("tol must be positive");
        for (double l : lambda_grid)
            if (!(l > 0)) throw ConfigError("lambda grid entries must be positive");
        if (delta && !(*delta > 0)) throw ConfigError("delta must be positive");
    }

    json to_json() const {
        json j;
        if (loss) j["loss"] = loss_to_json(*loss);
        if (reg) j["reg"] = loss_to_json(*reg);
        if (noise) j["noise"] = law_to_json(*noise);
        if (signal) j["signal"] = law_to_json(*signal);
        if (delta) j["delta"] = *delta;
        if (!delta_grid.empty()) j["delta_grid"] = delta_grid;
        if (!s_grid.empty()) j["s_grid"] = s_grid;
        j["lambda_grid"] = lambda_grid;
        j["gh_nodes"] = gh_nodes;
        j["mc_samples"] = mc_samples;
        j["tol"] = tol;
        j["seed"] = master_seed;
        if (n) j["n"] = n;
        if (p) j["p"] = p;
        j["replicates"] = replicates;
        if (!out.empty()) j["out"] = out;
        if (svg) j["svg"] = svg;
        return j;
    }
};

}  // namespace mrisk
