#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "mrisk/config.hpp"
#include "mrisk/conic_geometry.hpp"
#include "mrisk/finite_sample.hpp"
#include "mrisk/system_solver.hpp"
#include "mrisk/threshold.hpp"

namespace {

using namespace mrisk;

// fixed-format floating point rendering so reruns are byte-identical
std::string fmt(double x) {
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", x);
    return buf;
}

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> sets;
    std::string loss_json, reg_json, noise_json, signal_json, out;
    double delta = 0.0;
    bool has_delta = false;
    std::uint64_t seed = Defaults::master_seed;
    bool has_seed = false;
    int m = 400;
    int samples = 200;
    bool svg = false;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON config file");
        cmd->add_option("--set", sets, "override config key: key=value (JSON values)");
        cmd->add_option("--loss", loss_json, "loss descriptor (inline JSON)");
        cmd->add_option("--reg", reg_json, "regularizer descriptor (inline JSON)");
        cmd->add_option("--noise", noise_json, "noise law descriptor (inline JSON)");
        cmd->add_option("--signal", signal_json, "signal law descriptor (inline JSON)");
        cmd->add_option("--delta", delta, "oversampling ratio n/p")
            ->each([this](const std::string&) { has_delta = true; });
        cmd->add_option("--seed", seed, "master seed")
            ->each([this](const std::string&) { has_seed = true; });
        cmd->add_option("--out", out, "output path (default stdout)");
        cmd->add_option("-m", m, "vector length for statdim");
        cmd->add_option("--samples", samples, "Monte Carlo sample count for statdim");
        cmd->add_flag("--svg", svg, "also emit an SVG plot next to the CSV");
    }

    RunConfig resolve() const {
        json j = json::object();
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) throw ConfigError("cannot open config file: " + config_path);
            in >> j;
        }
        for (const auto& kv : sets) {
            auto eq = kv.find('=');
            if (eq == std::string::npos) throw ConfigError("--set expects key=value: " + kv);
            std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
            json parsed;
            try {
                parsed = json::parse(val);
            } catch (...) {
                parsed = val;  // bare strings allowed
            }
            j[key] = parsed;
        }
        auto inline_override = [&](const char* key, const std::string& s) {
            if (!s.empty()) j[key] = json::parse(s);
        };
        inline_override("loss", loss_json);
        inline_override("reg", reg_json);
        inline_override("noise", noise_json);
        inline_override("signal", signal_json);
        if (has_delta) j["delta"] = delta;
        if (has_seed) j["seed"] = seed;
        if (!out.empty()) j["out"] = out;
        if (svg) j["svg"] = true;
        return RunConfig::from_json(j);
    }
};

void write_output(const RunConfig& cfg, const std::string& text) {
    if (cfg.out.empty()) {
        std::fputs(text.c_str(), stdout);
    } else {
        std::ofstream f(cfg.out, std::ios::binary);
        if (!f) throw ConfigError("cannot open output file: " + cfg.out);
        f << text;
    }
}

// crude polyline plot; the CSV is the contract, this is convenience
void write_svg(const std::string& path, const std::vector<double>& xs,
               const std::vector<std::vector<double>>& series) {
    double xmin = 1e300, xmax = -1e300, ymin = 0.0, ymax = -1e300;
    for (double x : xs) { xmin = std::min(xmin, x); xmax = std::max(xmax, x); }
    for (const auto& s : series)
        for (double y : s)
            if (std::isfinite(y)) ymax = std::max(ymax, y);
    if (!(xmax > xmin)) xmax = xmin + 1.0;
    if (!(ymax > ymin)) ymax = ymin + 1.0;
    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"480\" "
         "viewBox=\"0 0 640 480\">\n<rect width=\"640\" height=\"480\" fill=\"white\"/>\n";
    const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
    for (std::size_t k = 0; k < series.size(); ++k) {
        o << "<polyline fill=\"none\" stroke=\"" << colors[k % 4] << "\" points=\"";
        for (std::size_t i = 0; i < xs.size(); ++i) {
            if (!std::isfinite(series[k][i])) continue;
            double px = 40 + 560 * (xs[i] - xmin) / (xmax - xmin);
            double py = 440 - 400 * (series[k][i] - ymin) / (ymax - ymin);
            o << fmt(px) << "," << fmt(py) << " ";
        }
        o << "\"/>\n";
    }
    o << "</svg>\n";
    std::ofstream f(path, std::ios::binary);
    f << o.str();
}

const ScalarConvexFunction& require_loss(const RunConfig& cfg) {
    if (!cfg.loss) throw ConfigError("missing \"loss\" descriptor");
    return *cfg.loss;
}
const MarginalLaw& require_noise(const RunConfig& cfg) {
    if (!cfg.noise) throw ConfigError("missing \"noise\" law descriptor");
    return *cfg.noise;
}

int cmd_threshold(const RunConfig& cfg) {
    const auto& loss = require_loss(cfg);
    const auto& noise = require_noise(cfg);
    ExpectationEngine eng = cfg.engine();
    json out;
    if (cfg.reg) {
        if (!cfg.signal) throw ConfigError("regularized threshold needs a \"signal\" law");
        PerfectThreshold th = delta_perfect_reg(loss, noise, *cfg.reg, *cfg.signal, eng);
        out["delta_perfect"] = th.infinite ? json("inf") : json(th.delta);
        out["j_loss_min"] = th.j_loss;
        out["j_reg_min"] = th.j_reg;
        out["borderline"] = th.borderline;
    } else {
        PerfectThreshold th = delta_perfect_unreg(loss, noise, eng);
        out["delta_perfect"] = th.infinite ? json("inf") : json(th.delta);
        out["j_loss_min"] = th.j_loss;
        out["borderline"] = th.borderline;
    }
    write_output(cfg, out.dump(2) + "\n");
    return 0;
}

json solution_to_json(const SystemSolution& s) {
    json out;
    out["alpha"] = s.alpha;
    out["kappa"] = std::isinf(s.kappa) ? json("inf") : json(s.kappa);
    if (s.beta > 0) {
        out["beta"] = s.beta;
        out["nu"] = s.nu;
    }
    out["residuals"] = s.residuals;
    out["iterations"] = s.iterations;
    out["status"] = s.status == SolveStatus::Converged ? "converged"
                    : s.status == SolveStatus::AtZero  ? "at_zero"
                                                       : "max_iter";
    if (!s.warnings.empty()) out["warnings"] = s.warnings;
    return out;
}

int cmd_solve(const RunConfig& cfg) {
    const auto& loss = require_loss(cfg);
    const auto& noise = require_noise(cfg);
    if (!cfg.delta) throw ConfigError("missing \"delta\"");
    ExpectationEngine eng = cfg.engine();
    SystemSolution s;
    if (cfg.reg) {
        if (!cfg.signal) throw ConfigError("regularized solve needs a \"signal\" law");
        s = solve_reg(loss, *cfg.reg, noise, *cfg.signal, *cfg.delta, cfg.tol, eng);
    } else {
        s = solve_unreg(loss, noise, *cfg.delta, cfg.tol, eng);
    }
    write_output(cfg, solution_to_json(s).dump(2) + "\n");
    return 0;
}

int cmd_risk_curve(const RunConfig& cfg) {
    const auto& loss = require_loss(cfg);
    const auto& noise = require_noise(cfg);
    if (!cfg.reg) throw ConfigError("risk-curve needs a \"reg\" descriptor");
    if (!cfg.signal) throw ConfigError("risk-curve needs a \"signal\" law");
    if (!cfg.delta) throw ConfigError("missing \"delta\"");
    ExpectationEngine eng = cfg.engine();
    auto curve = risk_curve(loss, *cfg.reg, noise, *cfg.signal, *cfg.delta, cfg.lambda_grid,
                            cfg.tol, eng);
    std::ostringstream o;
    o << "lambda,alpha,status,residual_max\n";
    std::vector<double> xs, ys;
    for (const auto& pt : curve) {
        const char* st = pt.status == SolveStatus::Converged ? "converged"
                         : pt.status == SolveStatus::AtZero  ? "at_zero"
                                                             : "max_iter";
        o << fmt(pt.lambda) << "," << fmt(pt.alpha) << "," << st << ","
          << fmt(pt.residual_max) << "\n";
        xs.push_back(std::log10(pt.lambda));
        ys.push_back(pt.alpha * pt.alpha);
    }
    write_output(cfg, o.str());
    if (cfg.svg && !cfg.out.empty()) write_svg(cfg.out + ".svg", xs, {ys});
    return 0;
}

int cmd_statdim(const RunConfig& cfg) {
    const auto& loss = require_loss(cfg);
    const auto& noise = require_noise(cfg);
    StatDimEstimate est = statdim_fraction(loss, noise, cfg.m_arg, cfg.samples_arg,
                                           cfg.master_seed);
    json out;
    out["m"] = est.m;
    out["mean_dist_sq"] = est.mean_dist_sq;
    out["statdim_fraction"] = est.statdim_fraction;
    out["std_error"] = est.std_error;
    write_output(cfg, out.dump(2) + "\n");
    return 0;
}

int cmd_simulate(const RunConfig& cfg) {
    const auto& loss = require_loss(cfg);
    const auto& noise = require_noise(cfg);
    if (cfg.p < 1 && cfg.n < 1) throw ConfigError("simulate needs n or p");
    std::vector<double> deltas = cfg.delta_grid;
    if (deltas.empty()) {
        if (!cfg.delta) throw ConfigError("missing \"delta\" (or delta_grid)");
        deltas = {*cfg.delta};
    }
    std::ostringstream o;
    o << "replicate,n,p,delta,lambda,empirical_risk,recovered,kkt_certificate_norm,iters\n";
    for (double d : deltas) {
        int p = cfg.p, n = cfg.n;
        if (p >= 1)
            n = std::max(1, static_cast<int>(std::lround(d * p)));
        else
            p = std::max(1, static_cast<int>(std::lround(n / d)));
        for (int rep = 0; rep < cfg.replicates; ++rep) {
            std::uint64_t rep_seed = cfg.master_seed * 1000003ULL + rep;
            MarginalLaw signal = cfg.signal ? *cfg.signal : MarginalLaw::point_mass(0.0);
            ProblemInstance inst = generate(n, p, noise, signal, rep_seed);
            double lam = 0.0, risk = 0.0, cert = 0.0;
            bool rec = false;
            int iters = 0;
            if (cfg.reg) {
                RecoveryCertificate rc =
                    certify_perfect_recovery_reg(inst, loss, *cfg.reg, cfg.lambda_grid);
                rec = rc.recovered;
                cert = rc.certificate_norm;
                if (rc.lambda_witness) lam = *rc.lambda_witness;
                double best = kInf;
                for (double l : cfg.lambda_grid) {
                    ScalarConvexFunction rs = cfg.reg->scaled(l);
                    auto sol = solve_mestimator(inst, loss, &rs, 1e-8, 6000);
                    iters += sol.iterations;
                    best = std::min(best, empirical_risk(inst, sol.x));
                }
                risk = best;
            } else {
                RecoveryCertificate rc = certify_perfect_recovery_unreg(inst, loss);
                rec = rc.recovered;
                cert = rc.certificate_norm;
                if (n > p) {
                    auto sol = solve_mestimator(inst, loss, nullptr, 1e-8);
                    iters = sol.iterations;
                    risk = empirical_risk(inst, sol.x);
                }
            }
            o << rep << "," << n << "," << p << "," << fmt(d) << "," << fmt(lam) << ","
              << fmt(risk) << "," << (rec ? 1 : 0) << "," << fmt(cert) << "," << iters << "\n";
        }
    }
    write_output(cfg, o.str());
    return 0;
}

int cmd_phase_diagram(const RunConfig& cfg) {
    const auto& loss = require_loss(cfg);
    const auto& noise = require_noise(cfg);
    if (cfg.s_grid.empty() || cfg.delta_grid.empty())
        throw ConfigError("phase-diagram needs s_grid and delta_grid");
    if (cfg.n < 1) throw ConfigError("phase-diagram needs n");
    // s scales the non-atomic part of the configured noise law
    MarginalLaw::Continuous base{1.0, MarginalLaw::ContKind::Cauchy, 1.0};
    if (!noise.components.empty()) base = noise.components.front();
    ExpectationEngine eng = cfg.engine();
    std::ostringstream o;
    o << "s,delta,predicted_boundary,empirical_recovery_freq\n";
    for (double s : cfg.s_grid) {
        MarginalLaw law;
        law.atoms.push_back({1.0 - s, 0.0});
        MarginalLaw::Continuous c = base;
        c.weight = s;
        law.components.push_back(c);
        double boundary;
        try {
            PerfectThreshold th = delta_perfect_unreg(loss, law, eng);
            boundary = th.delta;
        } catch (const std::exception&) {
            boundary = std::nan("");
        }
        for (double d : cfg.delta_grid) {
            int n = cfg.n;
            int p = std::max(1, static_cast<int>(std::lround(n / d)));
            int hits = 0;
            for (int rep = 0; rep < cfg.replicates; ++rep) {
                std::uint64_t rep_seed =
                    cfg.master_seed * 1000003ULL + rep * 1009ULL + static_cast<int>(s * 1e6);
                ProblemInstance inst =
                    generate(n, p, law, MarginalLaw::point_mass(0.0), rep_seed);
                if (certify_perfect_recovery_unreg(inst, loss).recovered) ++hits;
            }
            o << fmt(s) << "," << fmt(d) << "," << fmt(boundary) << ","
              << fmt(static_cast<double>(hits) / cfg.replicates) << "\n";
        }
    }
    write_output(cfg, o.str());
    return 0;
}

int cmd_figures(const RunConfig& cfg) {
    const auto& noise = require_noise(cfg);
    if (cfg.delta_grid.empty()) throw ConfigError("figures needs delta_grid");
    ExpectationEngine eng = cfg.engine();
    std::ostringstream o;
    o << "figure,loss,delta,alpha_sq\n";
    std::vector<double> xs;
    std::vector<std::vector<double>> series(2);
    auto l1 = ScalarConvexFunction::abs();
    auto hub = ScalarConvexFunction::huber(1.0);
    PerfectThreshold th = delta_perfect_unreg(l1, noise, eng);
    for (double d : cfg.delta_grid) {
        xs.push_back(d);
        for (int k = 0; k < 2; ++k) {
            const auto& f = k == 0 ? l1 : hub;
            double a2;
            if (k == 0 && d >= th.delta) {
                a2 = 0.0;
            } else {
                SystemSolution s = solve_unreg(f, noise, d, cfg.tol, eng);
                a2 = s.alpha * s.alpha;
            }
            series[k].push_back(a2);
            o << "risk_compare," << (k == 0 ? "abs" : "huber") << "," << fmt(d) << ","
              << fmt(a2) << "\n";
        }
    }
    write_output(cfg, o.str());
    if (cfg.svg && !cfg.out.empty()) write_svg(cfg.out + ".svg", xs, series);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"asymptotic risk and phase transitions of convex regularized M-estimators"};
    app.require_subcommand(1);
    CommonArgs args;

    auto* c_threshold = app.add_subcommand("threshold", "perfect-recovery threshold report");
    auto* c_solve = app.add_subcommand("solve", "solve the low-dimensional system");
    auto* c_curve = app.add_subcommand("risk-curve", "lambda sweep of the regularized system");
    auto* c_phase = app.add_subcommand("phase-diagram", "(s, delta) recovery phase diagram");
    auto* c_sim = app.add_subcommand("simulate", "finite-sample experiment battery");
    auto* c_statdim = app.add_subcommand("statdim", "statistical-dimension estimate");
    auto* c_figures = app.add_subcommand("figures", "figure data emission");
    for (auto* c : {c_threshold, c_solve, c_curve, c_phase, c_sim, c_statdim, c_figures})
        args.attach(c);

    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig cfg = args.resolve();
        cfg.m_arg = args.m;
        cfg.samples_arg = args.samples;
        if (c_threshold->parsed()) return cmd_threshold(cfg);
        if (c_solve->parsed()) return cmd_solve(cfg);
        if (c_curve->parsed()) return cmd_risk_curve(cfg);
        if (c_phase->parsed()) return cmd_phase_diagram(cfg);
        if (c_sim->parsed()) return cmd_simulate(cfg);
        if (c_statdim->parsed()) return cmd_statdim(cfg);
        if (c_figures->parsed()) return cmd_figures(cfg);
    } catch (const mrisk::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "validation error: %s\n", e.what());
        return 2;
    } catch (const mrisk::NotMinimizedAtZero& e) {
        std::fprintf(stderr, "validation error: %s\n", e.what());
        return 2;
    } catch (const mrisk::InvalidAssumption& e) {
        std::fprintf(stderr, "validation error: %s\n", e.what());
        return 2;
    } catch (const mrisk::DegenerateNoise& e) {
        std::fprintf(stderr, "validation error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 3;
    }
    return 0;
}
