#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "mrisk/marginals.hpp"
#include "mrisk/math.hpp"
#include "mrisk/scalar_convex.hpp"

namespace mrisk {

// dist(g, cone(subdiff h(w)))^2 = inf_{t >= 0} sum_i dist(g_i, t [lo_i, hi_i])^2.
// The objective is convex in t; minimized by golden-section on a doubling
// bracket, with the t = 0 endpoint (the cone contains the origin) included.
inline double dist_to_cone_sq(const std::vector<double>& g, const std::vector<double>& w,
                              const ScalarConvexFunction& h) {
    if (g.size() != w.size() || g.empty())
        throw std::invalid_argument("dist_to_cone_sq: g and w must be nonempty, equal length");
    const std::size_t m = g.size();
    std::vector<SubdiffInterval> iv(m);
    double scale = 0.0, gnorm_sq = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        iv[i] = h.subdiff(w[i]);
        scale = std::max({scale, std::abs(iv[i].lo), std::abs(iv[i].hi)});
        gnorm_sq += g[i] * g[i];
    }
    if (scale == 0.0) return gnorm_sq;  // cone is {0}
    auto obj = [&](double t) {
        double s = 0.0;
        for (std::size_t i = 0; i < m; ++i) s += iv[i].dist_sq_scaled(g[i], t);
        return s;
    };
    double hi = 10.0 * (std::sqrt(gnorm_sq) / scale + 1.0);
    while (obj(2.0 * hi) < obj(hi)) hi *= 2.0;
    GoldenResult r = golden_min(obj, 0.0, hi, 1e-12, 300);
    return std::min({r.value, obj(0.0), gnorm_sq});
}

struct StatDimEstimate {
    std::size_t m = 0;
    double mean_dist_sq = 0.0;
    double statdim_fraction = 0.0;  // 1 - mean_dist_sq / m
    double std_error = 0.0;         // MC standard error of the fraction
};

// Monte Carlo estimate of statdim(cone(subdiff h(w))) / m for w with iid
// entries from the law and independent standard Gaussian g.
inline StatDimEstimate statdim_fraction(const ScalarConvexFunction& h, const MarginalLaw& law,
                                        std::size_t m, std::size_t n_mc, std::uint64_t seed) {
    if (m < 1 || n_mc < 1)
        throw std::invalid_argument("statdim_fraction: m and n_mc must be >= 1");
    law.validate();
    double sum = 0.0, sum_sq = 0.0;
    std::vector<double> g(m), w(m);
    for (std::size_t rep = 0; rep < n_mc; ++rep) {
        Philox rng(seed, rep);
        for (std::size_t i = 0; i < m; ++i) {
            auto d = gauss_draw(rng, 0, i);
            auto d2 = gauss_draw(rng, 1, i);
            g[i] = d.g;
            w[i] = law.draw(d2.u_select, d2.g, d2.u_aux);
        }
        double v = dist_to_cone_sq(g, w, h) / m;
        sum += v;
        sum_sq += v * v;
    }
    StatDimEstimate est;
    est.m = m;
    est.mean_dist_sq = (sum / n_mc) * m;
    est.statdim_fraction = 1.0 - sum / n_mc;
    double var = std::max(0.0, sum_sq / n_mc - (sum / n_mc) * (sum / n_mc));
    est.std_error = std::sqrt(var / n_mc);
    return est;
}

}  // namespace mrisk
