#pragma once

#include "exwave/geometry.hpp"
#include "exwave/wavesim.hpp"

#include <cmath>
#include <functional>
#include <vector>

namespace exwave::testing {

/// Free-space cube Sigma = [-half, half]^3 with Q0 = [-q0, q0]^3 and Q1 = Q0 padded by `pad`.
inline DomainConfig cube_config(double h, double half, double q0, double pad, double margin, double sponge)
{
    DomainConfig c;
    c.sigma = {{-half, -half, -half}, {half, half, half}};
    c.q0 = {{-q0, -q0, -q0}, {q0, q0, q0}};
    c.q1 = c.q0.inflated(pad);
    c.patch = {PatchRect{2, 1, {0, 0}, {0, 0}, true}};
    c.h = h;
    c.margin = margin;
    c.sponge_width = sponge;
    return c;
}

inline ScalarField sample(const GridSpec& g, const std::function<double(const Vec3&)>& fn)
{
    ScalarField f(g);
    for (std::size_t n = 0; n < g.size(); ++n) {
        const auto c = g.unravel(n);
        f[n] = fn(g.position(c[0], c[1], c[2]));
    }
    return f;
}

/// Compactly supported radial pulse (1 - |x - x0|^2 / R^2)^p.
inline std::function<double(const Vec3&)> pulse(const Vec3& x0, double radius, int power)
{
    return [=](const Vec3& p) {
        const auto d = p - x0;
        const double r2 = dot(d, d) / (radius * radius);
        return r2 < 1.0 ? std::pow(1.0 - r2, power) : 0.0;
    };
}

/// Linear index of the node nearest to `p`.
inline std::size_t node_at(const GridSpec& g, const Vec3& p)
{
    std::array<int, 3> c{};
    for (int a = 0; a < 3; ++a) c[a] = static_cast<int>(std::lround((p[a] - g.origin[a]) / g.h));
    return g.index(c[0], c[1], c[2]);
}

inline double max_abs(const ScalarField& f)
{
    double m = 0.0;
    for (double v : f.values()) m = std::max(m, std::abs(v));
    return m;
}

/// Free-space solution of a smooth pulse after `steps0 * 2^level` steps on
/// grid h0 / 2^level with dt proportional to h, sampled at the nodes of the
/// coarsest grid inside Sigma.
inline std::vector<double> pulse_solution(double h0, int level, double dt0, int steps0)
{
    const double scale = std::ldexp(1.0, -level);
    const double h = h0 * scale;
    auto config = cube_config(h, 0.48, 0.32, 0.08, 0.16, 0.0);
    const auto domain = build_domain(config);
    const auto speed = SpeedField::uniform(domain.grid);
    SimOptions options;
    options.sponge = false;
    options.dt = dt0 * scale;
    const Simulator sim(domain, speed, options);
    auto data = InitialData::zero(domain.grid);
    data.f = sample(domain.grid, pulse({0.0, 0.0, 0.0}, 0.3, 6));
    auto state = sim.init_state(data);
    const int steps = steps0 << level;
    while (state.step < steps) sim.step(state);
    std::vector<double> out;
    const int n = static_cast<int>(std::lround(0.48 / h0));
    for (int k = -n; k <= n; ++k)
        for (int j = -n; j <= n; ++j)
            for (int i = -n; i <= n; ++i)
                out.push_back(state.u_curr[node_at(domain.grid, {i * h0, j * h0, k * h0})]);
    return out;
}

/// Ratio |u_h - u_{h/2}| / |u_{h/2} - u_{h/4}| in the max norm over shared nodes.
inline double richardson_ratio(double h0, double dt0, int steps0)
{
    const auto a = pulse_solution(h0, 0, dt0, steps0);
    const auto b = pulse_solution(h0, 1, dt0, steps0);
    const auto c = pulse_solution(h0, 2, dt0, steps0);
    double d1 = 0.0;
    double d2 = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        d1 = std::max(d1, std::abs(a[i] - b[i]));
        d2 = std::max(d2, std::abs(b[i] - c[i]));
    }
    return d1 / d2;
}

}  // namespace exwave::testing
