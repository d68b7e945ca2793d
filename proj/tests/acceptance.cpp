#include "exwave/config.hpp"
#include "exwave/error.hpp"
#include "exwave/harness.hpp"
#include "exwave/moments.hpp"
#include "exwave/quadrature.hpp"
#include "exwave/reconstruct.hpp"
#include "test_support.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

using namespace exwave;
using namespace exwave::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* pattern, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, pattern, args...);
    return buf;
}

fs::path scratch_root()
{
    static const fs::path root = fs::temp_directory_path() / ("exwave_acceptance_" + std::to_string(::getpid()));
    return root;
}

fs::path scratch(const std::string& name)
{
    const auto dir = scratch_root() / name;
    fs::create_directories(dir);
    return dir;
}

ExperimentConfig config_file(const std::string& name) { return load_config(fs::path(EXWAVE_CONFIG_DIR) / name); }

/// Largest |u| over the nodes of Q at every step.
struct MaxOverQ : Recorder {
    explicit MaxOverQ(const DomainSpec& d) : domain(&d) {}
    void observe(const Snapshot& snap) override
    {
        double m = 0.0;
        for (std::size_t n = 0; n < snap.u->size(); ++n)
            if (domain->in_q(n)) m = std::max(m, std::abs((*snap.u)[n]));
        samples.emplace_back(snap.t, m);
    }
    const DomainSpec* domain;
    std::vector<std::pair<double, double>> samples;
};

/// max|u| over Q after (1 + kGroupLag) times the clearing time, relative to the peak.
double huygens_ratio(double h)
{
    auto config = config_file("huygens.toml");
    config.domain.h = h;
    const auto domain = build_domain(config.domain);
    const auto speed = sample_speed(config.speed, domain.grid);
    const Simulator sim(domain, speed, sim_options(config, config.speed.c1()));
    MaxOverQ rec(domain);
    Recorder* recs[] = {&rec};
    sim.run(assemble_pair(config.data, domain), config.sim.t_max, recs);
    const double t_after = (1.0 + kGroupLag) * clearing_time(domain, config.speed.c0());
    double peak = 0.0;
    double late = 0.0;
    for (const auto& [t, m] : rec.samples) {
        peak = std::max(peak, m);
        if (t >= t_after) late = std::max(late, m);
    }
    return late / peak;
}

Outcome huygens_clearing()
{
    const double coarse = huygens_ratio(0.04);
    const double fine = huygens_ratio(0.02);
    return {coarse <= 1e-3 && coarse >= 2.0 * fine,
            fmt("late/peak %.3e at h=0.04, %.3e at h=0.02 (improvement %.1fx)", coarse, fine, coarse / fine)};
}

Outcome scheme_order()
{
    const double order = std::log2(richardson_ratio(0.02, 0.005, 60));
    return {std::abs(order - 2.0) <= 0.3, fmt("observed order %.3f", order)};
}

Outcome moment_normalization()
{
    const auto d = build_domain(cube_config(0.1, 0.8, 0.3, 0.2, 0.2, 0.0));
    const auto h = sample(d.grid, pulse({0.1, 0.0, -0.1}, 0.5, 3));
    const double dt = 1e-3;
    MomentAccumulator acc(d, {0, 1, 2, 3});
    ScalarField u(d.grid);
    Snapshot snap;
    snap.dt = dt;
    snap.u = &u;
    const int steps = 40000;
    for (int m = 0; m <= steps; ++m) {
        const double e = std::exp(-m * dt);
        for (std::size_t n = 0; n < u.size(); ++n) u[n] = e * h[n];
        snap.step = m;
        snap.t = m * dt;
        acc.observe(snap);
    }
    acc.finish(snap);
    const auto data = acc.take();
    double worst = 0.0;
    for (int k = 0; k <= 3; ++k) {
        const double sgn = k % 2 == 0 ? 1.0 : -1.0;
        double num = 0.0;
        double den = 0.0;
        for (std::size_t n = 0; n < h.size(); ++n) {
            const double diff = data.field(k)[n] - sgn * h[n];
            num += diff * diff;
            den += h[n] * h[n];
        }
        worst = std::max(worst, std::sqrt(num / den));
    }
    return {worst <= 1e-6, fmt("worst relative error over k=0..3 %.3e", worst)};
}

std::vector<double> chain_residuals(double h, const std::string& name)
{
    auto config = config_file("moments_chain.toml");
    config.domain.h = h;
    const auto out = experiment_moments(config, scratch(name));
    for (const auto& r : out.report["poisson_residuals"])
        if (r["region"] == "Q0" && r["stencil"] == "fourth_order") return r["residual"].get<std::vector<double>>();
    throw Error(ErrorKind::EmptyMask, "no residual on Q0");
}

Outcome poisson_chain()
{
    const auto c = chain_residuals(0.04, "chain_h04");
    const auto f = chain_residuals(0.02, "chain_h02");
    bool ok = c[0] <= 0.1 && c[1] <= 0.1 && c[2] <= 0.15;
    std::string shrink;
    for (int k = 0; k <= 2; ++k) {
        const double s = c[k] / f[k];
        ok = ok && s >= 2.5 && s <= 5.0;
        shrink += fmt(" %.2f", s);
    }
    return {ok, fmt("r0 %.4f r1 %.4f r2 %.4f at h=0.04; shrink factors", c[0], c[1], c[2]) + shrink};
}

Outcome green_identity()
{
    DomainConfig c;
    c.sigma = {{-0.5, -0.5, -0.5}, {0.5, 0.5, 0.5}};
    c.q0 = {{-0.2, -0.2, -0.2}, {0.2, 0.2, 0.2}};
    c.q1 = c.q0.inflated(0.1);
    c.patch = {PatchRect{2, 1, {0, 0}, {0, 0}, true}};
    c.h = 0.04;
    c.margin = 0.16;
    c.sponge_width = 0.2;
    const auto d = build_domain(c);
    const auto mesh = boundary_mesh(SurfaceTag::Sigma, d);
    const Vec3 x0{0.05, -0.03, 0.02};
    const double a = 0.08;
    MomentTraces tr;
    tr.mesh = mesh;
    for (std::size_t i = 0; i < mesh.size(); ++i) {
        const auto q = mesh.points[i] - x0;
        const double v = std::exp(-dot(q, q) / a);
        tr.value.push_back(v);
        tr.dnu.push_back(-2.0 / a * dot(q, mesh.normals[i]) * v);
    }
    const auto gl = gauss_legendre(48, -0.5, 0.5);
    double worst = 0.0;
    for (int e1 = -10; e1 <= 10; ++e1)
        for (int e2 = -10; e2 <= 10; ++e2) {
            if (std::hypot(e1, e2) > 10.0) continue;
            for (int s : {-1, 1}) {
                const auto probe = make_probe(e1, e2, s);
                const auto factor = [&](int axis, bool second) {
                    Complex acc = 0.0;
                    for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
                        const double x = gl.nodes[i];
                        const double q = x - x0[axis];
                        const double g = std::exp(-q * q / a);
                        const double v = second ? (4.0 * q * q / (a * a) - 2.0 / a) * g : g;
                        const Complex ph = axis == 0   ? std::exp(Complex(0.0, -e1 * x))
                                           : axis == 1 ? std::exp(Complex(0.0, -e2 * x))
                                                       : Complex(std::exp(probe.zeta * x), 0.0);
                        acc += gl.weights[i] * v * ph;
                    }
                    return acc;
                };
                Complex volume = 0.0;
                for (int axis = 0; axis < 3; ++axis) {
                    Complex t = 1.0;
                    for (int b = 0; b < 3; ++b) t *= factor(b, b == axis);
                    volume -= t;
                }
                worst = std::max(worst, std::abs(green_integral(tr, probe) - volume) / std::abs(volume));
            }
        }
    return {worst <= 0.01, fmt("worst relative mismatch over |eta'| <= 10 %.3e", worst)};
}

/// Shared end-to-end run for the Fourier, tradeoff and reproducibility checks.
struct EndToEnd {
    nlohmann::json report;
    fs::path dir;
};

const EndToEnd& end_to_end_run()
{
    static const EndToEnd run = [] {
        const auto dir = scratch("end_to_end_a");
        auto out = experiment_reconstruct(config_file("end_to_end.toml"), dir, ReconstructionMode::SweepNoise);
        return EndToEnd{out.report, dir};
    }();
    return run;
}

Outcome fourier_recovery()
{
    const auto& run = end_to_end_run();
    const double s = config_file("end_to_end.toml").data.g.sigma;
    std::ifstream in(run.dir / "fourier.csv");
    std::string line;
    std::getline(in, line);
    std::vector<std::array<double, 4>> rows;
    while (std::getline(in, line)) {
        std::array<double, 4> r{};
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ls(line);
        for (auto& v : r) ls >> v;
        rows.push_back(r);
    }
    double worst = 0.0;
    double peak = 0.0;
    double asym = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        const auto& m = rows[rows.size() - 1 - i];
        const double eta = std::hypot(r[0], r[1]);
        peak = std::max(peak, std::hypot(r[2], r[3]));
        asym = std::max(asym, std::hypot(r[2] - m[2], r[3] + m[3]));
        if (eta > 12.0 + 1e-9) continue;
        const double fa = 2.0 * std::numbers::pi * s * s * std::exp(-0.5 * s * s * eta * eta);
        worst = std::max(worst, std::hypot(r[2] - fa, r[3]) / fa);
    }
    const double sym = asym / peak;
    return {!rows.empty() && worst <= 0.05 && sym <= 1e-8,
            fmt("worst relative error over |eta'| <= 12 %.3e; conjugate asymmetry %.3e", worst, sym)};
}

Outcome reconstruction_tradeoff()
{
    const auto& ch = end_to_end_run().report["channels"][0];
    const auto& table = ch["table"];
    bool ok = true;
    std::string detail;
    for (const auto& row : table) {
        const double eps = row["eps"];
        const auto errs = row["errors"].get<std::vector<double>>();
        if (eps == 0.0) {
            const double floor = *std::min_element(errs.begin(), errs.end());
            bool monotone = true;
            for (std::size_t i = 1; i < errs.size(); ++i)
                monotone = monotone && errs[i] <= errs[i - 1] + 0.01 * floor;
            ok = ok && monotone && floor <= 0.15;
            detail += fmt("noiseless min %.4f %s", floor, monotone ? "monotone" : "not monotone");
        } else {
            const bool u = row["u_shaped"];
            ok = ok && u;
            detail += fmt("; eps %.0e rho* %g min %.4f%s", eps, row["rho_star"].get<double>(),
                          row["min_error"].get<double>(), u ? "" : " not U-shaped");
        }
    }
    const bool rho_ok = ch["rho_star_nonincreasing_in_eps"];
    const bool err_ok = ch["min_error_nondecreasing_in_eps"];
    ok = ok && rho_ok && err_ok && table.size() == 4;
    detail += fmt("; rho* nonincreasing %s, min error nondecreasing %s", rho_ok ? "yes" : "no", err_ok ? "yes" : "no");
    return {ok, detail};
}

double decay_rate(double h, const std::string& name, double& r_squared)
{
    auto config = config_file("decay_sphere.toml");
    config.domain.h = h;
    config.decay.control = false;
    const auto out = experiment_decay(config, scratch(name));
    r_squared = out.report["fit"]["r_squared"];
    return out.report["fit"]["delta"];
}

Outcome exponential_decay()
{
    double r2c = 0.0;
    double r2f = 0.0;
    const double dc = decay_rate(0.05, "decay_h05", r2c);
    const double df = decay_rate(0.035, "decay_h035", r2f);
    const double spread = std::abs(dc - df) / std::max(dc, df);
    return {dc > 0.0 && df > 0.0 && r2c >= 0.9 && r2f >= 0.9 && spread <= 0.3,
            fmt("delta %.4f (R2 %.3f) at h=0.05, %.4f (R2 %.3f) at h=0.035, spread %.1f%%", dc, r2c, df, r2f,
                100.0 * spread)};
}

Outcome speed_contrast()
{
    const auto out = experiment_speed(config_file("speed_contrast.toml"), scratch("speed"));
    const double err = out.report["contrast"]["rel_error_c"];
    const double n = out.report["norms"]["N"];
    const double floor = out.report["control_norms"]["N"];
    return {err <= 0.2 && floor <= 1e-12 * n,
            fmt("c error %.4f; control data norm %.3e vs contrast data norm %.3e", err, floor, n)};
}

Outcome cauchy_extension()
{
    DomainConfig c;
    c.obstacle = SphereObstacle{{0.0, 0.0, 0.0}, 0.2};
    c.q0 = {{0.35, -0.15, -0.15}, {0.65, 0.15, 0.15}};
    c.q1 = c.q0.inflated(0.1);
    c.sigma = {{-1.0, -1.0, -1.0}, {1.0, 1.0, 1.0}};
    c.patch = {PatchRect{0, 1, {0, 0}, {0, 0}, true}};
    c.h = 0.05;
    c.margin = 0.16;
    c.sponge_width = 0.2;
    const auto d = build_domain(c);
    const auto patch = boundary_mesh(SurfaceTag::Patch, d);
    const auto target = obstacle_mesh(d.obstacle, c.h);
    const Vec3 ys{0.5, 0.03, -0.02};
    const auto value = [&](const Vec3& p) { return 1.0 / norm(p - ys); };
    const auto flux = [&](const Vec3& p, const Vec3& n) {
        const auto q = p - ys;
        const double r = norm(q);
        return -dot(q, n) / (r * r * r);
    };
    const auto traces = [&](double noise) {
        MomentTraces t;
        t.mesh = patch;
        double mv = 0.0;
        double mf = 0.0;
        for (std::size_t i = 0; i < patch.size(); ++i) {
            mv = std::max(mv, std::abs(value(patch.points[i])));
            mf = std::max(mf, std::abs(flux(patch.points[i], patch.normals[i])));
        }
        std::mt19937_64 rng(3);
        std::normal_distribution<double> gauss(0.0, 1.0);
        for (std::size_t i = 0; i < patch.size(); ++i) {
            t.value.push_back(value(patch.points[i]) + noise * mv * gauss(rng));
            t.dnu.push_back(flux(patch.points[i], patch.normals[i]) + noise * mf * gauss(rng));
        }
        return t;
    };
    const auto error = [&](const CauchyExtension& e) {
        double num = 0.0;
        double den = 0.0;
        for (std::size_t i = 0; i < target.size(); ++i) {
            const double t = flux(target.points[i], target.normals[i]);
            const double diff = e.completed.dnu[i] - t;
            num += target.weights[i] * diff * diff;
            den += target.weights[i] * t * t;
        }
        return std::sqrt(num / den);
    };
    const double clean = error(cauchy_extend(traces(0.0), target, d));
    const auto noisy = traces(0.01);
    std::vector<double> lambdas;
    std::vector<double> errs;
    CauchyOptions o;
    for (int p = -12; p <= 0; ++p) {
        o.lambda = std::pow(10.0, p);
        lambdas.push_back(o.lambda);
        errs.push_back(error(cauchy_extend(noisy, target, d, o)));
    }
    const auto best = static_cast<std::size_t>(std::distance(errs.begin(), std::min_element(errs.begin(), errs.end())));
    const bool interior = best > 0 && best + 1 < errs.size();
    return {clean <= 0.2 && interior,
            fmt("noiseless flux error %.4f; 1%% noise sweep minimum %.4f at lambda %.0e (%s)", clean, errs[best],
                lambdas[best], interior ? "interior" : "endpoint")};
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome reproducibility()
{
    const auto& first = end_to_end_run();
    const auto dir = scratch("end_to_end_b");
    experiment_reconstruct(config_file("end_to_end.toml"), dir, ReconstructionMode::SweepNoise);
    std::size_t compared = 0;
    std::size_t differing = 0;
    for (const auto& entry : fs::directory_iterator(first.dir)) {
        const auto name = entry.path().filename();
        if (name == "timing.json") continue;
        ++compared;
        if (!fs::exists(dir / name) || slurp(entry.path()) != slurp(dir / name)) ++differing;
    }
    return {compared > 0 && differing == 0, fmt("%zu data files compared, %zu differ", compared, differing)};
}

}  // namespace

int main()
{
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"huygens clearing", huygens_clearing},
        {"scheme order", scheme_order},
        {"moment normalization", moment_normalization},
        {"poisson chain", poisson_chain},
        {"green identity", green_identity},
        {"fourier recovery", fourier_recovery},
        {"reconstruction tradeoff", reconstruction_tradeoff},
        {"exponential local decay", exponential_decay},
        {"speed contrast", speed_contrast},
        {"cauchy extension (stretch)", cauchy_extension},
        {"reproducibility", reproducibility},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome r;
        try {
            r = criteria[i].second();
        } catch (const std::exception& e) {
            r = {false, std::string("exception: ") + e.what()};
        }
        if (!r.pass) ++failures;
        std::printf("criterion %2zu %-28s %s  %s\n", i + 1, criteria[i].first.c_str(), r.pass ? "PASS" : "FAIL",
                    r.detail.c_str());
        std::fflush(stdout);
    }
    std::error_code ec;
    fs::remove_all(scratch_root(), ec);
    return failures == 0 ? 0 : 1;
}
