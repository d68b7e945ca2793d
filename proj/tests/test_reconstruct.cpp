#include "exwave/error.hpp"
#include "exwave/quadrature.hpp"
#include "exwave/reconstruct.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace exwave;
using namespace exwave::testing;

namespace {

constexpr double kPi = std::numbers::pi;

ErrorKind kind_of(const std::function<void()>& fn)
{
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "expected an exwave::Error";
    return ErrorKind::ConfigError;
}

DomainConfig unit_box(double h)
{
    auto c = cube_config(h, 0.5, 0.2, 0.1, 0.16, 0.2);
    return c;
}

PlaneField plane(double half, double h)
{
    PlaneField p;
    p.h = h;
    p.nx = p.ny = static_cast<int>(std::lround(2.0 * half / h)) + 1;
    p.x0 = p.y0 = -half;
    p.values.assign(static_cast<std::size_t>(p.nx) * p.ny, 0.0);
    return p;
}

/// Analytic transform of the Gaussian G(x') = exp(-|x'|^2 / (2 s^2)).
double gaussian_hat(double e1, double e2, double s)
{
    return 2.0 * kPi * s * s * std::exp(-0.5 * s * s * (e1 * e1 + e2 * e2));
}

FourierRecovery analytic_recovery(double half_width, double rho_max, double s)
{
    FourierRecovery r;
    r.d_eta = kPi / (2.0 * half_width);
    r.n = static_cast<int>(std::ceil(rho_max / r.d_eta));
    for (int j = -r.n; j <= r.n; ++j)
        for (int i = -r.n; i <= r.n; ++i) {
            r.eta1.push_back(i * r.d_eta);
            r.eta2.push_back(j * r.d_eta);
            r.zeta.push_back(0.0);
            r.weight.push_back(1.0);
            r.values.emplace_back(gaussian_hat(i * r.d_eta, j * r.d_eta, s), 0.0);
        }
    return r;
}

ContrastChannel channel(const PlaneField& shape, double q, double ref, bool mask)
{
    ContrastChannel c;
    c.q = shape;
    c.reference = shape;
    std::fill(c.q.values.begin(), c.q.values.end(), q);
    std::fill(c.reference.values.begin(), c.reference.values.end(), ref);
    c.mask.assign(shape.values.size(), mask);
    return c;
}

}  // namespace

TEST(Probe, PythagoreanTriple)
{
    const auto p = make_probe(3.0, 4.0, +1);
    EXPECT_EQ(p.zeta, 5.0);
    EXPECT_EQ(p.xi_dot_xi(), 0.0);
    EXPECT_EQ(make_probe(3.0, 4.0, -1).zeta, -5.0);
}

TEST(Probe, ZeroFrequencyIsConstant)
{
    const auto p = make_probe(0.0, 0.0);
    const Vec3 x{0.3, -0.2, 0.7};
    EXPECT_EQ(p.phi(x), Complex(1.0, 0.0));
    for (const auto& g : p.grad(x)) EXPECT_EQ(g, Complex(0.0, 0.0));
}

TEST(Probe, HarmonicToRoundoff)
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    for (int i = 0; i < 200; ++i) {
        const auto p = make_probe(u(rng), u(rng), i % 2 ? 1 : -1);
        EXPECT_LE(std::abs(p.xi_dot_xi()), 1e-12 * (1.0 + p.eta_norm() * p.eta_norm()));
    }
}

TEST(Probe, GradientMatchesFiniteDifference)
{
    const auto p = make_probe(2.0, -1.5, -1);
    const Vec3 x{0.1, 0.2, -0.3};
    const double e = 1e-6;
    const auto g = p.grad(x);
    for (int a = 0; a < 3; ++a) {
        Vec3 xp = x;
        Vec3 xm = x;
        xp[a] += e;
        xm[a] -= e;
        const Complex fd = (p.phi(xp) - p.phi(xm)) / (2.0 * e);
        EXPECT_NEAR(std::abs(fd - g[a]), 0.0, 1e-8);
    }
}

TEST(Probe, DiscreteLaplacianTaylorRemainder)
{
    // On a 32^3 grid the seven-point Laplacian of a continuum probe is bounded
    // by the fourth-derivative remainder h^2 / 12 (eta1^4 + eta2^4 + zeta^4) <= h^2 |xi|^4 / 6.
    const double h = 1.0 / 31.0;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-6.0, 6.0);
    for (int trial = 0; trial < 10; ++trial) {
        const auto p = make_probe(u(rng), u(rng), trial % 2 ? 1 : -1);
        double worst = 0.0;
        double phimax = 0.0;
        for (int k = 1; k < 31; ++k)
            for (int j = 1; j < 31; ++j)
                for (int i = 1; i < 31; ++i) {
                    const Vec3 x{i * h, j * h, k * h};
                    Complex lap = -6.0 * p.phi(x);
                    for (int a = 0; a < 3; ++a) {
                        Vec3 xp = x;
                        Vec3 xm = x;
                        xp[a] += h;
                        xm[a] -= h;
                        lap += p.phi(xp) + p.phi(xm);
                    }
                    lap /= h * h;
                    worst = std::max(worst, std::abs(lap));
                    phimax = std::max(phimax, std::abs(p.phi(x)));
                }
        const double xi4 = std::pow(p.eta_norm(), 4);
        EXPECT_LE(worst, 0.2 * h * h * xi4 * phimax * std::exp(std::abs(p.zeta) * h)) << "trial " << trial;
    }
}

TEST(Probe, GridProbeIsDiscreteHarmonic)
{
    const double h = 0.04;
    const auto p = make_grid_probe(7.0, -9.0, -1, h);
    EXPECT_NEAR(std::cosh(p.zeta * h), 3.0 - std::cos(7.0 * h) - std::cos(9.0 * h), 1e-14);
    EXPECT_NEAR(discrete_zeta(7.0, -9.0, h), std::abs(p.zeta), 1e-14);
    const Vec3 x{0.12, -0.2, 0.36};
    Complex lap = -6.0 * p.phi(x);
    for (int a = 0; a < 3; ++a) {
        Vec3 xp = x;
        Vec3 xm = x;
        xp[a] += h;
        xm[a] -= h;
        lap += p.phi(xp) + p.phi(xm);
    }
    EXPECT_LE(std::abs(lap), 1e-12 * std::abs(p.phi(x)));
    EXPECT_NEAR(discrete_zeta(3.0, 4.0, 1e-4), 5.0, 1e-6);
}

TEST(GreenIntegral, StaggeredIdentityIsExact)
{
    auto c = cube_config(0.05, 0.8, 0.2, 0.1, 0.16, 0.2);
    c.q0 = {{0.3, -0.2, -0.2}, {0.6, 0.2, 0.2}};
    c.q1 = c.q0.inflated(0.1);
    c.obstacle = SphereObstacle{{-0.25, 0.0, 0.0}, 0.2};
    const auto d = build_domain(c);
    const auto& g = d.grid;
    auto w = sample(g, [](const Vec3& p) { return std::exp(-dot(p - Vec3{0.1, 0.05, 0.0}, p - Vec3{0.1, 0.05, 0.0}) / 0.3); });
    for (std::size_t n = 0; n < g.size(); ++n)
        if (d.in_obstacle(n)) w[n] = 0.0;
    auto mesh = staggered_mesh(SurfaceTag::Sigma, d);
    const auto km = staggered_mesh(SurfaceTag::Obstacle, d);
    mesh.append(km);
    const auto traces = sample_traces(w, mesh);
    for (double e1 : {0.0, 3.0, -8.0})
        for (double e2 : {0.0, 5.0}) {
            const auto probe = make_grid_probe(e1, e2, -1, g.h);
            Complex vol{0.0, 0.0};
            for (std::size_t n = 0; n < g.size(); ++n) {
                if (!d.in_q(n)) continue;
                double lap = -6.0 * w[n];
                for (int a = 0; a < 3; ++a) lap += w[n + g.stride(a)] + w[n - g.stride(a)];
                const auto cc = g.unravel(n);
                vol += -lap / (g.h * g.h) * probe.phi(g.position(cc[0], cc[1], cc[2])) * std::pow(g.h, 3);
            }
            const Complex b = green_integral(traces, probe);
            EXPECT_LE(std::abs(b - vol), 1e-10 * std::abs(vol)) << e1 << "," << e2;
        }
}

TEST(GreenIntegral, ManufacturedGaussianMatchesVolumeOracle)
{
    const auto d = build_domain(unit_box(0.04));
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
    // Volume oracle: -Lap w factorizes into one-dimensional Gauss-Legendre integrals.
    const auto rule = gauss_legendre(48, -0.5, 0.5);
    double worst = 0.0;
    for (int e1 = -10; e1 <= 10; ++e1)
        for (int e2 = -10; e2 <= 10; ++e2) {
            if (std::hypot(e1, e2) > 10.0) continue;
            for (int s : {-1, 1}) {
                const auto probe = make_probe(e1, e2, s);
                auto factor = [&](int axis, bool second) {
                    Complex acc{0.0, 0.0};
                    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
                        const double x = rule.nodes[i];
                        const double q = x - x0[axis];
                        const double gq = std::exp(-q * q / a);
                        const double val = second ? (4.0 * q * q / (a * a) - 2.0 / a) * gq : gq;
                        const Complex ph = axis == 0   ? std::exp(Complex(0.0, -e1 * x))
                                           : axis == 1 ? std::exp(Complex(0.0, -e2 * x))
                                                       : Complex(std::exp(probe.zeta * x), 0.0);
                        acc += rule.weights[i] * val * ph;
                    }
                    return acc;
                };
                Complex vol{0.0, 0.0};
                for (int ax = 0; ax < 3; ++ax) {
                    Complex t{1.0, 0.0};
                    for (int b = 0; b < 3; ++b) t *= factor(b, b == ax);
                    vol -= t;
                }
                worst = std::max(worst, std::abs(green_integral(tr, probe) - vol) / std::abs(vol));
            }
        }
    EXPECT_LE(worst, 0.01);
}

TEST(GreenIntegral, HarmonicDatumAnnihilates)
{
    const auto d = build_domain(unit_box(0.04));
    const auto mesh = boundary_mesh(SurfaceTag::Sigma, d);
    MomentTraces tr;
    tr.mesh = mesh;
    double scale = 0.0;
    for (std::size_t i = 0; i < mesh.size(); ++i) {
        const auto& p = mesh.points[i];
        const auto& n = mesh.normals[i];
        tr.value.push_back(p[0] * p[1]);
        tr.dnu.push_back(p[1] * n[0] + p[0] * n[1]);
        scale += mesh.weights[i] * (std::abs(tr.value.back()) + std::abs(tr.dnu.back()));
    }
    for (double e1 : {0.0, 2.0, -5.0})
        for (double e2 : {0.0, 3.0}) {
            const auto probe = make_probe(e1, e2, -1);
            const double pmax = std::exp(std::abs(probe.zeta) * 0.5) * (1.0 + probe.eta_norm());
            EXPECT_LE(std::abs(green_integral(tr, probe)), 1e-3 * scale * pmax);
        }
}

TEST(GreenIntegral, ZeroFrequencyFluxBalance)
{
    // With phi = 1, B = -sum dnu(w) = int_Q (-Lap w); for w = |x|^2, -Lap w = -6.
    const auto d = build_domain(unit_box(0.04));
    const auto mesh = boundary_mesh(SurfaceTag::Sigma, d);
    MomentTraces tr;
    tr.mesh = mesh;
    for (std::size_t i = 0; i < mesh.size(); ++i) {
        tr.value.push_back(dot(mesh.points[i], mesh.points[i]));
        tr.dnu.push_back(2.0 * dot(mesh.points[i], mesh.normals[i]));
    }
    const Complex b = green_integral(tr, make_probe(0.0, 0.0));
    EXPECT_NEAR(b.real(), -6.0, 0.06);
    EXPECT_NEAR(b.imag(), 0.0, 1e-12);
}

TEST(GreenIntegral, PatchOnlyTracesNeedExtension)
{
    const auto d = build_domain(unit_box(0.04));
    MomentTraces tr;
    tr.mesh = boundary_mesh(SurfaceTag::Patch, d);
    tr.value.assign(tr.mesh.size(), 0.0);
    tr.dnu.assign(tr.mesh.size(), 0.0);
    EXPECT_EQ(kind_of([&] { green_integral(tr, make_probe(1.0, 0.0)); }), ErrorKind::MissingTrace);
}

TEST(AxialWeight, IndicatorClosedForm)
{
    AxialProfile w{AxialProfile::Kind::Indicator, 0.0, 1.0};
    EXPECT_NEAR(axial_weight(w, 0.0), 1.0, 1e-15);
    EXPECT_NEAR(axial_weight(w, 1.0), std::numbers::e - 1.0, 1e-12);
    EXPECT_NEAR(axial_weight(w, 1.0), 1.718281828, 1e-9);
}

TEST(AxialWeight, BumpQuadratureSelfConvergence)
{
    AxialProfile w{AxialProfile::Kind::Bump, -0.25, 0.25};
    const double m64 = axial_weight(w, 2.0, 64);
    const double m128 = axial_weight(w, 2.0, 128);
    EXPECT_NEAR(m64, m128, 1e-12 * m128);
    EXPECT_GT(m64, 0.0);
    EXPECT_EQ(w(0.3), 0.0);
    EXPECT_GE(w(0.1), 0.0);
}

TEST(RecoverFourier, ZeroDataGivesZero)
{
    const auto d = build_domain(unit_box(0.04));
    MomentTraces tr;
    tr.mesh = staggered_mesh(SurfaceTag::Sigma, d);
    tr.value.assign(tr.mesh.size(), 0.0);
    tr.dnu.assign(tr.mesh.size(), 0.0);
    FourierOptions o;
    o.rho_max = 12.0;
    const auto r = recover_fourier(tr, AxialProfile{AxialProfile::Kind::Bump, -0.2, 0.2}, o);
    for (const auto& v : r.values) EXPECT_EQ(std::abs(v), 0.0);
    EXPECT_GE(r.max_eta(), 12.0);
    EXPECT_LE(r.d_eta, kPi / (2.0 * o.half_width) + 1e-15);
}

TEST(RecoverFourier, RealDatumIsConjugateSymmetric)
{
    const auto d = build_domain(unit_box(0.04));
    auto w = sample(d.grid, [](const Vec3& p) { return std::exp(-dot(p - Vec3{0.07, -0.02, 0.0}, p - Vec3{0.07, -0.02, 0.0}) / 0.05); });
    const auto tr = sample_traces(w, staggered_mesh(SurfaceTag::Sigma, d));
    FourierOptions o;
    o.rho_max = 12.0;
    const auto r = recover_fourier(tr, AxialProfile{AxialProfile::Kind::Bump, -0.2, 0.2}, o);
    double scale = 0.0;
    for (const auto& v : r.values) scale = std::max(scale, std::abs(v));
    for (int j = -r.n; j <= r.n; ++j)
        for (int i = -r.n; i <= r.n; ++i)
            EXPECT_LE(std::abs(r.values[r.index(i, j)] - std::conj(r.values[r.index(-i, -j)])), 1e-8 * scale);
}

TEST(TruncatedInversion, ZeroTransform)
{
    auto r = analytic_recovery(0.6, 20.0, 0.15);
    for (auto& v : r.values) v = 0.0;
    const auto res = truncated_inversion(r, 20.0, plane(0.6, 0.04));
    for (double v : res.g.values) EXPECT_EQ(v, 0.0);
}

TEST(TruncatedInversion, AnalyticGaussianAtRho20)
{
    const double s = 0.15;
    const auto r = analytic_recovery(0.6, 20.0, s);
    auto truth = plane(0.6, 0.04);
    for (int j = 0; j < truth.ny; ++j)
        for (int i = 0; i < truth.nx; ++i)
            truth.at(i, j) = std::exp(-(truth.x(i) * truth.x(i) + truth.y(j) * truth.y(j)) / (2.0 * s * s));
    const auto res = truncated_inversion(r, 20.0, truth, &truth);
    EXPECT_LE(res.rel_error, 0.02);
    EXPECT_LE(res.max_imag, 1e-8);
}

TEST(TruncatedInversion, ErrorDecreasesWithRho)
{
    const double s = 0.15;
    const auto r = analytic_recovery(0.6, 24.0, s);
    auto truth = plane(0.6, 0.04);
    for (int j = 0; j < truth.ny; ++j)
        for (int i = 0; i < truth.nx; ++i)
            truth.at(i, j) = std::exp(-(truth.x(i) * truth.x(i) + truth.y(j) * truth.y(j)) / (2.0 * s * s));
    double prev = 1e9;
    for (double rho : {4.0, 8.0, 12.0, 16.0}) {
        const double e = truncated_inversion(r, rho, truth, &truth).rel_error;
        EXPECT_LT(e, prev) << "rho " << rho;
        prev = e;
    }
}

TEST(TruncatedInversion, TruncatedPlancherelBound)
{
    const auto r = analytic_recovery(0.6, 20.0, 0.15);
    const auto win = plane(0.6, 0.04);
    for (double rho : {6.0, 12.0, 20.0}) {
        const auto res = truncated_inversion(r, rho, win);
        double g2 = 0.0;
        for (double v : res.g.values) g2 += v * v * win.h * win.h;
        double f2 = 0.0;
        for (std::size_t i = 0; i < r.values.size(); ++i)
            if (std::hypot(r.eta1[i], r.eta2[i]) <= rho) f2 += std::norm(r.values[i]) * r.d_eta * r.d_eta;
        EXPECT_LE(std::sqrt(g2), std::sqrt(f2) / (2.0 * kPi) * 1.05) << "rho " << rho;
    }
}

TEST(TruncatedInversion, RhoOutOfRange)
{
    const auto r = analytic_recovery(0.6, 12.0, 0.15);
    EXPECT_EQ(kind_of([&] { truncated_inversion(r, r.max_eta() + 1.0, plane(0.6, 0.04)); }), ErrorKind::RhoOutOfRange);
}

TEST(SpeedContrast, EqualSpeedsGiveZeroContrast)
{
    const auto shape = plane(0.3, 0.05);
    const auto res = recover_speed_contrast({channel(shape, 0.0, 1.0, true)}, [](double, double) { return 1.0; }, 0.5);
    for (double v : res.c_diff.values) EXPECT_EQ(v, 0.0);
    EXPECT_EQ(res.norm_c, 0.0);
}

TEST(SpeedContrast, PointwiseAlgebra)
{
    // q = g (c^-2 - 1) with g = 2 and c = 1.1.
    const double c = 1.1;
    const double q = 2.0 * (1.0 / (c * c) - 1.0);
    const auto shape = plane(0.3, 0.05);
    const std::function<double(double, double)> truth = [c](double, double) { return c; };
    const auto res = recover_speed_contrast({channel(shape, q, 2.0, true)}, [](double, double) { return 1.0; }, 0.5, &truth);
    for (double v : res.c_diff.values) EXPECT_NEAR(v, 0.1, 1e-12);
    EXPECT_NEAR(res.rel_error_c, 0.0, 1e-10);
    EXPECT_NEAR(res.rel_error_inv_sq, 0.0, 1e-10);
}

TEST(SpeedContrast, ThresholdViolation)
{
    const auto shape = plane(0.3, 0.05);
    EXPECT_EQ(kind_of([&] {
                  recover_speed_contrast({channel(shape, 0.0, 0.1, true)}, [](double, double) { return 1.0; }, 0.5);
              }),
              ErrorKind::ThresholdViolation);
}

TEST(SpeedContrast, EmptyMask)
{
    const auto shape = plane(0.3, 0.05);
    EXPECT_EQ(kind_of([&] {
                  recover_speed_contrast({channel(shape, 0.0, 1.0, false)}, [](double, double) { return 1.0; }, 0.5);
              }),
              ErrorKind::EmptyMask);
}

TEST(CauchyExtend, ZeroDataGivesZeroExtension)
{
    auto c = cube_config(0.05, 1.0, 0.15, 0.1, 0.16, 0.2);
    c.obstacle = SphereObstacle{{0.0, 0.0, 0.0}, 0.2};
    c.q0 = {{0.35, -0.15, -0.15}, {0.65, 0.15, 0.15}};
    c.q1 = c.q0.inflated(0.1);
    c.patch = {PatchRect{0, 1, {0, 0}, {0, 0}, true}};
    const auto d = build_domain(c);
    MomentTraces patch;
    patch.mesh = boundary_mesh(SurfaceTag::Patch, d);
    patch.value.assign(patch.mesh.size(), 0.0);
    patch.dnu.assign(patch.mesh.size(), 0.0);
    CauchyOptions o;
    o.lambda = 1e-8;
    o.sources_inner = 40;
    o.sources_outer = 40;
    const auto ext = cauchy_extend(patch, obstacle_mesh(d.obstacle, 0.05), d, o);
    for (double v : ext.completed.value) EXPECT_EQ(v, 0.0);
    for (double v : ext.completed.dnu) EXPECT_EQ(v, 0.0);
}

TEST(CauchyExtend, InsufficientPatch)
{
    auto c = cube_config(0.05, 1.0, 0.15, 0.1, 0.16, 0.2);
    c.patch = {PatchRect{0, 1, {0.0, 0.0}, {0.2, 0.2}, false}};
    const auto d = build_domain(c);
    MomentTraces patch;
    patch.mesh = boundary_mesh(SurfaceTag::Patch, d);
    ASSERT_LT(patch.mesh.size(), 50u);
    patch.value.assign(patch.mesh.size(), 1.0);
    patch.dnu.assign(patch.mesh.size(), 0.0);
    EXPECT_EQ(kind_of([&] { cauchy_extend(patch, boundary_mesh(SurfaceTag::Sigma, d), d); }),
              ErrorKind::InsufficientPatch);
}

TEST(Quadrature, GaussLegendreExactForPolynomials)
{
    const auto r = gauss_legendre(8, -1.0, 2.0);
    double s = 0.0;
    for (std::size_t i = 0; i < r.nodes.size(); ++i) s += r.weights[i] * std::pow(r.nodes[i], 15);
    // int_{-1}^{2} x^15 dx = (2^16 - 1) / 16
    EXPECT_NEAR(s, (65536.0 - 1.0) / 16.0, 1e-9);
}
