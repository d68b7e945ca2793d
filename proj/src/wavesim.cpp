#include "exwave/wavesim.hpp"

#include "exwave/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <thread>

namespace exwave {

namespace {

const double kSqrt3 = std::sqrt(3.0);

bool on_grid_boundary(const GridSpec& g, int i, int j, int k)
{
    return i == 0 || j == 0 || k == 0 || i == g.dims[0] - 1 || j == g.dims[1] - 1 || k == g.dims[2] - 1;
}

// Runs fn(k_begin, k_end, slab) over interior z-planes split into `workers` slabs.
template <typename Fn>
void for_each_slab(int nz, int workers, Fn&& fn)
{
    const int planes = nz - 2;
    workers = std::clamp(workers, 1, std::max(1, planes));
    if (workers == 1) {
        fn(1, nz - 1, 0);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        const int k0 = 1 + planes * w / workers;
        const int k1 = 1 + planes * (w + 1) / workers;
        pool.emplace_back([&fn, k0, k1, w] { fn(k0, k1, w); });
    }
    for (auto& t : pool) t.join();
}

// Squared H^s norm pieces at an interior node (centered differences).
double grad_sq(const ScalarField& u, std::size_t n, const GridSpec& g)
{
    double s = 0.0;
    for (int a = 0; a < 3; ++a) {
        const auto st = g.stride(a);
        const double d = (u[n + st] - u[n - st]) / (2.0 * g.h);
        s += d * d;
    }
    return s;
}

double hessian_sq(const ScalarField& u, std::size_t n, const GridSpec& g)
{
    double s = 0.0;
    const double h2 = g.h * g.h;
    for (int a = 0; a < 3; ++a) {
        const auto sa = g.stride(a);
        const double daa = (u[n + sa] - 2.0 * u[n] + u[n - sa]) / h2;
        s += daa * daa;
        for (int b = a + 1; b < 3; ++b) {
            const auto sb = g.stride(b);
            const double dab = (u[n + sa + sb] - u[n + sa - sb] - u[n - sa + sb] + u[n - sa - sb]) / (4.0 * h2);
            s += 2.0 * dab * dab;
        }
    }
    return s;
}

bool interior(const GridSpec& g, std::size_t n)
{
    const auto c = g.unravel(n);
    return !on_grid_boundary(g, c[0], c[1], c[2]);
}

}  // namespace

// ---------------------------------------------------------------------------
// speed and data

SpeedField SpeedField::uniform(const GridSpec& grid)
{
    SpeedField s;
    s.values = ScalarField(grid, 1.0);
    return s;
}

SpeedField SpeedField::sample(const GridSpec& grid, const std::function<double(const Vec3&)>& c, double c0,
                              double c1, double rho0)
{
    if (!(c0 > 0.0) || c0 > 1.0 || c1 < 1.0)
        throw Error(ErrorKind::ConfigError, "speed bounds must satisfy 0 < c0 <= 1 <= c1");
    SpeedField s;
    s.values = ScalarField(grid);
    s.c0 = c0;
    s.c1 = c1;
    s.rho0 = rho0;
    for (int k = 0; k < grid.dims[2]; ++k)
        for (int j = 0; j < grid.dims[1]; ++j)
            for (int i = 0; i < grid.dims[0]; ++i) {
                const auto p = grid.position(i, j, k);
                const double v = c(p);
                if (!(v >= c0 * (1 - 1e-12) && v <= c1 * (1 + 1e-12)))
                    throw Error(ErrorKind::ConfigError, "sound speed leaves [c0, c1]");
                if (norm(p) > rho0 && std::abs(v - 1.0) > 1e-12)
                    throw Error(ErrorKind::ConfigError, "sound speed differs from 1 outside B_rho0");
                s.values.at(i, j, k) = v;
            }
    return s;
}

double SpeedField::max_speed() const
{
    double m = 0.0;
    for (double v : values.values()) m = std::max(m, v);
    return m;
}

double AxialProfile::operator()(double x3) const
{
    if (x3 < a || x3 > b) return 0.0;
    if (kind == Kind::Indicator) return 1.0;
    const double s = (2.0 * x3 - a - b) / (b - a);
    const double q = 1.0 - s * s;
    return q * q * q * q;
}

ScalarField SeparatedData::assemble(const DomainSpec& domain) const
{
    const auto& g = domain.grid;
    ScalarField out(g);
    for (int k = 0; k < g.dims[2]; ++k)
        for (int j = 0; j < g.dims[1]; ++j)
            for (int i = 0; i < g.dims[0]; ++i) {
                const auto n = g.index(i, j, k);
                if (!domain.in_q0(n)) continue;
                const auto p = g.position(i, j, k);
                out[n] = transverse(p[0], p[1]) * axial(p[2]);
            }
    return out;
}

PlaneField SeparatedData::transverse_samples(const DomainSpec& domain) const
{
    PlaneField plane;
    plane.h = domain.grid.h;
    plane.x0 = domain.q0.lo[0];
    plane.y0 = domain.q0.lo[1];
    plane.nx = static_cast<int>(std::lround(domain.q0.width(0) / plane.h)) + 1;
    plane.ny = static_cast<int>(std::lround(domain.q0.width(1) / plane.h)) + 1;
    plane.values.resize(static_cast<std::size_t>(plane.nx) * plane.ny);
    for (int j = 0; j < plane.ny; ++j)
        for (int i = 0; i < plane.nx; ++i) plane.at(i, j) = transverse(plane.x(i), plane.y(j));
    return plane;
}

InitialData InitialData::zero(const GridSpec& grid)
{
    return {ScalarField(grid), ScalarField(grid), 0.0};
}

double data_norm(const InitialData& data)
{
    const auto& g = data.f.grid();
    const double h3 = g.h * g.h * g.h;
    double f2 = 0.0;
    double g2 = 0.0;
    for (int k = 1; k + 1 < g.dims[2]; ++k)
        for (int j = 1; j + 1 < g.dims[1]; ++j)
            for (int i = 1; i + 1 < g.dims[0]; ++i) {
                const auto n = g.index(i, j, k);
                f2 += h3 * (data.f[n] * data.f[n] + grad_sq(data.f, n, g) + hessian_sq(data.f, n, g));
                g2 += h3 * (data.g[n] * data.g[n] + grad_sq(data.g, n, g));
            }
    return std::sqrt(f2) + std::sqrt(g2);
}

// ---------------------------------------------------------------------------
// stepper

Simulator::Simulator(const DomainSpec& domain, const SpeedField& speed, const SimOptions& options)
    : domain_(&domain), speed_(&speed), options_(options)
{
    const auto& g = domain.grid;
    if (!(speed.values.grid() == g)) throw Error(ErrorKind::ConfigMismatch, "speed field grid differs from domain grid");
    const double cmax = speed.max_speed();
    dt_ = options.dt > 0.0 ? options.dt : options.cfl * g.h / (kSqrt3 * cmax);
    if (options.sponge && options.sponge_max * dt_ > 0.5 + 1e-12)
        throw Error(ErrorKind::CflViolation, "sponge_max * dt exceeds 0.5");

    kind_.assign(g.size(), 1);
    lambda_.assign(g.size(), 0.0);
    const bool damp = options.sponge && domain.sponge_width > 0.0;
    if (damp) damping_.assign(g.size(), 0.0);
    for (int k = 0; k < g.dims[2]; ++k)
        for (int j = 0; j < g.dims[1]; ++j)
            for (int i = 0; i < g.dims[0]; ++i) {
                const auto n = g.index(i, j, k);
                if (on_grid_boundary(g, i, j, k) || domain.in_obstacle(n)) {
                    kind_[n] = 0;
                    continue;
                }
                const double c = speed.values[n];
                lambda_[n] = c * c * dt_ * dt_ / (g.h * g.h);
                if (damp) {
                    const double depth = domain.sponge_depth(g.position(i, j, k));
                    if (depth > 0.0) {
                        kind_[n] = 2;
                        damping_[n] = options.sponge_max * std::pow(depth, options.sponge_power);
                    }
                }
            }
}

WaveState Simulator::init_state(const InitialData& data) const
{
    const auto& g = domain_->grid;
    const double cmax = speed_->max_speed();
    if (options_.enforce_cfl && cmax * dt_ > g.h / kSqrt3 * (1.0 + 1e-12)) {
        std::ostringstream os;
        os << "CFL violated: c1*dt = " << cmax * dt_ << " > h/sqrt(3) = " << g.h / kSqrt3;
        throw Error(ErrorKind::CflViolation, os.str());
    }
    if (!(data.f.grid() == g) || !(data.g.grid() == g))
        throw Error(ErrorKind::ConfigMismatch, "initial data grid differs from domain grid");
    for (std::size_t n = 0; n < g.size(); ++n)
        if ((data.f[n] != 0.0 || data.g[n] != 0.0) && !domain_->in_q0(n))
            throw Error(ErrorKind::SupportViolation, "initial data is not supported in Q0");

    WaveState s;
    s.dt = dt_;
    s.step = 1;
    s.t = dt_;
    s.u_prev = ScalarField(g);
    s.u_curr = ScalarField(g);
    for (std::size_t n = 0; n < g.size(); ++n) {
        if (kind_[n] == 0) continue;
        s.u_prev[n] = data.f[n];
        s.u_curr[n] = data.f[n] + dt_ * data.g[n] + 0.5 * lambda_[n] * (laplacian_at(data.f, n) * g.h * g.h);
    }
    blowup_reference_ = std::max(s.u_prev.max_abs(), s.u_curr.max_abs());
    return s;
}

void Simulator::step(WaveState& state) const
{
    const auto& g = domain_->grid;
    const int nx = g.dims[0];
    const int ny = g.dims[1];
    const auto sy = static_cast<std::size_t>(nx);
    const auto sz = static_cast<std::size_t>(nx) * ny;
    const double half_dt = 0.5 * dt_;
    double* next = state.u_prev.values().data();
    const double* u = state.u_curr.values().data();
    std::vector<double> slab_max(std::max(1, options_.workers), 0.0);

    for_each_slab(g.dims[2], options_.workers, [&](int k0, int k1, int slab) {
        double local_max = 0.0;
        for (int k = k0; k < k1; ++k)
            for (int j = 1; j + 1 < ny; ++j) {
                const std::size_t row = (static_cast<std::size_t>(k) * ny + j) * nx;
                for (int i = 1; i + 1 < nx; ++i) {
                    const std::size_t n = row + i;
                    const auto kind = kind_[n];
                    if (kind == 0) continue;
                    const double lap = u[n - 1] + u[n + 1] + u[n - sy] + u[n + sy] + u[n - sz] + u[n + sz] - 6.0 * u[n];
                    double v;
                    if (kind == 1) {
                        v = 2.0 * u[n] - next[n] + lambda_[n] * lap;
                    } else {
                        const double a = damping_[n] * half_dt;
                        v = (2.0 * u[n] - (1.0 - a) * next[n] + lambda_[n] * lap) / (1.0 + a);
                    }
                    next[n] = v;
                    local_max = std::max(local_max, std::abs(v));
                }
            }
        slab_max[slab] = local_max;
    });

    state.u_prev.swap(state.u_curr);
    state.step += 1;
    state.t = state.step * dt_;

    const double m = *std::max_element(slab_max.begin(), slab_max.end());
    if (!std::isfinite(m) || (blowup_reference_ > 0.0 && m > kBlowupFactor * blowup_reference_)) {
        std::ostringstream os;
        os << "numerical blowup at step " << state.step << " (max |u| = " << m << ")";
        throw Error(ErrorKind::NumericalBlowup, os.str());
    }
}

RunSummary Simulator::run(const InitialData& data, double t_final, std::span<Recorder* const> recorders) const
{
    RunSummary summary;
    summary.dt = dt_;
    WaveState state = init_state(data);
    Snapshot snap{0, 0.0, dt_, &state.u_prev, nullptr};
    for (auto* r : recorders) r->observe(snap);
    const int total = t_final > 0.0 ? static_cast<int>(std::lround(t_final / dt_)) : 0;
    if (total >= 1) {
        snap = {1, dt_, dt_, &state.u_curr, &state.u_prev};
        for (auto* r : recorders) r->observe(snap);
        for (int m = 2; m <= total; ++m) {
            step(state);
            snap = {state.step, state.t, dt_, &state.u_curr, &state.u_prev};
            for (auto* r : recorders) r->observe(snap);
        }
    }
    for (auto* r : recorders) r->finish(snap);
    summary.steps = total;
    summary.t_final = total * dt_;
    return summary;
}

RunSummary run_difference(const Simulator& sim_a, const InitialData& data_a, const Simulator& sim_b,
                          const InitialData& data_b, double t_final, std::span<Recorder* const> recorders)
{
    if (!(sim_a.domain().grid == sim_b.domain().grid) || sim_a.dt() != sim_b.dt())
        throw Error(ErrorKind::ConfigMismatch, "difference runs need identical grid and dt");
    const double dt = sim_a.dt();
    WaveState a = sim_a.init_state(data_a);
    WaveState b = sim_b.init_state(data_b);
    ScalarField d_prev(a.u_prev.grid());
    ScalarField d_curr(a.u_prev.grid());
    auto diff = [](ScalarField& out, const ScalarField& x, const ScalarField& y) {
        for (std::size_t n = 0; n < out.size(); ++n) out[n] = x[n] - y[n];
    };
    diff(d_curr, a.u_prev, b.u_prev);
    Snapshot snap{0, 0.0, dt, &d_curr, nullptr};
    for (auto* r : recorders) r->observe(snap);
    const int total = t_final > 0.0 ? static_cast<int>(std::lround(t_final / dt)) : 0;
    if (total >= 1) {
        d_prev.swap(d_curr);
        diff(d_curr, a.u_curr, b.u_curr);
        snap = {1, dt, dt, &d_curr, &d_prev};
        for (auto* r : recorders) r->observe(snap);
        for (int m = 2; m <= total; ++m) {
            sim_a.step(a);
            sim_b.step(b);
            d_prev.swap(d_curr);
            diff(d_curr, a.u_curr, b.u_curr);
            snap = {m, m * dt, dt, &d_curr, &d_prev};
            for (auto* r : recorders) r->observe(snap);
        }
    }
    for (auto* r : recorders) r->finish(snap);
    return {total, total * dt, dt};
}

double laplacian_at(const ScalarField& u, std::size_t n)
{
    const auto& g = u.grid();
    double s = -6.0 * u[n];
    for (int a = 0; a < 3; ++a) {
        const auto st = g.stride(a);
        s += u[n + st] + u[n - st];
    }
    return s / (g.h * g.h);
}

// ---------------------------------------------------------------------------
// energies

double conserved_energy(const ScalarField& u_prev, const ScalarField& u, double dt, const SpeedField& speed)
{
    const auto& g = u.grid();
    const double h3 = g.h * g.h * g.h;
    double e = 0.0;
    for (int k = 0; k < g.dims[2]; ++k)
        for (int j = 0; j < g.dims[1]; ++j)
            for (int i = 0; i < g.dims[0]; ++i) {
                const auto n = g.index(i, j, k);
                const double c = speed.values[n];
                const double vt = (u[n] - u_prev[n]) / dt;
                double acc = vt * vt / (c * c);
                const int idx[3] = {i, j, k};
                for (int a = 0; a < 3; ++a) {
                    if (idx[a] + 1 >= g.dims[a]) continue;
                    const auto st = static_cast<std::size_t>(g.stride(a));
                    acc += (u[n + st] - u[n]) * (u_prev[n + st] - u_prev[n]) / (g.h * g.h);
                }
                e += h3 * acc;
            }
    return e;
}

double local_energy(const ScalarField& u_prev, const ScalarField& u, double dt, const DomainSpec& domain)
{
    const auto& g = domain.grid;
    const auto& lo = domain.sigma_lo;
    const auto& hi = domain.sigma_hi;
    const double h = g.h;
    const double h3 = h * h * h;
    auto tw = [&](int axis, int i) { return (i == lo[axis] || i == hi[axis]) ? 0.5 : 1.0; };
    double e = 0.0;
    for (int k = lo[2]; k <= hi[2]; ++k)
        for (int j = lo[1]; j <= hi[1]; ++j)
            for (int i = lo[0]; i <= hi[0]; ++i) {
                const auto n = g.index(i, j, k);
                const int idx[3] = {i, j, k};
                const double w[3] = {tw(0, i), tw(1, j), tw(2, k)};
                if (domain.in_q(n)) {
                    const double vt = (u[n] - u_prev[n]) / dt;
                    e += w[0] * w[1] * w[2] * h3 * vt * vt;
                }
                for (int a = 0; a < 3; ++a) {
                    if (idx[a] + 1 > hi[a]) continue;
                    const auto m = n + static_cast<std::size_t>(g.stride(a));
                    if (domain.in_obstacle(n) && domain.in_obstacle(m)) continue;
                    const double transverse = w[(a + 1) % 3] * w[(a + 2) % 3];
                    const double d1 = (u[m] - u[n]) / h;
                    const double d0 = (u_prev[m] - u_prev[n]) / h;
                    e += transverse * h3 * 0.5 * (d1 * d1 + d0 * d0);
                }
            }
    return e;
}

double norm_triple(const ScalarField& u_prev, const ScalarField& u, const ScalarField& u_next, double dt,
                   const DomainSpec& domain)
{
    const auto& g = domain.grid;
    const double h3 = g.h * g.h * g.h;
    ScalarField ut(g);
    for (std::size_t n = 0; n < g.size(); ++n) ut[n] = (u_next[n] - u_prev[n]) / (2.0 * dt);
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
    for (std::size_t n = 0; n < g.size(); ++n) {
        if (!domain.in_q(n) || !interior(g, n)) continue;
        a += h3 * (u[n] * u[n] + grad_sq(u, n, g) + hessian_sq(u, n, g));
        b += h3 * (ut[n] * ut[n] + grad_sq(ut, n, g));
        const double utt = (u_next[n] - 2.0 * u[n] + u_prev[n]) / (dt * dt);
        c += h3 * utt * utt;
    }
    return std::sqrt(a) + std::sqrt(b) + std::sqrt(c);
}

void EnergyRecorder::observe(const Snapshot& snap)
{
    if (!snap.u_prev) return;
    series_.times.push_back(snap.t - 0.5 * snap.dt);
    series_.energy.push_back(local_energy(*snap.u_prev, *snap.u, snap.dt, *domain_));
    if (triple_stride_ <= 0) return;
    if (have_older_ && (snap.step - 1) % triple_stride_ == 0) {
        series_.triple_times.push_back(snap.t - snap.dt);
        series_.triple.push_back(norm_triple(older_, *snap.u_prev, *snap.u, snap.dt, *domain_));
    }
    older_ = *snap.u_prev;
    have_older_ = true;
}

DecayFit fit_decay(const EnergySeries& series, const FitWindow& window)
{
    if (series.energy.empty() || !(series.energy.front() > 0.0))
        throw Error(ErrorKind::NonPositiveEnergy, "reference energy E(0) is not positive");
    const double floor = 1e-14 * series.energy.front();
    std::vector<double> xs;
    std::vector<double> ys;
    for (std::size_t n = 0; n < series.times.size(); ++n) {
        const double t = series.times[n];
        if (t < window.t_begin || t > window.t_end) continue;
        if (!(series.energy[n] > floor)) continue;
        xs.push_back(t);
        ys.push_back(std::log(series.energy[n]));
    }
    if (xs.size() < 10) throw Error(ErrorKind::WindowTooShort, "fewer than 10 usable samples in the fit window");
    const double count = static_cast<double>(xs.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t n = 0; n < xs.size(); ++n) mx += xs[n], my += ys[n];
    mx /= count;
    my /= count;
    double sxx = 0.0;
    double sxy = 0.0;
    double syy = 0.0;
    for (std::size_t n = 0; n < xs.size(); ++n) {
        sxx += (xs[n] - mx) * (xs[n] - mx);
        sxy += (xs[n] - mx) * (ys[n] - my);
        syy += (ys[n] - my) * (ys[n] - my);
    }
    const double slope = sxx > 0.0 ? sxy / sxx : 0.0;
    const double intercept = my - slope * mx;
    double ss_res = 0.0;
    for (std::size_t n = 0; n < xs.size(); ++n) {
        const double r = ys[n] - (intercept + slope * xs[n]);
        ss_res += r * r;
    }
    DecayFit fit;
    fit.delta = -slope;
    fit.kappa = std::exp(intercept);
    fit.window = window;
    fit.samples = static_cast<int>(xs.size());
    fit.r_squared = syy > 0.0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
    return fit;
}

}  // namespace exwave
