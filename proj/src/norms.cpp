#include "exwave/error.hpp"
#include "exwave/harness.hpp"

#include <algorithm>
#include <cmath>

namespace exwave {

namespace {

int link_axis(const Vec3& normal)
{
    int axis = 0;
    for (int a = 1; a < 3; ++a)
        if (std::abs(normal[a]) > std::abs(normal[axis])) axis = a;
    return axis;
}

double centred(const ScalarField& u, std::size_t n, int axis)
{
    const auto s = u.grid().stride(axis);
    const auto np = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(n) + s);
    const auto nm = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(n) - s);
    return (u[np] - u[nm]) / (2.0 * u.grid().h);
}

double weighted_l2(std::span<const double> w, std::span<const double> v)
{
    double s = 0.0;
    for (std::size_t p = 0; p < v.size(); ++p) s += w[p] * v[p] * v[p];
    return std::sqrt(s);
}

double weighted_l1(std::span<const double> w, std::span<const double> v)
{
    double s = 0.0;
    for (std::size_t p = 0; p < v.size(); ++p) s += w[p] * std::abs(v[p]);
    return s;
}

}  // namespace

nlohmann::json DataNorms::to_json() const
{
    return {{"N", n},
            {"N0", n0},
            {"N_tilde", n_tilde},
            {"value_part", value_part},
            {"grad_part", grad_part},
            {"dnu_part", dnu_part},
            {"N0_flux", n0_flux},
            {"N0_value", n0_value}};
}

NormSample norm_sample(const TraceSeries& series, const TraceFrame& frame)
{
    NormSample s;
    s.t = frame.t;
    s.s_value_l2 = weighted_l2(series.s_weights, frame.s_value);
    double g2 = 0.0;
    for (std::size_t p = 0; p < frame.s_grad.size(); ++p) g2 += series.s_weights[p] * dot(frame.s_grad[p], frame.s_grad[p]);
    s.s_grad_l2 = std::sqrt(g2);
    s.s_dnu_l2 = weighted_l2(series.s_weights, frame.s_dnu);
    s.q_dnu_l1 = weighted_l1(series.q_weights, frame.q_dnu);
    s.sigma_value_l1 = weighted_l1(series.sigma_weights, frame.sigma_value);
    return s;
}

DataNorms integrate_norms(std::span<const NormSample> samples, double dt)
{
    DataNorms d;
    const std::size_t m = samples.size();
    for (std::size_t i = 0; i < m; ++i) {
        const auto& s = samples[i];
        const double w = (m > 1 && (i == 0 || i + 1 == m)) ? 0.5 * dt : dt;
        for (int j = 0; j < 2; ++j) {
            const double tw = w * (j == 0 ? 1.0 : s.t);
            d.value_part[j] += tw * s.s_value_l2;
            d.grad_part[j] += tw * s.s_grad_l2;
            d.dnu_part[j] += tw * s.s_dnu_l2;
        }
        d.n0_flux += w * s.q_dnu_l1;
        d.n0_value += w * s.sigma_value_l1;
    }
    d.n = d.value_part[0] + d.value_part[1] + d.grad_part[0] + d.grad_part[1];
    d.n_tilde = d.dnu_part[0] + d.dnu_part[1];
    d.n0 = d.n0_flux + d.n0_value;
    return d;
}

DataNorms data_norms(const TraceSeries& series)
{
    std::vector<NormSample> samples;
    samples.reserve(series.frames.size());
    for (const auto& f : series.frames) samples.push_back(norm_sample(series, f));
    return integrate_norms(samples, series.dt);
}

TraceSeries subtract(const TraceSeries& a, const TraceSeries& b)
{
    if (a.dt != b.dt || a.frames.size() != b.frames.size() || a.s_weights != b.s_weights ||
        a.q_weights != b.q_weights || a.sigma_weights != b.sigma_weights)
        throw Error(ErrorKind::ConfigMismatch, "trace series differ in sampling or surfaces");
    TraceSeries out = a;
    auto minus = [](std::vector<double>& x, const std::vector<double>& y) {
        for (std::size_t p = 0; p < x.size(); ++p) x[p] -= y[p];
    };
    for (std::size_t m = 0; m < out.frames.size(); ++m) {
        auto& f = out.frames[m];
        const auto& g = b.frames[m];
        if (f.t != g.t) throw Error(ErrorKind::ConfigMismatch, "trace series differ in sample times");
        minus(f.s_value, g.s_value);
        minus(f.s_dnu, g.s_dnu);
        minus(f.q_dnu, g.q_dnu);
        minus(f.sigma_value, g.sigma_value);
        for (std::size_t p = 0; p < f.s_grad.size(); ++p) f.s_grad[p] = f.s_grad[p] - g.s_grad[p];
    }
    return out;
}

TraceSampler::TraceSampler(const DomainSpec& domain)
    : patch_(staggered_mesh(SurfaceTag::Patch, domain)),
      q_boundary_(staggered_mesh(SurfaceTag::Obstacle, domain)),
      sigma_boundary_(staggered_mesh(SurfaceTag::Sigma, domain))
{
    q_boundary_.append(sigma_boundary_);
}

TraceSeries TraceSampler::empty_series(double dt) const
{
    TraceSeries s;
    s.dt = dt;
    s.s_weights = patch_.weights;
    s.q_weights = q_boundary_.weights;
    s.sigma_weights = sigma_boundary_.weights;
    return s;
}

TraceFrame TraceSampler::sample(const ScalarField& u, double t) const
{
    const double h = u.grid().h;
    TraceFrame f;
    f.t = t;
    const std::size_t ns = patch_.size();
    f.s_value.resize(ns);
    f.s_grad.resize(ns);
    f.s_dnu.resize(ns);
    for (std::size_t p = 0; p < ns; ++p) {
        const auto in = patch_.inner[p];
        const auto out = patch_.outer[p];
        const double dn = (u[out] - u[in]) / h;
        f.s_value[p] = 0.5 * (u[in] + u[out]);
        f.s_dnu[p] = dn;
        const int axis = link_axis(patch_.normals[p]);
        Vec3 g{};
        for (int a = 0; a < 3; ++a)
            g[a] = a == axis ? dn * patch_.normals[p][axis] : 0.5 * (centred(u, in, a) + centred(u, out, a));
        f.s_grad[p] = g;
    }
    f.q_dnu.resize(q_boundary_.size());
    for (std::size_t p = 0; p < q_boundary_.size(); ++p)
        f.q_dnu[p] = (u[q_boundary_.outer[p]] - u[q_boundary_.inner[p]]) / h;
    f.sigma_value.resize(sigma_boundary_.size());
    for (std::size_t p = 0; p < sigma_boundary_.size(); ++p)
        f.sigma_value[p] = 0.5 * (u[sigma_boundary_.inner[p]] + u[sigma_boundary_.outer[p]]);
    return f;
}

void NormRecorder::observe(const Snapshot& snap)
{
    if (samples_.empty()) scratch_ = sampler_.empty_series(snap.dt);
    dt_ = snap.dt;
    samples_.push_back(norm_sample(scratch_, sampler_.sample(*snap.u, snap.t)));
}

void TraceSeriesRecorder::observe(const Snapshot& snap)
{
    if (series_.frames.empty()) series_ = sampler_.empty_series(snap.dt);
    series_.frames.push_back(sampler_.sample(*snap.u, snap.t));
}

double clearing_time(const DomainSpec& domain, double c0)
{
    double d = 0.0;
    for (int a = 0; a < 8; ++a)
        for (int b = 0; b < 8; ++b) {
            Vec3 p{};
            Vec3 q{};
            for (int ax = 0; ax < 3; ++ax) {
                p[ax] = (a >> ax) & 1 ? domain.q0.hi[ax] : domain.q0.lo[ax];
                q[ax] = (b >> ax) & 1 ? domain.sigma.hi[ax] : domain.sigma.lo[ax];
            }
            d = std::max(d, norm(p - q));
        }
    return d / c0;
}

}  // namespace exwave
