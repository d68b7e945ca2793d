#include "exwave/moments.hpp"

#include "exwave/error.hpp"

#include <algorithm>
#include <cmath>

namespace exwave {

namespace {

double factorial(int k)
{
    double f = 1.0;
    for (int i = 2; i <= k; ++i) f *= i;
    return f;
}

// ((-1)^k / k!) t^k
double moment_kernel(int k, double t)
{
    const double sign = (k % 2 == 0) ? 1.0 : -1.0;
    return sign * std::pow(t, k) / factorial(k);
}

void check_orders(const std::vector<int>& orders)
{
    if (orders.empty()) throw Error(ErrorKind::ConfigError, "no moment orders requested");
    for (int k : orders)
        if (k < 0 || k > 3) throw Error(ErrorKind::ConfigError, "moment orders are limited to 0..3");
}

std::size_t offset(std::size_t n, std::ptrdiff_t d) { return static_cast<std::size_t>(static_cast<std::ptrdiff_t>(n) + d); }

}  // namespace

bool MomentData::has(int k) const { return std::find(orders.begin(), orders.end(), k) != orders.end(); }

const ScalarField& MomentData::field(int k) const
{
    const auto it = std::find(orders.begin(), orders.end(), k);
    if (it == orders.end()) throw Error(ErrorKind::ConfigError, "moment order " + std::to_string(k) + " not recorded");
    return volume[static_cast<std::size_t>(it - orders.begin())];
}

ScalarField& MomentData::field(int k) { return const_cast<ScalarField&>(std::as_const(*this).field(k)); }

double MomentData::tail_of(int k) const
{
    const auto it = std::find(orders.begin(), orders.end(), k);
    if (it == orders.end() || tail.empty()) return 0.0;
    return tail[static_cast<std::size_t>(it - orders.begin())];
}

MomentAccumulator::MomentAccumulator(const DomainSpec& domain, std::vector<int> orders) : domain_(&domain)
{
    check_orders(orders);
    data_.orders = std::move(orders);
    for (std::size_t i = 0; i < data_.orders.size(); ++i) data_.volume.emplace_back(domain.grid);
    for (int a = 0; a < 3; ++a) {
        lo_[a] = std::max(0, domain.sigma_lo[a] - 2);
        hi_[a] = std::min(domain.grid.dims[a] - 1, domain.sigma_hi[a] + 2);
    }
}

void MomentAccumulator::observe(const Snapshot& snap)
{
    const auto& g = domain_->grid;
    const double w = (snap.step == 0 ? 0.5 : 1.0) * snap.dt;
    const std::size_t no = data_.orders.size();
    std::array<double, 4> coef{};
    for (std::size_t o = 0; o < no; ++o) coef[o] = w * moment_kernel(data_.orders[o], snap.t);
    const auto& u = *snap.u;
    double sq = 0.0;
    for (int k = lo_[2]; k <= hi_[2]; ++k)
        for (int j = lo_[1]; j <= hi_[1]; ++j) {
            const auto row = g.index(0, j, k);
            for (int i = lo_[0]; i <= hi_[0]; ++i) {
                const double v = u[row + i];
                sq += v * v;
                for (std::size_t o = 0; o < no; ++o) data_.volume[o][row + i] += coef[o] * v;
            }
        }
    norm_times_.push_back(snap.t);
    norms_.push_back(std::sqrt(sq * g.h * g.h * g.h));
    data_.dt = snap.dt;
    data_.t_final = snap.t;
    data_.samples = snap.step + 1;
}

void MomentAccumulator::finish(const Snapshot& last)
{
    const auto& g = domain_->grid;
    const auto& u = *last.u;
    if (last.step > 0) {
        for (std::size_t o = 0; o < data_.orders.size(); ++o) {
            const double c = -0.5 * last.dt * moment_kernel(data_.orders[o], last.t);
            for (int k = lo_[2]; k <= hi_[2]; ++k)
                for (int j = lo_[1]; j <= hi_[1]; ++j) {
                    const auto row = g.index(0, j, k);
                    for (int i = lo_[0]; i <= hi_[0]; ++i) data_.volume[o][row + i] += c * u[row + i];
                }
        }
    }

    // Tail: envelope decay between the two halves of the final window.
    const double t_end = data_.t_final;
    const double window = std::min(5.0, 0.5 * t_end);
    double m1 = 0.0;
    double m2 = 0.0;
    for (std::size_t s = 0; s < norms_.size(); ++s) {
        const double t = norm_times_[s];
        if (t < t_end - window) continue;
        if (t < t_end - 0.5 * window) m1 = std::max(m1, norms_[s]);
        else m2 = std::max(m2, norms_[s]);
    }
    double delta = (m1 > 0.0 && m2 > 0.0 && window > 0.0) ? std::log(m1 / m2) / (0.5 * window) : 0.0;
    if (!(delta > 0.0)) delta = window > 0.0 ? 1.0 / window : 1.0;
    data_.tail.assign(data_.orders.size(), 0.0);
    for (std::size_t o = 0; o < data_.orders.size(); ++o) {
        const int k = data_.orders[o];
        double s = 0.0;
        for (int j = 0; j <= k; ++j) s += std::pow(t_end, k - j) / factorial(k - j) / std::pow(delta, j + 1);
        data_.tail[o] = m2 * s;
    }
}

double time_moment(int k, std::span<const double> series, double dt)
{
    if (series.empty()) return 0.0;
    double acc = 0.0;
    const std::size_t last = series.size() - 1;
    for (std::size_t m = 0; m <= last; ++m) {
        const double w = (m == 0 || m == last) ? 0.5 : 1.0;
        acc += w * std::pow(m * dt, k) * series[m];
    }
    const double sign = (k % 2 == 0) ? 1.0 : -1.0;
    return sign * dt * acc / factorial(k);
}

MomentTraces sample_traces(const ScalarField& field, const BoundaryMesh& mesh, int order)
{
    MomentTraces out;
    out.order = order;
    out.mesh = mesh;
    out.value.resize(mesh.size());
    out.dnu.resize(mesh.size());
    const double h = field.grid().h;
    for (std::size_t p = 0; p < mesh.size(); ++p) {
        if (mesh.rule == BoundaryMesh::Rule::Staggered) {
            const double in = field[mesh.inner[p]];
            const double outer = field[mesh.outer[p]];
            out.value[p] = mesh.tags[p] == SurfaceTag::Obstacle ? 0.0 : 0.5 * (in + outer);
            out.dnu[p] = (outer - in) / h;
            continue;
        }
        const Vec3& x = mesh.points[p];
        const Vec3& nu = mesh.normals[p];
        if (mesh.tags[p] == SurfaceTag::Obstacle) {
            const double f1 = field.interpolate(x - h * nu);
            const double f2 = field.interpolate(x - (2.0 * h) * nu);
            out.value[p] = 0.0;
            out.dnu[p] = (-4.0 * f1 + f2) / (2.0 * h);
        } else {
            out.value[p] = field.interpolate(x);
            out.dnu[p] = (field.interpolate(x + h * nu) - field.interpolate(x - h * nu)) / (2.0 * h);
        }
    }
    return out;
}

TraceMomentRecorder::TraceMomentRecorder(BoundaryMesh mesh, std::vector<int> orders,
                                         std::optional<std::uint64_t> noise_seed)
    : mesh_(std::move(mesh)), orders_(std::move(orders))
{
    check_orders(orders_);
    if (mesh_.rule != BoundaryMesh::Rule::Staggered)
        throw Error(ErrorKind::ConfigError, "trace recording needs a staggered mesh");
    const std::size_t n = mesh_.size();
    clean_.assign(orders_.size(), Channel{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)});
    if (noise_seed) {
        noisy_ = true;
        rng_.seed(*noise_seed);
        noise_ = clean_;
        draw_ = Channel{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
    }
}

std::size_t TraceMomentRecorder::slot(int k) const
{
    const auto it = std::find(orders_.begin(), orders_.end(), k);
    if (it == orders_.end()) throw Error(ErrorKind::ConfigError, "trace moment order " + std::to_string(k) + " not recorded");
    return static_cast<std::size_t>(it - orders_.begin());
}

void TraceMomentRecorder::accumulate(const Snapshot& snap, double weight)
{
    const auto& u = *snap.u;
    const double h = u.grid().h;
    const std::size_t n = mesh_.size();
    for (std::size_t o = 0; o < orders_.size(); ++o) {
        const double c = weight * snap.dt * moment_kernel(orders_[o], snap.t);
        auto& ch = clean_[o];
        for (std::size_t p = 0; p < n; ++p) {
            const double in = u[mesh_.inner[p]];
            const double outer = u[mesh_.outer[p]];
            if (mesh_.tags[p] != SurfaceTag::Obstacle) ch.value[p] += c * 0.5 * (in + outer);
            ch.dnu[p] += c * (outer - in) / h;
        }
        if (noisy_) {
            auto& nz = noise_[o];
            for (std::size_t p = 0; p < n; ++p) {
                nz.value[p] += c * draw_.value[p];
                nz.dnu[p] += c * draw_.dnu[p];
            }
        }
    }
}

void TraceMomentRecorder::observe(const Snapshot& snap)
{
    const auto& u = *snap.u;
    const double h = u.grid().h;
    for (std::size_t p = 0; p < mesh_.size(); ++p) {
        const double in = u[mesh_.inner[p]];
        const double outer = u[mesh_.outer[p]];
        if (mesh_.tags[p] != SurfaceTag::Obstacle) max_value_ = std::max(max_value_, std::abs(0.5 * (in + outer)));
        max_flux_ = std::max(max_flux_, std::abs((outer - in) / h));
    }
    if (noisy_) {
        std::normal_distribution<double> normal(0.0, 1.0);
        for (std::size_t p = 0; p < mesh_.size(); ++p) {
            // Dirichlet values on the obstacle are known exactly.
            draw_.value[p] = mesh_.tags[p] == SurfaceTag::Obstacle ? 0.0 : normal(rng_);
            draw_.dnu[p] = normal(rng_);
        }
    }
    accumulate(snap, snap.step == 0 ? 0.5 : 1.0);
}

void TraceMomentRecorder::finish(const Snapshot& last)
{
    if (last.step > 0) accumulate(last, -0.5);
}

MomentTraces TraceMomentRecorder::traces(int k, double noise_eps) const
{
    const auto o = slot(k);
    MomentTraces out;
    out.order = k;
    out.mesh = mesh_;
    out.value = clean_[o].value;
    out.dnu = clean_[o].dnu;
    if (noise_eps != 0.0) {
        if (!noisy_) throw Error(ErrorKind::ConfigError, "noise requested but no noise seed was recorded");
        const double av = noise_eps * max_value_;
        const double af = noise_eps * max_flux_;
        for (std::size_t p = 0; p < out.value.size(); ++p) {
            out.value[p] += av * noise_[o].value[p];
            out.dnu[p] += af * noise_[o].dnu[p];
        }
    }
    return out;
}

double PoissonResidualReport::of(int k) const
{
    const auto it = std::find(orders.begin(), orders.end(), k);
    if (it == orders.end()) throw Error(ErrorKind::ConfigError, "residual order not computed");
    return residual[static_cast<std::size_t>(it - orders.begin())];
}

PoissonResidualReport poisson_residual(const MomentData& moments, const InitialData& data, const SpeedField& speed,
                                       const DomainSpec& domain, ResidualRegion region, ResidualStencil stencil)
{
    const auto& g = domain.grid;
    if (!(moments.volume.front().grid() == g)) throw Error(ErrorKind::ConfigMismatch, "moment grid differs from domain");
    auto in_region = [&](std::size_t n) { return region == ResidualRegion::Q ? domain.in_q(n) : domain.in_q0(n); };

    // Nodes whose 5x5x5 neighbourhood lies in the region.
    std::vector<std::size_t> nodes;
    for (int k = domain.sigma_lo[2] + 2; k <= domain.sigma_hi[2] - 2; ++k)
        for (int j = domain.sigma_lo[1] + 2; j <= domain.sigma_hi[1] - 2; ++j)
            for (int i = domain.sigma_lo[0] + 2; i <= domain.sigma_hi[0] - 2; ++i) {
                bool ok = true;
                for (int dk = -2; dk <= 2 && ok; ++dk)
                    for (int dj = -2; dj <= 2 && ok; ++dj)
                        for (int di = -2; di <= 2 && ok; ++di)
                            if (!in_region(g.index(i + di, j + dj, k + dk))) ok = false;
                if (ok) nodes.push_back(g.index(i, j, k));
            }
    if (nodes.empty()) throw Error(ErrorKind::EmptyMask, "eroded residual region is empty");

    const double h2 = g.h * g.h;
    auto lap = [&](const ScalarField& v, std::size_t n) {
        double s = 0.0;
        for (int a = 0; a < 3; ++a) {
            const auto st = g.stride(a);
            if (stencil == ResidualStencil::SecondOrder) {
                s += v[offset(n, st)] - 2.0 * v[n] + v[offset(n, -st)];
            } else {
                s += (-v[offset(n, 2 * st)] + 16.0 * v[offset(n, st)] - 30.0 * v[n] + 16.0 * v[offset(n, -st)] -
                      v[offset(n, -2 * st)]) /
                     12.0;
            }
        }
        return s / h2;
    };

    PoissonResidualReport rep;
    rep.h = g.h;
    rep.region = region;
    rep.stencil = stencil;
    rep.nodes = nodes.size();
    for (int k : moments.orders) {
        const ScalarField* src = nullptr;
        double sign = 1.0;
        if (k == 0) src = &data.g;
        else if (k == 1) src = &data.f;
        else if (moments.has(k - 2)) {
            src = &moments.field(k - 2);
            sign = -1.0;
        } else continue;
        const auto& v = moments.field(k);
        double num = 0.0;
        double den = 0.0;
        for (auto n : nodes) {
            const double c = speed.values[n];
            const double rhs = sign * (*src)[n] / (c * c);
            const double r = lap(v, n) + rhs;
            num += r * r;
            den += rhs * rhs;
        }
        rep.orders.push_back(k);
        const bool abs_mode = !(den > 0.0);
        rep.absolute.push_back(abs_mode);
        rep.residual.push_back(abs_mode ? std::sqrt(num * g.h * h2) : std::sqrt(num / den));
    }
    return rep;
}

double laplace_consistency(const std::vector<std::vector<double>>& moments,
                           const std::vector<std::vector<double>>& series, double dt, double z)
{
    if (moments.empty() || series.empty()) throw Error(ErrorKind::ConfigError, "empty moment or trace input");
    const std::size_t probes = series.front().size();
    std::vector<double> direct(probes, 0.0);
    const std::size_t last = series.size() - 1;
    for (std::size_t m = 0; m <= last; ++m) {
        const double w = (m == 0 || m == last ? 0.5 : 1.0) * dt * std::exp(-z * m * dt);
        for (std::size_t p = 0; p < probes; ++p) direct[p] += w * series[m][p];
    }
    double num = 0.0;
    double den = 0.0;
    for (std::size_t p = 0; p < probes; ++p) {
        double s = 0.0;
        double zk = 1.0;
        for (const auto& vk : moments) {
            s += vk[p] * zk;
            zk *= z;
        }
        num += (direct[p] - s) * (direct[p] - s);
        den += direct[p] * direct[p];
    }
    if (!(den > 0.0)) return std::sqrt(num);
    return std::sqrt(num / den);
}

void PointSeriesRecorder::observe(const Snapshot& snap)
{
    std::vector<double> row(nodes_.size());
    for (std::size_t p = 0; p < nodes_.size(); ++p) row[p] = (*snap.u)[nodes_[p]];
    series_.push_back(std::move(row));
    dt_ = snap.dt;
}

MomentData difference_moments(const MomentData& a, const MomentData& b)
{
    if (a.orders != b.orders || a.dt != b.dt || a.samples != b.samples || a.volume.empty() ||
        !(a.volume.front().grid() == b.volume.front().grid()))
        throw Error(ErrorKind::ConfigMismatch, "moment sets differ in grid, dt, orders or length");
    MomentData d = a;
    for (std::size_t o = 0; o < d.volume.size(); ++o)
        for (std::size_t n = 0; n < d.volume[o].size(); ++n) d.volume[o][n] -= b.volume[o][n];
    for (std::size_t o = 0; o < d.tail.size() && o < b.tail.size(); ++o) d.tail[o] += b.tail[o];
    return d;
}

}  // namespace exwave
