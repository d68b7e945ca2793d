#include "exwave/reconstruct.hpp"

#include "exwave/error.hpp"
#include "exwave/quadrature.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <thread>

namespace exwave {

namespace {

constexpr Complex kI{0.0, 1.0};

std::vector<Vec3> fibonacci_sphere(const Vec3& center, double radius, int count)
{
    std::vector<Vec3> pts;
    pts.reserve(count);
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < count; ++i) {
        const double z = 1.0 - 2.0 * (i + 0.5) / count;
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double phi = golden * i;
        pts.push_back(center + radius * Vec3{r * std::cos(phi), r * std::sin(phi), z});
    }
    return pts;
}

// Centre and radius of a ball inside the obstacle, if there is one.
std::optional<std::pair<Vec3, double>> obstacle_core(const ObstacleSpec& obstacle)
{
    if (const auto* s = std::get_if<SphereObstacle>(&obstacle)) return std::make_pair(s->center, s->radius);
    if (const auto* b = std::get_if<AxisBoxObstacle>(&obstacle)) {
        const double r = 0.5 * std::min({b->box.width(0), b->box.width(1), b->box.width(2)});
        return std::make_pair(b->box.center(), r);
    }
    if (const auto* r = std::get_if<RadialObstacle>(&obstacle)) {
        const double rmin = r->radius.empty() ? 0.0 : *std::min_element(r->radius.begin(), r->radius.end());
        return std::make_pair(r->center, rmin);
    }
    return std::nullopt;
}

}  // namespace

Complex FrequencySample::phi(const Vec3& x) const
{
    return std::exp(Complex{zeta * x[2], -(eta1 * x[0] + eta2 * x[1])});
}

std::array<Complex, 3> FrequencySample::grad(const Vec3& x) const
{
    const Complex p = phi(x);
    return {-kI * eta1 * p, -kI * eta2 * p, zeta * p};
}

FrequencySample make_probe(double eta1, double eta2, int sign)
{
    FrequencySample s;
    s.eta1 = eta1;
    s.eta2 = eta2;
    s.sign = sign < 0 ? -1 : 1;
    s.zeta = s.sign * std::hypot(eta1, eta2);
    return s;
}

double discrete_zeta(double eta1, double eta2, double h)
{
    // cosh(zeta h) - 1 = (1 - cos(eta1 h)) + (1 - cos(eta2 h)), in half-angle form.
    const double s1 = std::sin(0.5 * eta1 * h);
    const double s2 = std::sin(0.5 * eta2 * h);
    const double rhs = s1 * s1 + s2 * s2;  // sinh^2(zeta h / 2)
    return 2.0 * std::asinh(std::sqrt(rhs)) / h;
}

FrequencySample make_grid_probe(double eta1, double eta2, int sign, double h)
{
    FrequencySample s;
    s.eta1 = eta1;
    s.eta2 = eta2;
    s.sign = sign < 0 ? -1 : 1;
    s.h = h;
    s.zeta = s.sign * discrete_zeta(eta1, eta2, h);
    return s;
}

Complex green_integral(const MomentTraces& traces, const FrequencySample& probe)
{
    const auto& mesh = traces.mesh;
    bool sigma = false;
    for (auto tag : mesh.tags) {
        if (tag == SurfaceTag::Patch)
            throw Error(ErrorKind::MissingTrace, "patch-only traces need Cauchy extension before the Green identity");
        if (tag == SurfaceTag::Sigma) sigma = true;
    }
    if (!sigma) throw Error(ErrorKind::MissingTrace, "no traces on the boundary of Sigma");

    Complex acc{0.0, 0.0};
    const bool staggered = mesh.rule == BoundaryMesh::Rule::Staggered;
    const double h = mesh.spacing;
    for (std::size_t p = 0; p < mesh.size(); ++p) {
        const Vec3& x = mesh.points[p];
        const Vec3& nu = mesh.normals[p];
        Complex phi;
        Complex dphi;
        if (staggered && mesh.tags[p] != SurfaceTag::Obstacle) {
            const Complex a = probe.phi(x - (0.5 * h) * nu);
            const Complex b = probe.phi(x + (0.5 * h) * nu);
            phi = 0.5 * (a + b);
            dphi = (b - a) / h;
        } else {
            phi = probe.phi(x);
            const auto g = probe.grad(x);
            dphi = g[0] * nu[0] + g[1] * nu[1] + g[2] * nu[2];
        }
        acc += mesh.weights[p] * (-traces.dnu[p] * phi + traces.value[p] * dphi);
    }
    return acc;
}

double axial_weight(const AxialProfile& profile, double zeta, int points)
{
    const double a = profile.a;
    const double b = profile.b;
    if (profile.kind == AxialProfile::Kind::Indicator) {
        if (zeta == 0.0) return b - a;
        return std::exp(a * zeta) * std::expm1((b - a) * zeta) / zeta;
    }
    const auto rule = gauss_legendre(points, a, b);
    double m = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i)
        m += rule.weights[i] * profile(rule.nodes[i]) * std::exp(zeta * rule.nodes[i]);
    return m;
}

FourierRecovery recover_fourier(const MomentTraces& traces, const AxialProfile& profile, const FourierOptions& options)
{
    if (!(options.half_width > 0.0) || !(options.rho_max >= 0.0))
        throw Error(ErrorKind::ConfigError, "Fourier grid needs a positive window half-width");
    FourierRecovery rec;
    rec.d_eta = std::numbers::pi / (2.0 * options.half_width);
    rec.n = static_cast<int>(std::ceil(options.rho_max / rec.d_eta - 1e-12));
    rec.sign = options.sign < 0 ? -1 : 1;
    rec.grid_probes = options.grid_probes && traces.mesh.rule == BoundaryMesh::Rule::Staggered;
    const std::size_t total = rec.side() * rec.side();
    rec.eta1.resize(total);
    rec.eta2.resize(total);
    rec.zeta.resize(total);
    rec.weight.resize(total);
    rec.values.resize(total);
    for (int j = -rec.n; j <= rec.n; ++j)
        for (int i = -rec.n; i <= rec.n; ++i) {
            const auto idx = rec.index(i, j);
            rec.eta1[idx] = i * rec.d_eta;
            rec.eta2[idx] = j * rec.d_eta;
        }

    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t idx = begin; idx < end; ++idx) {
            const auto probe = rec.grid_probes
                                   ? make_grid_probe(rec.eta1[idx], rec.eta2[idx], rec.sign, traces.mesh.spacing)
                                   : make_probe(rec.eta1[idx], rec.eta2[idx], rec.sign);
            rec.zeta[idx] = probe.zeta;
            rec.weight[idx] = axial_weight(profile, probe.zeta);
            rec.values[idx] = green_integral(traces, probe) / rec.weight[idx];
        }
    };
    const int workers = std::max(1, options.workers);
    if (workers == 1) {
        work(0, total);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back(work, total * w / workers, total * (w + 1) / workers);
        for (auto& t : pool) t.join();
    }
    return rec;
}

FourierRecovery average_signs(const FourierRecovery& plus, const FourierRecovery& minus)
{
    if (plus.n != minus.n || plus.d_eta != minus.d_eta)
        throw Error(ErrorKind::ConfigMismatch, "sign recoveries use different eta grids");
    FourierRecovery avg = plus;
    avg.sign = 0;
    for (std::size_t i = 0; i < avg.values.size(); ++i) avg.values[i] = 0.5 * (plus.values[i] + minus.values[i]);
    return avg;
}

double relative_l2(const PlaneField& a, const PlaneField& b)
{
    if (a.values.size() != b.values.size()) throw Error(ErrorKind::ConfigMismatch, "plane fields differ in size");
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        const double d = a.values[i] - b.values[i];
        num += d * d;
        den += b.values[i] * b.values[i];
    }
    if (!(den > 0.0)) return std::sqrt(num);
    return std::sqrt(num / den);
}

ReconstructionResult truncated_inversion(const FourierRecovery& fourier, double rho, const PlaneField& window,
                                         const PlaneField* truth)
{
    if (rho < 0.0 || rho > fourier.max_eta() * (1.0 + 1e-12))
        throw Error(ErrorKind::RhoOutOfRange, "rho exceeds the sampled eta range");
    std::vector<std::size_t> active;
    for (std::size_t idx = 0; idx < fourier.values.size(); ++idx)
        if (std::hypot(fourier.eta1[idx], fourier.eta2[idx]) <= rho * (1.0 + 1e-12)) active.push_back(idx);

    ReconstructionResult res;
    res.rho = rho;
    res.g = window;
    const double scale = fourier.d_eta * fourier.d_eta / (4.0 * std::numbers::pi * std::numbers::pi);
    for (int j = 0; j < window.ny; ++j)
        for (int i = 0; i < window.nx; ++i) {
            const double x = window.x(i);
            const double y = window.y(j);
            Complex s{0.0, 0.0};
            for (auto idx : active)
                s += fourier.values[idx] * std::exp(Complex{0.0, x * fourier.eta1[idx] + y * fourier.eta2[idx]});
            s *= scale;
            res.g.at(i, j) = s.real();
            res.max_imag = std::max(res.max_imag, std::abs(s.imag()));
        }
    if (truth) res.rel_error = relative_l2(res.g, *truth);
    return res;
}

SpeedContrast recover_speed_contrast(const std::vector<ContrastChannel>& channels,
                                     const std::function<double(double, double)>& c_ref, double m,
                                     const std::function<double(double, double)>* c_truth)
{
    if (channels.empty()) throw Error(ErrorKind::EmptyMask, "no contrast channels");
    if (!(m > 0.0)) throw Error(ErrorKind::ThresholdViolation, "threshold m must be positive");
    const PlaneField& shape = channels.front().q;
    for (const auto& ch : channels)
        if (ch.q.values.size() != shape.values.size() || ch.reference.values.size() != shape.values.size() ||
            ch.mask.size() != shape.values.size())
            throw Error(ErrorKind::ConfigMismatch, "contrast channels use different plane grids");

    SpeedContrast out;
    out.m = m;
    out.c_diff = shape;
    out.inv_sq_diff = shape;
    std::fill(out.c_diff.values.begin(), out.c_diff.values.end(), 0.0);
    std::fill(out.inv_sq_diff.values.begin(), out.inv_sq_diff.values.end(), 0.0);
    out.mask.assign(shape.values.size(), false);

    double err_c = 0.0;
    double ref_c = 0.0;
    double err_q = 0.0;
    double ref_q = 0.0;
    std::size_t count = 0;
    for (int j = 0; j < shape.ny; ++j)
        for (int i = 0; i < shape.nx; ++i) {
            const auto n = static_cast<std::size_t>(j) * shape.nx + i;
            double d = 0.0;
            int used = 0;
            for (const auto& ch : channels) {
                if (!ch.mask[n]) continue;
                const double r = ch.reference.values[n];
                if (std::abs(r) < m)
                    throw Error(ErrorKind::ThresholdViolation, "mask node where the reference datum is below m");
                d += ch.q.values[n] / r;
                ++used;
            }
            if (used == 0) continue;
            d /= used;
            ++count;
            out.mask[n] = true;
            const double x = shape.x(i);
            const double y = shape.y(j);
            const double cr = c_ref(x, y);
            const double inv_sq = std::max(1.0 / (cr * cr) + d, 1e-12);
            out.inv_sq_diff.values[n] = d;
            out.c_diff.values[n] = 1.0 / std::sqrt(inv_sq) - cr;
            out.norm_c += out.c_diff.values[n] * out.c_diff.values[n];
            out.norm_inv_sq += d * d;
            if (c_truth) {
                const double ct = (*c_truth)(x, y);
                const double true_c = ct - cr;
                const double true_q = 1.0 / (ct * ct) - 1.0 / (cr * cr);
                err_c += (out.c_diff.values[n] - true_c) * (out.c_diff.values[n] - true_c);
                ref_c += true_c * true_c;
                err_q += (d - true_q) * (d - true_q);
                ref_q += true_q * true_q;
            }
        }
    if (count == 0) throw Error(ErrorKind::EmptyMask, "contrast mask is empty");
    const double cell = shape.h * shape.h;
    out.norm_c = std::sqrt(out.norm_c * cell);
    out.norm_inv_sq = std::sqrt(out.norm_inv_sq * cell);
    if (c_truth) {
        out.rel_error_c = ref_c > 0.0 ? std::sqrt(err_c / ref_c) : std::sqrt(err_c * cell);
        out.rel_error_inv_sq = ref_q > 0.0 ? std::sqrt(err_q / ref_q) : std::sqrt(err_q * cell);
    }
    return out;
}

CauchyExtension cauchy_extend(const MomentTraces& patch, const BoundaryMesh& targets, const DomainSpec& domain,
                              const CauchyOptions& options)
{
    const auto& pm = patch.mesh;
    if (pm.size() < 50) throw Error(ErrorKind::InsufficientPatch, "patch resolves fewer than 50 quadrature points");

    // Source dictionary: inside Q1, inside the obstacle, outside Sigma.
    std::vector<Vec3> sources;
    const auto& q1 = domain.q1;
    const double q1_half = 0.5 * std::min({q1.width(0), q1.width(1), q1.width(2)});
    for (const auto& y : fibonacci_sphere(q1.center(), options.inner_radius_factor * q1_half, options.sources_inner))
        sources.push_back(y);
    if (const auto core = obstacle_core(domain.obstacle); core && core->second > 0.0)
        for (const auto& y : fibonacci_sphere(core->first, options.inner_radius_factor * core->second,
                                              std::max(8, options.sources_inner / 2)))
            sources.push_back(y);
    const auto& sg = domain.sigma;
    const double sigma_half_diag = 0.5 * norm(sg.hi - sg.lo);
    for (const auto& y : fibonacci_sphere(sg.center(), options.outer_radius_factor * sigma_half_diag, options.sources_outer))
        sources.push_back(y);

    const double length = 0.1 * 2.0 * sigma_half_diag;
    const auto rows = static_cast<Eigen::Index>(2 * pm.size());
    const auto cols = static_cast<Eigen::Index>(sources.size());
    Eigen::MatrixXd a(rows, cols);
    Eigen::VectorXd b(rows);
    for (std::size_t p = 0; p < pm.size(); ++p) {
        const double sw = std::sqrt(pm.weights[p]);
        for (std::size_t j = 0; j < sources.size(); ++j) {
            const Vec3 d = pm.points[p] - sources[j];
            const double r = norm(d);
            a(static_cast<Eigen::Index>(2 * p), static_cast<Eigen::Index>(j)) = sw / r;
            a(static_cast<Eigen::Index>(2 * p + 1), static_cast<Eigen::Index>(j)) =
                -sw * length * dot(d, pm.normals[p]) / (r * r * r);
        }
        b(static_cast<Eigen::Index>(2 * p)) = sw * patch.value[p];
        b(static_cast<Eigen::Index>(2 * p + 1)) = sw * length * patch.dnu[p];
    }

    Eigen::BDCSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd sv = svd.singularValues();
    const Eigen::VectorXd beta = svd.matrixU().transpose() * b;
    const double smax = sv.size() > 0 ? sv(0) : 0.0;
    if (!(smax > 0.0)) throw Error(ErrorKind::IllConditioned, "Cauchy system matrix is zero");
    const double b_norm2 = b.squaredNorm();
    const double beta_norm2 = beta.squaredNorm();

    auto solve = [&](double lambda, double* residual, double* sol_norm) {
        const double l = lambda * smax;
        Eigen::VectorXd coef(sv.size());
        double res2 = std::max(0.0, b_norm2 - beta_norm2);
        for (Eigen::Index i = 0; i < sv.size(); ++i) {
            const double s = sv(i);
            coef(i) = s * beta(i) / (s * s + l * l);
            const double f = l * l / (s * s + l * l);
            res2 += f * f * beta(i) * beta(i);
        }
        Eigen::VectorXd x = svd.matrixV() * coef;
        if (residual) *residual = std::sqrt(res2);
        if (sol_norm) *sol_norm = x.norm();
        return x;
    };

    CauchyExtension ext;
    double lambda = options.lambda;
    if (!(lambda > 0.0)) {
        const int np = std::max(3, options.lcurve_points);
        const double l0 = std::log10(options.lambda_min);
        const double l1 = std::log10(options.lambda_max);
        for (int i = 0; i < np; ++i) {
            const double lam = std::pow(10.0, l0 + (l1 - l0) * i / (np - 1));
            double r = 0.0;
            double s = 0.0;
            solve(lam, &r, &s);
            ext.lcurve_lambda.push_back(lam);
            ext.lcurve_residual.push_back(r);
            ext.lcurve_norm.push_back(s);
        }
        // Corner: maximum curvature of (log residual, log norm) in the log-lambda parameter.
        int best = np / 2;
        double best_kappa = -std::numeric_limits<double>::infinity();
        for (int i = 1; i + 1 < np; ++i) {
            auto px = [&](int k) { return std::log(std::max(ext.lcurve_residual[k], 1e-300)); };
            auto py = [&](int k) { return std::log(std::max(ext.lcurve_norm[k], 1e-300)); };
            const double dx = 0.5 * (px(i + 1) - px(i - 1));
            const double dy = 0.5 * (py(i + 1) - py(i - 1));
            const double ddx = px(i + 1) - 2.0 * px(i) + px(i - 1);
            const double ddy = py(i + 1) - 2.0 * py(i) + py(i - 1);
            const double denom = std::pow(dx * dx + dy * dy, 1.5);
            if (!(denom > 0.0)) continue;
            const double kappa = (dx * ddy - dy * ddx) / denom;
            if (kappa > best_kappa) {
                best_kappa = kappa;
                best = i;
            }
        }
        lambda = ext.lcurve_lambda[static_cast<std::size_t>(best)];
    }

    const double smin = sv(sv.size() - 1);
    const double l = lambda * smax;
    ext.condition = smax / std::max(smin, l);
    if (!(ext.condition < options.max_condition))
        throw Error(ErrorKind::IllConditioned,
                    "regularized Cauchy system condition estimate " + std::to_string(ext.condition));
    ext.lambda = lambda;
    const Eigen::VectorXd coef = solve(lambda, &ext.residual, &ext.solution_norm);

    ext.completed.order = patch.order;
    ext.completed.mesh = targets;
    ext.completed.value.assign(targets.size(), 0.0);
    ext.completed.dnu.assign(targets.size(), 0.0);
    for (std::size_t p = 0; p < targets.size(); ++p) {
        double v = 0.0;
        double dn = 0.0;
        for (std::size_t j = 0; j < sources.size(); ++j) {
            const Vec3 d = targets.points[p] - sources[j];
            const double r = norm(d);
            v += coef(static_cast<Eigen::Index>(j)) / r;
            dn -= coef(static_cast<Eigen::Index>(j)) * dot(d, targets.normals[p]) / (r * r * r);
        }
        ext.completed.value[p] = targets.tags[p] == SurfaceTag::Obstacle ? 0.0 : v;
        ext.completed.dnu[p] = dn;
    }
    return ext;
}

}  // namespace exwave
