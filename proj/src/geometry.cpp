#include "exwave/geometry.hpp"

#include "exwave/error.hpp"
#include "exwave/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numbers>
#include <sstream>

namespace exwave {

namespace {

constexpr double kPi = std::numbers::pi;

std::string box_str(const Box& b)
{
    std::ostringstream os;
    os << "[" << b.lo[0] << "," << b.hi[0] << "]x[" << b.lo[1] << "," << b.hi[1] << "]x["
       << b.lo[2] << "," << b.hi[2] << "]";
    return os.str();
}

Vec3 unit_axis(int axis, double sign)
{
    Vec3 e{0.0, 0.0, 0.0};
    e[axis] = sign;
    return e;
}

// Tangential axes of a face normal to `axis`, in increasing order.
std::array<int, 2> tangential(int axis)
{
    if (axis == 0) return {1, 2};
    if (axis == 1) return {0, 2};
    return {0, 1};
}

// Trapezoid-weighted grid of a rectangle face; appends to mesh.
void append_face(BoundaryMesh& mesh, int axis, double offset, std::array<double, 2> lo,
                 std::array<double, 2> hi, double h, const Vec3& normal, SurfaceTag tag)
{
    const auto t = tangential(axis);
    const int n0 = std::max(1, static_cast<int>(std::lround((hi[0] - lo[0]) / h)));
    const int n1 = std::max(1, static_cast<int>(std::lround((hi[1] - lo[1]) / h)));
    const double h0 = (hi[0] - lo[0]) / n0;
    const double h1 = (hi[1] - lo[1]) / n1;
    for (int b = 0; b <= n1; ++b)
        for (int a = 0; a <= n0; ++a) {
            Vec3 p{};
            p[axis] = offset;
            p[t[0]] = lo[0] + a * h0;
            p[t[1]] = lo[1] + b * h1;
            mesh.points.push_back(p);
            mesh.normals.push_back(normal);
            mesh.weights.push_back(h0 * h1 * trapezoid_weight(a, n0) * trapezoid_weight(b, n1));
            mesh.tags.push_back(tag);
        }
}

double snap(double x, double origin, double h)
{
    return origin + h * std::round((x - origin) / h);
}

Box snap_box(const Box& b, const Vec3& origin, double h)
{
    Box s;
    for (int a = 0; a < 3; ++a) {
        s.lo[a] = snap(b.lo[a], origin[a], h);
        s.hi[a] = snap(b.hi[a], origin[a], h);
    }
    return s;
}

bool finite_box(const Box& b)
{
    for (int a = 0; a < 3; ++a)
        if (!std::isfinite(b.lo[a]) || !std::isfinite(b.hi[a])) return false;
    return true;
}

// Characteristic size used to pick an automatic mesh resolution.
double obstacle_scale(const ObstacleSpec& obstacle)
{
    if (const auto* s = std::get_if<SphereObstacle>(&obstacle)) return s->radius;
    if (const auto* b = std::get_if<AxisBoxObstacle>(&obstacle))
        return std::min({b->box.width(0), b->box.width(1), b->box.width(2)});
    if (const auto* r = std::get_if<RadialObstacle>(&obstacle))
        return *std::min_element(r->radius.begin(), r->radius.end());
    return 1.0;
}

}  // namespace

double Box::distance(const Vec3& p) const
{
    double d2 = 0.0;
    for (int a = 0; a < 3; ++a) {
        const double d = std::max({lo[a] - p[a], 0.0, p[a] - hi[a]});
        d2 += d * d;
    }
    return std::sqrt(d2);
}

double Box::margin_to(const Box& inner) const
{
    double m = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) m = std::min({m, inner.lo[a] - lo[a], hi[a] - inner.hi[a]});
    return m;
}

double RadialObstacle::radius_at(double theta, double phi) const
{
    const double t = std::clamp(theta / kPi * n_theta - 0.5, 0.0, n_theta - 1.0);
    const int t0 = std::min(static_cast<int>(t), n_theta - 1);
    const int t1 = std::min(t0 + 1, n_theta - 1);
    const double ft = t - t0;
    double s = phi / (2.0 * kPi) * n_phi;
    s -= n_phi * std::floor(s / n_phi);
    const int p0 = static_cast<int>(s) % n_phi;
    const int p1 = (p0 + 1) % n_phi;
    const double fp = s - std::floor(s);
    auto r = [&](int i, int j) { return radius[static_cast<std::size_t>(i) * n_phi + j]; };
    return (1 - ft) * ((1 - fp) * r(t0, p0) + fp * r(t0, p1)) + ft * ((1 - fp) * r(t1, p0) + fp * r(t1, p1));
}

bool has_boundary(const ObstacleSpec& obstacle)
{
    return !std::holds_alternative<NoObstacle>(obstacle);
}

bool obstacle_contains(const ObstacleSpec& obstacle, const Vec3& p)
{
    if (const auto* s = std::get_if<SphereObstacle>(&obstacle)) {
        return norm(p - s->center) <= s->radius * (1.0 + 1e-12);
    }
    if (const auto* b = std::get_if<AxisBoxObstacle>(&obstacle)) {
        return b->box.contains(p, 1e-12);
    }
    if (const auto* r = std::get_if<RadialObstacle>(&obstacle)) {
        const Vec3 d = p - r->center;
        const double len = norm(d);
        if (len == 0.0) return true;
        const double theta = std::acos(std::clamp(d[2] / len, -1.0, 1.0));
        const double phi = std::atan2(d[1], d[0]);
        return len <= r->radius_at(theta, phi < 0 ? phi + 2 * kPi : phi);
    }
    return false;
}

std::string to_string(SurfaceTag tag)
{
    switch (tag) {
    case SurfaceTag::Obstacle: return "dK";
    case SurfaceTag::Sigma: return "dSigma";
    case SurfaceTag::Patch: return "S";
    }
    return "?";
}

double BoundaryMesh::area() const
{
    double a = 0.0;
    for (double w : weights) a += w;
    return a;
}

void BoundaryMesh::append(const BoundaryMesh& other)
{
    if (size() == 0) {
        rule = other.rule;
        spacing = other.spacing;
    }
    points.insert(points.end(), other.points.begin(), other.points.end());
    normals.insert(normals.end(), other.normals.begin(), other.normals.end());
    weights.insert(weights.end(), other.weights.begin(), other.weights.end());
    tags.insert(tags.end(), other.tags.begin(), other.tags.end());
    inner.insert(inner.end(), other.inner.begin(), other.inner.end());
    outer.insert(outer.end(), other.outer.begin(), other.outer.end());
}

BoundaryMesh BoundaryMesh::select(SurfaceTag tag) const
{
    BoundaryMesh out;
    out.rule = rule;
    out.spacing = spacing;
    for (std::size_t n = 0; n < size(); ++n) {
        if (tags[n] != tag) continue;
        out.points.push_back(points[n]);
        out.normals.push_back(normals[n]);
        out.weights.push_back(weights[n]);
        out.tags.push_back(tags[n]);
        if (!inner.empty()) {
            out.inner.push_back(inner[n]);
            out.outer.push_back(outer[n]);
        }
    }
    return out;
}

double DomainSpec::sponge_depth(const Vec3& p) const
{
    if (sponge_width <= 0.0) return 0.0;
    double depth = 0.0;
    for (int a = 0; a < 3; ++a) {
        const double in_lo = sim_box.lo[a] + sponge_width;
        const double in_hi = sim_box.hi[a] - sponge_width;
        depth = std::max({depth, (in_lo - p[a]) / sponge_width, (p[a] - in_hi) / sponge_width});
    }
    return std::clamp(depth, 0.0, 1.0);
}

BoundaryMesh obstacle_mesh(const ObstacleSpec& obstacle, double h)
{
    BoundaryMesh mesh;
    mesh.spacing = h;
    if (const auto* s = std::get_if<SphereObstacle>(&obstacle)) {
        const int nt = std::max(8, static_cast<int>(std::ceil(kPi * s->radius / h)) + 1);
        const int np = std::max(8, static_cast<int>(std::ceil(2.0 * kPi * s->radius / h)));
        const auto rule = gauss_legendre(nt);
        const double r2 = s->radius * s->radius;
        for (int i = 0; i < nt; ++i) {
            const double ct = rule.nodes[i];
            const double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
            for (int j = 0; j < np; ++j) {
                const double phi = 2.0 * kPi * j / np;
                const Vec3 d{st * std::cos(phi), st * std::sin(phi), ct};
                mesh.points.push_back(s->center + s->radius * d);
                mesh.normals.push_back(-1.0 * d);
                mesh.weights.push_back(r2 * rule.weights[i] * 2.0 * kPi / np);
                mesh.tags.push_back(SurfaceTag::Obstacle);
            }
        }
    } else if (const auto* b = std::get_if<AxisBoxObstacle>(&obstacle)) {
        for (int axis = 0; axis < 3; ++axis) {
            const auto t = tangential(axis);
            for (int side : {-1, 1}) {
                const double offset = side < 0 ? b->box.lo[axis] : b->box.hi[axis];
                // the mesh normal points out of Q, i.e. into the box
                append_face(mesh, axis, offset, {b->box.lo[t[0]], b->box.lo[t[1]]},
                            {b->box.hi[t[0]], b->box.hi[t[1]]}, h, unit_axis(axis, -side),
                            SurfaceTag::Obstacle);
            }
        }
    } else if (const auto* r = std::get_if<RadialObstacle>(&obstacle)) {
        const double rmax = *std::max_element(r->radius.begin(), r->radius.end());
        const int nt = std::max(8, static_cast<int>(std::ceil(kPi * rmax / h)) + 1);
        const int np = std::max(8, static_cast<int>(std::ceil(2.0 * kPi * rmax / h)));
        const auto rule = gauss_legendre(nt);
        auto surf = [&](double theta, double phi) {
            const Vec3 d{std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi),
                         std::cos(theta)};
            return r->center + r->radius_at(theta, phi) * d;
        };
        constexpr double eps = 1e-6;
        for (int i = 0; i < nt; ++i) {
            const double theta = std::acos(rule.nodes[i]);
            for (int j = 0; j < np; ++j) {
                const double phi = 2.0 * kPi * j / np;
                const Vec3 pt = (1.0 / (2 * eps)) * (surf(theta + eps, phi) - surf(theta - eps, phi));
                const Vec3 pp = (1.0 / (2 * eps)) * (surf(theta, phi + eps) - surf(theta, phi - eps));
                const Vec3 n = cross(pt, pp);
                const double jac = norm(n);
                mesh.points.push_back(surf(theta, phi));
                mesh.normals.push_back((-1.0 / jac) * n);
                mesh.weights.push_back(jac / std::sin(theta) * rule.weights[i] * 2.0 * kPi / np);
                mesh.tags.push_back(SurfaceTag::Obstacle);
            }
        }
    }
    return mesh;
}

StarShapedResult star_shaped_check(const ObstacleSpec& obstacle)
{
    StarShapedResult result;
    if (!has_boundary(obstacle)) return result;
    const auto mesh = obstacle_mesh(obstacle, obstacle_scale(obstacle) / 32.0);
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n < mesh.size(); ++n) {
        // mesh normals point into K; x.nu uses the normal exterior to K
        m = std::min(m, -dot(mesh.points[n], mesh.normals[n]));
    }
    result.min_x_dot_nu = m;
    result.star_shaped = m > 0.0;
    return result;
}

int annulus_components(const DomainSpec& domain)
{
    const auto& g = domain.grid;
    std::vector<std::uint8_t> seen(g.size(), 0);
    int components = 0;
    std::deque<std::size_t> queue;
    const auto& lo = domain.sigma_lo;
    const auto& hi = domain.sigma_hi;
    for (int k = lo[2]; k <= hi[2]; ++k)
        for (int j = lo[1]; j <= hi[1]; ++j)
            for (int i = lo[0]; i <= hi[0]; ++i) {
                const auto start = g.index(i, j, k);
                if (seen[start] || domain.region[start] != Region::Annulus) continue;
                ++components;
                seen[start] = 1;
                queue.push_back(start);
                while (!queue.empty()) {
                    const auto n = queue.front();
                    queue.pop_front();
                    const auto c = g.unravel(n);
                    for (int axis = 0; axis < 3; ++axis)
                        for (int s : {-1, 1}) {
                            auto q = c;
                            q[axis] += s;
                            if (q[axis] < lo[axis] || q[axis] > hi[axis]) continue;
                            const auto m = g.index(q[0], q[1], q[2]);
                            if (!seen[m] && domain.region[m] == Region::Annulus) {
                                seen[m] = 1;
                                queue.push_back(m);
                            }
                        }
                }
            }
    return components;
}

DomainSpec build_domain(const DomainConfig& config)
{
    const double h = config.h;
    if (!(h > 0.0) || !std::isfinite(h)) throw Error(ErrorKind::ConfigError, "grid spacing must be positive");
    for (const Box* b : {&config.sigma, &config.q0, &config.q1})
        if (!finite_box(*b) || !b->valid())
            throw Error(ErrorKind::ConfigError, "box " + box_str(*b) + " is not a finite nonempty box");
    if (config.sponge_width < 0.0 || config.margin < 0.0)
        throw Error(ErrorKind::ConfigError, "sponge width and margin must be nonnegative");

    DomainSpec d;
    d.obstacle = config.obstacle;
    d.sponge_width = config.sponge_width;

    const int pad = static_cast<int>(std::lround((config.margin + config.sponge_width) / h));
    d.grid.h = h;
    for (int a = 0; a < 3; ++a) {
        const int n_sig = std::max(1, static_cast<int>(std::lround(config.sigma.width(a) / h)));
        d.sigma.lo[a] = config.sigma.lo[a];
        d.sigma.hi[a] = config.sigma.lo[a] + n_sig * h;
        d.grid.origin[a] = config.sigma.lo[a] - pad * h;
        d.grid.dims[a] = n_sig + 1 + 2 * pad;
        d.sigma_lo[a] = pad;
        d.sigma_hi[a] = pad + n_sig;
        d.sim_box.lo[a] = d.grid.origin[a];
        d.sim_box.hi[a] = d.grid.origin[a] + (d.grid.dims[a] - 1) * h;
        if (d.grid.dims[a] < 16)
            throw Error(ErrorKind::ConfigError, "grid needs at least 16 nodes per axis");
    }
    d.q0 = snap_box(config.q0, d.grid.origin, h);
    d.q1 = snap_box(config.q1, d.grid.origin, h);
    if (!d.q0.valid() || !d.q1.valid())
        throw Error(ErrorKind::ConfigError, "Q0/Q1 collapse below grid resolution");

    const double need = 2.0 * h - 1e-9 * h;
    if (d.q1.margin_to(d.q0) < need)
        throw Error(ErrorKind::NestingViolation,
                    "Q0 " + box_str(d.q0) + " is not compactly inside Q1 " + box_str(d.q1));

    if (has_boundary(d.obstacle)) {
        const auto surf = obstacle_mesh(d.obstacle, h / 2.0);
        double dist_q0 = std::numeric_limits<double>::infinity();
        bool pierces_q1 = obstacle_contains(d.obstacle, config.q1.center());
        for (const auto& p : surf.points) {
            dist_q0 = std::min(dist_q0, d.q0.distance(p));
            if (config.q1.contains_strictly(p, 1e-9 * h)) pierces_q1 = true;
        }
        if (obstacle_contains(d.obstacle, d.q0.center()) || dist_q0 < need)
            throw Error(ErrorKind::ObstacleTouchesQ0, "obstacle comes within 2h of Q0");
        if (pierces_q1) throw Error(ErrorKind::NestingViolation, "obstacle overlaps the interior of Q1");
    }

    // masks
    d.region.resize(d.grid.size());
    const double tol = 1e-9 * h;
    for (int k = 0; k < d.grid.dims[2]; ++k)
        for (int j = 0; j < d.grid.dims[1]; ++j)
            for (int i = 0; i < d.grid.dims[0]; ++i) {
                const auto p = d.grid.position(i, j, k);
                Region r;
                if (obstacle_contains(d.obstacle, p)) {
                    r = Region::Obstacle;
                } else if (d.sigma.contains(p, tol)) {
                    if (d.q0.contains(p, tol)) r = Region::Q0;
                    else if (d.q1.contains(p, tol)) r = Region::Shell;
                    else r = Region::Annulus;
                } else {
                    r = d.sponge_depth(p) > 0.0 ? Region::Sponge : Region::Exterior;
                }
                d.region[d.grid.index(i, j, k)] = r;
            }

    if (annulus_components(d) != 1)
        throw Error(ErrorKind::DisconnectedAnnulus, "Sigma \\ (K u Q1) is not one connected component");
    if (d.sigma.margin_to(d.q1) < need)
        throw Error(ErrorKind::NestingViolation, "Q1 is not compactly inside Sigma");
    if (has_boundary(d.obstacle)) {
        for (const auto& p : obstacle_mesh(d.obstacle, h / 2.0).points)
            if (!d.sigma.contains_strictly(p, need))
                throw Error(ErrorKind::NestingViolation, "obstacle is not compactly inside Sigma");
    }
    if (d.sim_box.margin_to(d.sigma) < config.sponge_width + 1e-9 * h)
        throw Error(ErrorKind::NestingViolation, "sponge layer overlaps Sigma");

    if (config.patch.empty()) throw Error(ErrorKind::EmptyPatch, "measurement patch S is empty");
    for (auto rect : config.patch) {
        if (rect.axis < 0 || rect.axis > 2 || (rect.side != 1 && rect.side != -1))
            throw Error(ErrorKind::EmptyPatch, "patch face is not a face of Sigma");
        const auto t = tangential(rect.axis);
        for (int c = 0; c < 2; ++c) {
            if (rect.full_face) {
                rect.lo[c] = d.sigma.lo[t[c]];
                rect.hi[c] = d.sigma.hi[t[c]];
            }
            rect.lo[c] = std::max(snap(rect.lo[c], d.grid.origin[t[c]], h), d.sigma.lo[t[c]]);
            rect.hi[c] = std::min(snap(rect.hi[c], d.grid.origin[t[c]], h), d.sigma.hi[t[c]]);
            if (!(rect.lo[c] < rect.hi[c]))
                throw Error(ErrorKind::EmptyPatch, "patch rectangle has no area on its face");
        }
        d.patch.push_back(rect);
    }
    return d;
}

BoundaryMesh boundary_mesh(SurfaceTag surface, const DomainSpec& domain)
{
    const double h = domain.grid.h;
    BoundaryMesh mesh;
    mesh.spacing = h;
    auto count_check = [](std::size_t before, const BoundaryMesh& m, const char* what) {
        if (m.size() - before < 8)
            throw Error(ErrorKind::UnresolvedSurface, std::string("fewer than 8 nodes on ") + what);
    };
    switch (surface) {
    case SurfaceTag::Obstacle:
        mesh = obstacle_mesh(domain.obstacle, h);
        break;
    case SurfaceTag::Sigma:
        for (int axis = 0; axis < 3; ++axis) {
            const auto t = tangential(axis);
            for (int side : {-1, 1}) {
                const auto before = mesh.size();
                append_face(mesh, axis, side < 0 ? domain.sigma.lo[axis] : domain.sigma.hi[axis],
                            {domain.sigma.lo[t[0]], domain.sigma.lo[t[1]]},
                            {domain.sigma.hi[t[0]], domain.sigma.hi[t[1]]}, h, unit_axis(axis, side),
                            SurfaceTag::Sigma);
                count_check(before, mesh, "a face of Sigma");
            }
        }
        break;
    case SurfaceTag::Patch:
        for (const auto& rect : domain.patch) {
            const auto before = mesh.size();
            append_face(mesh, rect.axis,
                        rect.side < 0 ? domain.sigma.lo[rect.axis] : domain.sigma.hi[rect.axis], rect.lo,
                        rect.hi, h, unit_axis(rect.axis, rect.side), SurfaceTag::Patch);
            count_check(before, mesh, "a patch rectangle");
        }
        break;
    }
    mesh.spacing = h;
    return mesh;
}

BoundaryMesh staggered_mesh(SurfaceTag surface, const DomainSpec& domain)
{
    const auto& g = domain.grid;
    const double h = g.h;
    BoundaryMesh mesh;
    mesh.rule = BoundaryMesh::Rule::Staggered;
    mesh.spacing = h;
    auto push = [&](const Vec3& p, const Vec3& nrm, std::size_t in, std::size_t out, SurfaceTag tag) {
        mesh.points.push_back(p);
        mesh.normals.push_back(nrm);
        mesh.weights.push_back(h * h);
        mesh.tags.push_back(tag);
        mesh.inner.push_back(in);
        mesh.outer.push_back(out);
    };

    if (surface == SurfaceTag::Obstacle) {
        if (!has_boundary(domain.obstacle)) return mesh;
        for (int k = 1; k + 1 < g.dims[2]; ++k)
            for (int j = 1; j + 1 < g.dims[1]; ++j)
                for (int i = 1; i + 1 < g.dims[0]; ++i) {
                    const auto n = g.index(i, j, k);
                    if (!domain.in_q(n)) continue;
                    for (int axis = 0; axis < 3; ++axis)
                        for (int s : {-1, 1}) {
                            const auto m = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(n) + s * g.stride(axis));
                            if (!domain.in_obstacle(m)) continue;
                            const auto c = g.unravel(m);
                            push(g.position(c[0], c[1], c[2]), unit_axis(axis, s), n, m, SurfaceTag::Obstacle);
                        }
                }
        return mesh;
    }

    const auto& lo = domain.sigma_lo;
    const auto& hi = domain.sigma_hi;
    for (int axis = 0; axis < 3; ++axis) {
        const auto t = tangential(axis);
        for (int s : {-1, 1}) {
            const int plane = s < 0 ? lo[axis] : hi[axis];
            for (int b = lo[t[1]]; b <= hi[t[1]]; ++b)
                for (int a = lo[t[0]]; a <= hi[t[0]]; ++a) {
                    std::array<int, 3> c{};
                    c[axis] = plane;
                    c[t[0]] = a;
                    c[t[1]] = b;
                    const auto n = g.index(c[0], c[1], c[2]);
                    if (!domain.in_q(n)) continue;
                    const auto m = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(n) + s * g.stride(axis));
                    Vec3 p = g.position(c[0], c[1], c[2]);
                    if (surface == SurfaceTag::Patch) {
                        bool inside = false;
                        for (const auto& rect : domain.patch) {
                            if (rect.axis != axis || rect.side != s) continue;
                            const double tol = 1e-9 * h;
                            if (p[t[0]] >= rect.lo[0] - tol && p[t[0]] <= rect.hi[0] + tol &&
                                p[t[1]] >= rect.lo[1] - tol && p[t[1]] <= rect.hi[1] + tol)
                                inside = true;
                        }
                        if (!inside) continue;
                    }
                    p[axis] += 0.5 * s * h;
                    push(p, unit_axis(axis, s), n, m, surface);
                }
        }
    }
    return mesh;
}

StabilityConstants stability_constants(const DomainSpec& domain)
{
    StabilityConstants c;
    c.tau = std::max(std::abs(domain.q0.lo[2]), std::abs(domain.q0.hi[2]));
    c.gamma = std::max(std::abs(domain.sigma.lo[2]), std::abs(domain.sigma.hi[2]));
    c.sigma_c = 1.0 + c.tau + c.gamma;
    c.alpha = c.sigma_c + 0.5;
    return c;
}

}  // namespace exwave
