#pragma once

#include "exwave/field.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace exwave {

/// Closed axis-aligned box [lo, hi].
struct Box {
    Vec3 lo{0.0, 0.0, 0.0};
    Vec3 hi{0.0, 0.0, 0.0};

    bool valid() const { return lo[0] < hi[0] && lo[1] < hi[1] && lo[2] < hi[2]; }
    bool contains(const Vec3& p, double tol = 1e-12) const
    {
        for (int a = 0; a < 3; ++a)
            if (p[a] < lo[a] - tol || p[a] > hi[a] + tol) return false;
        return true;
    }
    /// Strictly inside, by more than `margin` on every face.
    bool contains_strictly(const Vec3& p, double margin) const
    {
        for (int a = 0; a < 3; ++a)
            if (p[a] <= lo[a] + margin || p[a] >= hi[a] - margin) return false;
        return true;
    }
    Box inflated(double d) const
    {
        return {{lo[0] - d, lo[1] - d, lo[2] - d}, {hi[0] + d, hi[1] + d, hi[2] + d}};
    }
    Vec3 center() const { return 0.5 * (lo + hi); }
    double width(int axis) const { return hi[axis] - lo[axis]; }
    double volume() const { return width(0) * width(1) * width(2); }
    /// Euclidean distance from p to the box (0 inside).
    double distance(const Vec3& p) const;
    /// Smallest face-to-face gap of `inner` inside this box (negative if it pokes out).
    double margin_to(const Box& inner) const;
};

struct NoObstacle {};

struct SphereObstacle {
    Vec3 center{0.0, 0.0, 0.0};
    double radius = 0.0;
};

struct AxisBoxObstacle {
    Box box;
};

/// Star-shaped body about `center`: radius(theta, phi) tabulated on a
/// regular (n_theta x n_phi) table with theta cell-centred on (0, pi) and
/// phi on [0, 2pi), bilinear in between.
struct RadialObstacle {
    Vec3 center{0.0, 0.0, 0.0};
    int n_theta = 0;
    int n_phi = 0;
    std::vector<double> radius;  // theta-major

    double radius_at(double theta, double phi) const;
};

using ObstacleSpec = std::variant<NoObstacle, SphereObstacle, AxisBoxObstacle, RadialObstacle>;

bool has_boundary(const ObstacleSpec& obstacle);
/// Closed-set membership test.
bool obstacle_contains(const ObstacleSpec& obstacle, const Vec3& p);

enum class SurfaceTag : std::uint8_t { Obstacle, Sigma, Patch };

std::string to_string(SurfaceTag tag);

/// Face rectangle on the boundary of Sigma. `axis`/`side` pick the face
/// (side = -1 for the lo face); `lo`/`hi` bound the two tangential
/// coordinates in increasing axis order.
struct PatchRect {
    int axis = 0;
    int side = 1;
    std::array<double, 2> lo{0.0, 0.0};
    std::array<double, 2> hi{0.0, 0.0};
    bool full_face = false;
};

/// Quadrature on a closed or partial surface. Normals point out of Q (into
/// the obstacle on its boundary, out of Sigma on the outer boundary).
///
/// Continuum meshes carry geometric nodes and weights. Staggered meshes are
/// the exact summation-by-parts boundary of the grid region: each node is a
/// link between an `inner` grid node (inside Q) and an `outer` grid node
/// (across the face); on the obstacle the node sits on the Dirichlet node.
struct BoundaryMesh {
    enum class Rule : std::uint8_t { Continuum, Staggered };

    Rule rule = Rule::Continuum;
    double spacing = 0.0;
    std::vector<Vec3> points;
    std::vector<Vec3> normals;
    std::vector<double> weights;
    std::vector<SurfaceTag> tags;
    std::vector<std::size_t> inner;
    std::vector<std::size_t> outer;

    std::size_t size() const { return points.size(); }
    double area() const;
    void append(const BoundaryMesh& other);
    BoundaryMesh select(SurfaceTag tag) const;
};

/// Cell classification; every node belongs to exactly one region.
enum class Region : std::uint8_t { Obstacle, Annulus, Shell, Q0, Exterior, Sponge };

/// Everything needed to build a DomainSpec; boxes are snapped to grid planes.
struct DomainConfig {
    ObstacleSpec obstacle = NoObstacle{};
    Box sigma;
    Box q0;
    Box q1;
    std::vector<PatchRect> patch;
    double h = 0.04;
    /// Gap between Sigma and the inner edge of the sponge layer.
    double margin = 0.16;
    double sponge_width = 0.6;
};

struct DomainSpec {
    ObstacleSpec obstacle;
    Box sigma;
    Box q0;
    Box q1;
    std::vector<PatchRect> patch;
    GridSpec grid;
    Box sim_box;
    double sponge_width = 0.0;
    std::vector<Region> region;
    /// Inclusive node ranges of Sigma per axis.
    std::array<int, 3> sigma_lo{0, 0, 0};
    std::array<int, 3> sigma_hi{0, 0, 0};

    Region region_at(std::size_t n) const { return region[n]; }
    /// Node in Q = Sigma minus K (closed Sigma).
    bool in_q(std::size_t n) const
    {
        const auto r = region[n];
        return r == Region::Annulus || r == Region::Shell || r == Region::Q0;
    }
    bool in_q0(std::size_t n) const { return region[n] == Region::Q0; }
    bool in_obstacle(std::size_t n) const { return region[n] == Region::Obstacle; }
    /// Depth into the sponge layer in [0, 1] (0 outside the layer).
    double sponge_depth(const Vec3& p) const;
};

/// Validates the nested geometry and builds the grid masks.
/// Throws Error(NestingViolation | DisconnectedAnnulus | EmptyPatch |
/// ObstacleTouchesQ0 | ConfigError).
DomainSpec build_domain(const DomainConfig& config);

/// Number of 6-connected components of the node set Sigma \ (K u Q1).
int annulus_components(const DomainSpec& domain);

struct StarShapedResult {
    bool star_shaped = true;
    double min_x_dot_nu = 0.0;
};

/// x . nu(x) > 0 on the obstacle boundary (nu pointing out of K).
StarShapedResult star_shaped_check(const ObstacleSpec& obstacle);

/// Continuum quadrature of an obstacle surface with node spacing <= h.
/// Normals point into the obstacle (out of Q).
BoundaryMesh obstacle_mesh(const ObstacleSpec& obstacle, double h);

/// Continuum quadrature of the obstacle boundary, of the Sigma boundary or
/// of the patch S. Sigma and patch nodes are grid nodes with trapezoid weights.
/// Throws Error(UnresolvedSurface) when a face or patch has fewer than 8 nodes.
BoundaryMesh boundary_mesh(SurfaceTag surface, const DomainSpec& domain);

/// Staggered (summation-by-parts) boundary of the node region Q:
/// obstacle links and Sigma-face links, optionally only the patch links.
BoundaryMesh staggered_mesh(SurfaceTag surface, const DomainSpec& domain);

struct StabilityConstants {
    double tau = 0.0;
    double gamma = 0.0;
    double sigma_c = 0.0;
    double alpha = 0.0;
};

/// Geometric constants for the distinguished axis x3.
StabilityConstants stability_constants(const DomainSpec& domain);

}  // namespace exwave
