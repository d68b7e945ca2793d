#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace exwave {

using Vec3 = std::array<double, 3>;

inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }
inline Vec3 cross(const Vec3& a, const Vec3& b)
{
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

/// Uniform Cartesian node grid. Node (i,j,k) sits at origin + h*(i,j,k);
/// linear index is x-fastest: (k*ny + j)*nx + i.
struct GridSpec {
    Vec3 origin{0.0, 0.0, 0.0};
    double h = 0.0;
    std::array<int, 3> dims{0, 0, 0};

    std::size_t size() const
    {
        return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    }
    std::size_t index(int i, int j, int k) const
    {
        return (static_cast<std::size_t>(k) * dims[1] + j) * dims[0] + i;
    }
    std::array<int, 3> unravel(std::size_t n) const
    {
        const auto nx = static_cast<std::size_t>(dims[0]);
        const auto ny = static_cast<std::size_t>(dims[1]);
        return {static_cast<int>(n % nx), static_cast<int>((n / nx) % ny),
                static_cast<int>(n / (nx * ny))};
    }
    double coord(int axis, int i) const { return origin[axis] + h * i; }
    Vec3 position(int i, int j, int k) const { return {coord(0, i), coord(1, j), coord(2, k)}; }
    /// Stride of the linear index along an axis.
    std::ptrdiff_t stride(int axis) const
    {
        if (axis == 0) return 1;
        if (axis == 1) return dims[0];
        return static_cast<std::ptrdiff_t>(dims[0]) * dims[1];
    }

    bool operator==(const GridSpec&) const = default;
};

/// Real scalar function sampled on the nodes of a GridSpec.
class ScalarField {
public:
    ScalarField() = default;
    explicit ScalarField(const GridSpec& grid, double fill = 0.0)
        : grid_(grid), data_(grid.size(), fill) {}

    const GridSpec& grid() const { return grid_; }
    std::size_t size() const { return data_.size(); }

    double& operator[](std::size_t n) { return data_[n]; }
    double operator[](std::size_t n) const { return data_[n]; }
    double& at(int i, int j, int k) { return data_[grid_.index(i, j, k)]; }
    double at(int i, int j, int k) const { return data_[grid_.index(i, j, k)]; }

    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }
    void swap(ScalarField& other) noexcept
    {
        std::swap(grid_, other.grid_);
        data_.swap(other.data_);
    }

    double max_abs() const;
    /// Trilinear interpolation; points outside the grid clamp to the boundary cell.
    double interpolate(const Vec3& p) const;

private:
    GridSpec grid_;
    std::vector<double> data_;
};

/// Writes `field` as raw little-endian float64 (x-fastest) to `path` and a
/// JSON sidecar `path.json` with dims, spacing, origin and layout.
void write_field(const std::filesystem::path& path, const ScalarField& field);
ScalarField read_field(const std::filesystem::path& path);

}  // namespace exwave
