#pragma once

#include "exwave/field.hpp"
#include "exwave/geometry.hpp"
#include "exwave/wavesim.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace exwave {

/// Time moments v_k = ((-1)^k / k!) int_0^T t^k u(t, .) dt of a run,
/// trapezoid in time, on the nodes of Sigma padded by two layers.
struct MomentData {
    std::vector<int> orders;
    std::vector<ScalarField> volume;  // parallel to orders
    double t_final = 0.0;
    double dt = 0.0;
    int samples = 0;
    /// Estimated L2 size of int_T^inf t^k u / k! per order (decay extrapolated
    /// from the final window).
    std::vector<double> tail;

    bool has(int k) const;
    const ScalarField& field(int k) const;
    ScalarField& field(int k);
    double tail_of(int k) const;
};

/// Streaming accumulator for volume moments; keeps no history.
class MomentAccumulator : public Recorder {
public:
    MomentAccumulator(const DomainSpec& domain, std::vector<int> orders);

    void observe(const Snapshot& snap) override;
    void finish(const Snapshot& last) override;

    const MomentData& data() const { return data_; }
    MomentData take() { return std::move(data_); }

private:
    const DomainSpec* domain_;
    std::array<int, 3> lo_{};
    std::array<int, 3> hi_{};
    MomentData data_;
    std::vector<double> norm_times_;
    std::vector<double> norms_;
};

/// Scalar moment of a uniformly sampled series starting at t = 0.
double time_moment(int k, std::span<const double> series, double dt);

/// Face traces of one moment order on a boundary mesh.
struct MomentTraces {
    int order = 0;
    BoundaryMesh mesh;
    std::vector<double> value;
    std::vector<double> dnu;  // normal derivative along mesh.normals
};

/// Trace of a grid field on a mesh. Staggered meshes use the face average
/// and the difference across each link (value 0 on obstacle links, where the
/// outer node is Dirichlet). Continuum meshes interpolate trilinearly: a
/// centred normal difference on Sigma and Patch, and on the obstacle the
/// value 0 with a one-sided second-order difference from the Q side.
MomentTraces sample_traces(const ScalarField& field, const BoundaryMesh& mesh, int order = 0);

/// Records the moments of the trace pair (u, d_nu u) on a staggered mesh.
/// Optionally accumulates unit-amplitude i.i.d. Gaussian noise, drawn per
/// recorded time sample and per trace component, so that traces at any noise
/// level eps are formed afterwards as clean + eps * max|component| * noise.
class TraceMomentRecorder : public Recorder {
public:
    TraceMomentRecorder(BoundaryMesh mesh, std::vector<int> orders, std::optional<std::uint64_t> noise_seed = {});

    void observe(const Snapshot& snap) override;
    void finish(const Snapshot& last) override;

    /// Traces of order k with additive noise at level eps.
    MomentTraces traces(int k, double noise_eps = 0.0) const;
    double max_abs_value() const { return max_value_; }
    double max_abs_flux() const { return max_flux_; }
    const BoundaryMesh& mesh() const { return mesh_; }

private:
    struct Channel {
        std::vector<double> value;
        std::vector<double> dnu;
    };
    std::size_t slot(int k) const;
    void accumulate(const Snapshot& snap, double weight);

    BoundaryMesh mesh_;
    std::vector<int> orders_;
    std::vector<Channel> clean_;  // per order
    std::vector<Channel> noise_;
    bool noisy_ = false;
    std::mt19937_64 rng_;
    Channel draw_;
    double max_value_ = 0.0;
    double max_flux_ = 0.0;
};

enum class ResidualStencil : std::uint8_t {
    /// The stepper's seven-point Laplacian (discrete Poisson chain).
    SecondOrder,
    /// Fourth-order 13-point Laplacian (consistency with the continuum chain).
    FourthOrder,
};

enum class ResidualRegion : std::uint8_t { Q, Q0 };

struct PoissonResidualReport {
    std::vector<int> orders;
    std::vector<double> residual;  // relative unless absolute[k]
    std::vector<bool> absolute;
    double h = 0.0;
    ResidualRegion region = ResidualRegion::Q;
    ResidualStencil stencil = ResidualStencil::SecondOrder;
    std::size_t nodes = 0;

    double of(int k) const;
};

/// Residuals of -Lap v0 = c^-2 g, -Lap v1 = c^-2 f, -Lap vk = -c^-2 v(k-2)
/// on the region eroded by two nodes. Reports the absolute residual where the
/// right-hand side vanishes.
PoissonResidualReport poisson_residual(const MomentData& moments, const InitialData& data,
                                       const SpeedField& speed, const DomainSpec& domain,
                                       ResidualRegion region = ResidualRegion::Q,
                                       ResidualStencil stencil = ResidualStencil::SecondOrder);

/// Compares the trapezoid Laplace transform of recorded point series with the
/// truncated moment series sum_k v_k z^k; returns ||direct - series|| / ||direct||.
/// `moments[k][p]` holds v_k at probe p; `series[m][p]` holds u(t_m) at probe p.
double laplace_consistency(const std::vector<std::vector<double>>& moments,
                           const std::vector<std::vector<double>>& series, double dt, double z);

/// Records u at a fixed set of grid nodes every step.
class PointSeriesRecorder : public Recorder {
public:
    explicit PointSeriesRecorder(std::vector<std::size_t> nodes) : nodes_(std::move(nodes)) {}
    void observe(const Snapshot& snap) override;
    const std::vector<std::vector<double>>& series() const { return series_; }
    double dt() const { return dt_; }

private:
    std::vector<std::size_t> nodes_;
    std::vector<std::vector<double>> series_;
    double dt_ = 0.0;
};

/// w_k = v_k(A) - v_k(B). Throws Error(ConfigMismatch) unless grid, dt,
/// orders and sample count agree.
MomentData difference_moments(const MomentData& a, const MomentData& b);

}  // namespace exwave
