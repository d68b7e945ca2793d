#pragma once

#include "exwave/config.hpp"
#include "exwave/geometry.hpp"
#include "exwave/moments.hpp"
#include "exwave/reconstruct.hpp"
#include "exwave/wavesim.hpp"

#include <array>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <vector>

namespace exwave {

/// Boundary traces of one time sample: value, gradient and normal flux on the
/// patch S, normal flux on the boundary of Q and value on the boundary of Sigma.
struct TraceFrame {
    double t = 0.0;
    std::vector<double> s_value;
    std::vector<Vec3> s_grad;
    std::vector<double> s_dnu;
    std::vector<double> q_dnu;
    std::vector<double> sigma_value;
};

/// Uniformly sampled trace history with the spatial quadrature weights of each surface.
struct TraceSeries {
    double dt = 0.0;
    std::vector<double> s_weights;
    std::vector<double> q_weights;
    std::vector<double> sigma_weights;
    std::vector<TraceFrame> frames;
};

/// Spatial norms of one frame; the integrands of the data norms.
struct NormSample {
    double t = 0.0;
    double s_value_l2 = 0.0;
    double s_grad_l2 = 0.0;
    double s_dnu_l2 = 0.0;
    double q_dnu_l1 = 0.0;
    double sigma_value_l1 = 0.0;
};

struct DataNorms {
    /// sum_j int t^j (||u||_L2(S) + ||grad u||_L2(S)) dt
    double n = 0.0;
    /// int ||d_nu u||_L1(boundary of Q) dt + int ||u||_L1(boundary of Sigma) dt
    double n0 = 0.0;
    /// sum_j int t^j ||d_nu u||_L2(S) dt
    double n_tilde = 0.0;
    /// Parts indexed by the weight power j.
    std::array<double, 2> value_part{0.0, 0.0};
    std::array<double, 2> grad_part{0.0, 0.0};
    std::array<double, 2> dnu_part{0.0, 0.0};
    double n0_flux = 0.0;
    double n0_value = 0.0;

    nlohmann::json to_json() const;
};

NormSample norm_sample(const TraceSeries& series, const TraceFrame& frame);
/// Trapezoid integration of per-frame norms with weights t^j (uniform dt).
DataNorms integrate_norms(std::span<const NormSample> samples, double dt);
DataNorms data_norms(const TraceSeries& series);
/// Frame-wise difference a - b. Throws Error(ConfigMismatch) on shape or dt mismatch.
TraceSeries subtract(const TraceSeries& a, const TraceSeries& b);

/// Reads trace frames from grid fields on the staggered meshes of a domain.
class TraceSampler {
public:
    explicit TraceSampler(const DomainSpec& domain);

    TraceFrame sample(const ScalarField& u, double t) const;
    TraceSeries empty_series(double dt) const;
    const BoundaryMesh& patch() const { return patch_; }
    const BoundaryMesh& q_boundary() const { return q_boundary_; }
    const BoundaryMesh& sigma_boundary() const { return sigma_boundary_; }

private:
    BoundaryMesh patch_;
    BoundaryMesh q_boundary_;
    BoundaryMesh sigma_boundary_;
};

/// Streams per-frame norms of a run.
class NormRecorder : public Recorder {
public:
    explicit NormRecorder(const DomainSpec& domain) : sampler_(domain) {}
    void observe(const Snapshot& snap) override;
    DataNorms norms() const { return integrate_norms(samples_, dt_); }
    const std::vector<NormSample>& samples() const { return samples_; }

private:
    TraceSampler sampler_;
    TraceSeries scratch_;
    std::vector<NormSample> samples_;
    double dt_ = 0.0;
};

/// Keeps every trace frame of a run.
class TraceSeriesRecorder : public Recorder {
public:
    explicit TraceSeriesRecorder(const DomainSpec& domain) : sampler_(domain) {}
    void observe(const Snapshot& snap) override;
    const TraceSeries& series() const { return series_; }

private:
    TraceSampler sampler_;
    TraceSeries series_;
};

/// Longest travel time from Q0 to Sigma at the slowest speed c0.
double clearing_time(const DomainSpec& domain, double c0);

/// Relative allowance on the clearing time for the slower discrete group
/// velocity of the leapfrog scheme at the resolved wavelengths.
inline constexpr double kGroupLag = 0.15;

/// Report bundle: every experiment writes report.json (deterministic) and
/// timing.json (runtimes) plus experiment-specific CSV and field dumps.
struct ExperimentOutput {
    nlohmann::json report;
    nlohmann::json timing;
    std::vector<std::filesystem::path> files;
};

/// Shared header: experiment name, config hash, canonical config, stability constants, grid.
nlohmann::json report_header(const ExperimentConfig& config, const DomainSpec& domain, const std::string& experiment);

/// Throws Error(NumericalBlowup) if any number in `j` is not finite.
void require_finite(const nlohmann::json& j, const std::string& where = "report");

/// CSV with 17 significant digits.
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);
/// Plane field dump in the binary field format (nz = 1).
void write_plane(const std::filesystem::path& path, const PlaneField& plane);

nlohmann::json check_domain(const ExperimentConfig& config);
ExperimentOutput experiment_simulate(const ExperimentConfig& config, const std::filesystem::path& out);
ExperimentOutput experiment_moments(const ExperimentConfig& config, const std::filesystem::path& out);
ExperimentOutput experiment_decay(const ExperimentConfig& config, const std::filesystem::path& out);

enum class ReconstructionMode : std::uint8_t {
    /// One reconstruction at recon.rho for every noise level.
    Single,
    /// Error over rho_list at the first noise level.
    SweepRho,
    /// Error over rho_list for every noise level with rho*(eps).
    SweepNoise,
    /// Full pipeline: g and f differences, data norms, error tables.
    EndToEnd,
};

ExperimentOutput experiment_reconstruct(const ExperimentConfig& config, const std::filesystem::path& out,
                                        ReconstructionMode mode);
ExperimentOutput experiment_end_to_end(const ExperimentConfig& config, const std::filesystem::path& out);
ExperimentOutput experiment_speed(const ExperimentConfig& config, const std::filesystem::path& out);

/// Error-vs-rho table summary: minimizer, minimum and U-shape flags.
struct TradeoffSummary {
    double rho_star = 0.0;
    double min_error = 0.0;
    /// Strictly decreasing before the minimizer within `slack`, nondecreasing after.
    bool decreasing_then_increasing = false;
    /// Minimizer interior to the rho range.
    bool interior_minimum = false;
};

TradeoffSummary summarize_tradeoff(std::span<const double> rho, std::span<const double> error, double slack = 0.0);

/// Command-line entry point; returns the process exit code (0, 2 or 3).
int run_cli(int argc, const char* const* argv);

}  // namespace exwave
