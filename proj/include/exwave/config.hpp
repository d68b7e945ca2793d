#pragma once

#include "exwave/geometry.hpp"
#include "exwave/wavesim.hpp"

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

namespace exwave {

/// Scalar initial datum on Q0.
struct DataSpec {
    enum class Kind : std::uint8_t { None, Separated, Radial };
    enum class Transverse : std::uint8_t { Gaussian, Plateau, Constant };

    Kind kind = Kind::None;
    double amplitude = 1.0;

    // Separated: amplitude * G(x') * w(x3).
    Transverse transverse = Transverse::Gaussian;
    std::array<double, 2> center2{0.0, 0.0};
    double sigma = 0.15;
    /// Plateau G = 1 where max(|x - cx|, |y - cy|) <= inner, 0 beyond outer (C2 smoothstep).
    double inner = 0.3;
    double outer = 0.55;
    AxialProfile axial;
    /// Axial support taken from Q0 when unset.
    bool axial_from_q0 = true;

    // Radial: amplitude * (1 + tilt . (x - center)) * (1 - |x - center|^2 / radius^2)^power.
    Vec3 center{0.0, 0.0, 0.0};
    double radius = 0.24;
    int power = 6;
    Vec3 tilt{0.0, 0.0, 0.0};
};

struct DataPair {
    DataSpec f;
    DataSpec g;
};

/// Sound speed: uniform, an x3-independent transverse contrast, or a spherical pocket.
struct SpeedSpec {
    enum class Kind : std::uint8_t { Uniform, Contrast, Pocket };
    Kind kind = Kind::Uniform;
    /// Contrast: c = 1 + amplitude * (1 - r'^2 / radius^2)^3 * T(|x3|), with T = 1
    /// for |x3| <= axial_half and a C2 smoothstep to 0 over `taper`.
    /// Pocket: c = 1 - amplitude * (1 - |x - center|^2 / radius^2)^3.
    double amplitude = 0.0;
    double radius = 0.3;
    Vec3 center{0.0, 0.0, 0.0};
    double axial_half = 0.2;
    double taper = 0.1;
    /// Background radius rho0 of the admissible class.
    double rho0 = 1.5;

    double c0() const;
    double c1() const;
    double operator()(const Vec3& x) const;
};

struct SimSpec {
    double t_max = 10.0;
    double cfl = 0.5;
    /// dt = dt_factor * cfl * h / (sqrt(3) * c1), with c1 the largest speed of the experiment.
    double dt_factor = 1.0;
    bool sponge = true;
    double sponge_max = 30.0;
    int sponge_power = 2;
    bool enforce_cfl = true;
    int workers = 1;
};

struct ReconSpec {
    std::vector<double> rho_list{2, 4, 6, 8, 10, 12, 14, 16, 18, 20, 22, 24, 26, 28};
    /// -1 or +1 picks the probe sign; 0 averages both.
    int sign = -1;
    AxialProfile::Kind profile = AxialProfile::Kind::Bump;
    std::vector<double> noise_eps{0.0};
    std::uint64_t seed = 1234;
    bool partial = false;
    double half_width = 0.6;
    /// Truncation radius for single reconstructions; <= 0 picks the noiseless minimizer over rho_list.
    double rho = 0.0;
    /// Contrast threshold m on the reference datum.
    double threshold = 0.9;
    /// Cauchy extension regularization (<= 0 selects the L-curve corner).
    double lambda = 0.0;
};

struct DecaySpec {
    bool control = true;
    /// Fit window; defaults to [t_clear, t_clear + span].
    std::optional<double> fit_begin;
    std::optional<double> fit_end;
    double span = 4.0;
};

struct ExperimentConfig {
    std::string name = "experiment";
    std::filesystem::path output_dir = "out";
    DomainConfig domain;
    SpeedSpec speed;
    /// Reference speed c~ (speed contrast experiments).
    SpeedSpec reference_speed;
    DataPair data;
    /// Reference data (f~, g~); zero by default.
    DataPair reference;
    SimSpec sim;
    ReconSpec recon;
    DecaySpec decay;
};

/// Parses a TOML document. Throws Error(ConfigError) on syntax errors, unknown
/// enumerators or missing required keys.
ExperimentConfig parse_config(const std::string& text);
/// Throws Error(ConfigError) when the file cannot be read.
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical JSON form of a parsed configuration (fixed key order).
nlohmann::json canonical_json(const ExperimentConfig& config);
/// FNV-1a 64 hash of the canonical JSON dump, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);
std::string fnv1a_hex(const std::string& text);

/// Grid samples of a datum; zero outside Q0.
ScalarField assemble_data(const DataSpec& spec, const DomainSpec& domain);
InitialData assemble_pair(const DataPair& pair, const DomainSpec& domain);
/// Separated datum for recovery (requires Kind::Separated).
SeparatedData separated_of(const DataSpec& spec, const DomainSpec& domain);

SpeedField sample_speed(const SpeedSpec& spec, const GridSpec& grid);
/// Simulator options with the shared time step of the experiment.
SimOptions sim_options(const ExperimentConfig& config, double c1);

/// C2 smoothstep from 1 at r <= a to 0 at r >= b.
double smooth_cutoff(double r, double a, double b);

}  // namespace exwave
