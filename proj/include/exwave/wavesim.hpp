#pragma once

#include "exwave/field.hpp"
#include "exwave/geometry.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace exwave {

/// Sound speed on the grid with the bounds of the admissible class:
/// c0 <= c <= c1 and c == 1 outside the ball of radius rho0.
struct SpeedField {
    ScalarField values;
    double c0 = 1.0;
    double c1 = 1.0;
    double rho0 = 0.0;

    static SpeedField uniform(const GridSpec& grid);
    /// Samples `c` and validates it against the class bounds.
    /// Throws Error(ConfigError) when a node violates them.
    static SpeedField sample(const GridSpec& grid, const std::function<double(const Vec3&)>& c, double c0,
                             double c1, double rho0);
    double max_speed() const;
};

/// Nonnegative profile in x3 supported on [a, b].
struct AxialProfile {
    enum class Kind : std::uint8_t { Bump, Indicator };
    Kind kind = Kind::Bump;
    double a = 0.0;
    double b = 1.0;

    double operator()(double x3) const;
};

/// x'-plane sampling of a separated profile (nodes of P).
struct PlaneField {
    double x0 = 0.0;
    double y0 = 0.0;
    double h = 0.0;
    int nx = 0;
    int ny = 0;
    std::vector<double> values;  // x-fastest

    double x(int i) const { return x0 + h * i; }
    double y(int j) const { return y0 + h * j; }
    double& at(int i, int j) { return values[static_cast<std::size_t>(j) * nx + i]; }
    double at(int i, int j) const { return values[static_cast<std::size_t>(j) * nx + i]; }
};

/// Separated datum G(x') w(x3) restricted to Q0.
struct SeparatedData {
    std::function<double(double, double)> transverse;
    AxialProfile axial;

    ScalarField assemble(const DomainSpec& domain) const;
    PlaneField transverse_samples(const DomainSpec& domain) const;
};

struct InitialData {
    ScalarField f;
    ScalarField g;
    /// A priori bound on ||f||_H2 + ||g||_H1; 0 when undeclared.
    double theta = 0.0;

    static InitialData zero(const GridSpec& grid);
};

/// Discrete ||f||_{H^2(Omega)} + ||g||_{H^1(Omega)} on the whole grid.
double data_norm(const InitialData& data);

struct WaveState {
    ScalarField u_prev;
    ScalarField u_curr;
    int step = 0;
    double t = 0.0;
    double dt = 0.0;
};

struct SimOptions {
    /// dt = cfl * h / (sqrt(3) * c1) unless `dt` is set explicitly.
    double cfl = 0.5;
    double dt = 0.0;
    bool sponge = true;
    /// Peak damping rate of the polynomial sponge ramp.
    double sponge_max = 30.0;
    int sponge_power = 2;
    bool enforce_cfl = true;
    int workers = 1;
};

/// One time sample handed to recorders; `u_prev` is null for the initial sample.
struct Snapshot {
    int step = 0;
    double t = 0.0;
    double dt = 0.0;
    const ScalarField* u = nullptr;
    const ScalarField* u_prev = nullptr;
};

class Recorder {
public:
    virtual ~Recorder() = default;
    virtual void observe(const Snapshot& snap) = 0;
    /// Called once with the final sample after the last observe().
    virtual void finish(const Snapshot& /*last*/) {}
};

struct RunSummary {
    int steps = 0;
    double t_final = 0.0;
    double dt = 0.0;
};

/// Leapfrog stepper for u_tt = c^2 Lap_h u with Dirichlet obstacle nodes,
/// Dirichlet outer faces and a polynomial sponge layer outside Sigma.
class Simulator {
public:
    Simulator(const DomainSpec& domain, const SpeedField& speed, const SimOptions& options = {});

    const DomainSpec& domain() const { return *domain_; }
    const SpeedField& speed() const { return *speed_; }
    double dt() const { return dt_; }
    double sponge_rate(std::size_t n) const { return damping_.empty() ? 0.0 : damping_[n]; }

    /// State at step 1: u_prev = f, u_curr = f + dt g + dt^2/2 c^2 Lap_h f.
    /// Throws Error(CflViolation | SupportViolation).
    WaveState init_state(const InitialData& data) const;

    /// Advances one step. Throws Error(NumericalBlowup).
    void step(WaveState& state) const;

    /// Runs to `t_final`, feeding every time sample (including t = 0) to the recorders.
    RunSummary run(const InitialData& data, double t_final, std::span<Recorder* const> recorders) const;

    /// Blowup threshold relative to the initial amplitude.
    static constexpr double kBlowupFactor = 1e6;

private:
    const DomainSpec* domain_;
    const SpeedField* speed_;
    SimOptions options_;
    double dt_ = 0.0;
    std::vector<std::uint8_t> kind_;  // 0 fixed zero, 1 free, 2 damped
    std::vector<double> lambda_;      // c^2 dt^2 / h^2
    std::vector<double> damping_;     // sponge rate s(x)
    mutable double blowup_reference_ = 0.0;
};

/// Runs two simulations in lockstep and feeds recorders the difference
/// u_a - u_b. Both simulators must share grid and dt (Error(ConfigMismatch)).
RunSummary run_difference(const Simulator& sim_a, const InitialData& data_a, const Simulator& sim_b,
                          const InitialData& data_b, double t_final, std::span<Recorder* const> recorders);

/// Seven-point Laplacian at an interior node.
double laplacian_at(const ScalarField& u, std::size_t n);

/// Sum over the grid of c^{-2} D_t u^2 + grad_+ u^m . grad_+ u^{m-1}: the
/// quantity conserved exactly by the undamped leapfrog scheme.
double conserved_energy(const ScalarField& u_prev, const ScalarField& u, double dt, const SpeedField& speed);

/// Local energy over Q at t_{m-1/2}: int_Q |grad_h u|^2 + |D_t u|^2 with
/// trapezoid weights over Sigma and link differences.
double local_energy(const ScalarField& u_prev, const ScalarField& u, double dt, const DomainSpec& domain);

struct EnergySeries {
    std::vector<double> times;
    std::vector<double> energy;
    /// Optional ||u||_H2 + ||u_t||_H1 + ||u_tt||_L2 over Q (empty unless requested).
    std::vector<double> triple_times;
    std::vector<double> triple;
};

class EnergyRecorder : public Recorder {
public:
    explicit EnergyRecorder(const DomainSpec& domain, int triple_stride = 0)
        : domain_(&domain), triple_stride_(triple_stride) {}
    void observe(const Snapshot& snap) override;
    const EnergySeries& series() const { return series_; }

private:
    const DomainSpec* domain_;
    int triple_stride_;
    ScalarField older_;
    bool have_older_ = false;
    EnergySeries series_;
};

/// Discrete H^2 + H^1 + L^2 triple over Q at time level m from three levels.
double norm_triple(const ScalarField& u_prev, const ScalarField& u, const ScalarField& u_next, double dt,
                   const DomainSpec& domain);

struct FitWindow {
    double t_begin = 0.0;
    double t_end = 0.0;
};

struct DecayFit {
    double kappa = 0.0;
    double delta = 0.0;
    FitWindow window;
    double r_squared = 0.0;
    int samples = 0;
};

/// Least-squares fit log E = log kappa - delta t over the window; samples
/// below 1e-14 E(0) are dropped. Throws Error(WindowTooShort | NonPositiveEnergy).
DecayFit fit_decay(const EnergySeries& series, const FitWindow& window);

}  // namespace exwave
