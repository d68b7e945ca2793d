#pragma once

#include "exwave/geometry.hpp"
#include "exwave/moments.hpp"
#include "exwave/wavesim.hpp"

#include <array>
#include <complex>
#include <functional>
#include <optional>
#include <vector>

namespace exwave {

using Complex = std::complex<double>;

/// Harmonic probe phi(x) = exp(-i x'.eta') exp(zeta x3). Continuum probes
/// take zeta = sign |eta'|; grid probes take the root of
/// cosh(zeta h) = 3 - cos(eta1 h) - cos(eta2 h), which makes phi an exact
/// null vector of the seven-point Laplacian with spacing h.
struct FrequencySample {
    double eta1 = 0.0;
    double eta2 = 0.0;
    double zeta = 0.0;
    int sign = -1;
    /// Grid spacing for discrete-harmonic probes, 0 for continuum probes.
    double h = 0.0;

    Complex phi(const Vec3& x) const;
    std::array<Complex, 3> grad(const Vec3& x) const;
    /// xi . xi for xi = (eta', 0) + i (0, 0, zeta); zero for continuum probes.
    double xi_dot_xi() const { return eta1 * eta1 + eta2 * eta2 - zeta * zeta; }
    double eta_norm() const { return std::hypot(eta1, eta2); }
};

FrequencySample make_probe(double eta1, double eta2, int sign = -1);
FrequencySample make_grid_probe(double eta1, double eta2, int sign, double h);
/// Positive root zeta_h of cosh(zeta h) = 3 - cos(eta1 h) - cos(eta2 h).
double discrete_zeta(double eta1, double eta2, double h);

/// Boundary pairing B = -sum dnu(w) phi + sum w dnu(phi) over the full
/// boundary of Q. Continuum meshes use their quadrature weights; staggered
/// meshes use the summation-by-parts link form (face averages and link
/// differences of phi), which reproduces sum_Q h^3 (-Lap_h w) phi exactly
/// for discrete-harmonic probes. Throws Error(MissingTrace) when the traces
/// contain patch-only data or no Sigma data.
Complex green_integral(const MomentTraces& traces, const FrequencySample& probe);

/// M(zeta) = int w(x3) exp(zeta x3) dx3 (64-point Gauss; closed form for the indicator).
double axial_weight(const AxialProfile& profile, double zeta, int points = 64);

struct FourierRecovery {
    double d_eta = 0.0;
    int n = 0;  // samples eta_i = i d_eta, i in [-n, n] on both axes
    int sign = -1;
    bool grid_probes = true;
    std::vector<double> eta1;
    std::vector<double> eta2;
    std::vector<double> zeta;
    std::vector<double> weight;  // M(zeta)
    std::vector<Complex> values;

    std::size_t side() const { return static_cast<std::size_t>(2 * n + 1); }
    std::size_t index(int i, int j) const { return static_cast<std::size_t>(j + n) * side() + static_cast<std::size_t>(i + n); }
    double max_eta() const { return n * d_eta; }
};

struct FourierOptions {
    double rho_max = 12.0;
    /// Half-width L of the x' reconstruction window; d_eta = pi / (2 L).
    double half_width = 0.5;
    int sign = -1;
    /// Discrete-harmonic probes for staggered traces (continuum probes otherwise).
    bool grid_probes = true;
    int workers = 1;
};

/// F_rec(eta') = B(eta') / M(zeta) on the Cartesian eta' grid.
FourierRecovery recover_fourier(const MomentTraces& traces, const AxialProfile& profile,
                                const FourierOptions& options);

/// Average of the two sign choices.
FourierRecovery average_signs(const FourierRecovery& plus, const FourierRecovery& minus);

struct ReconstructionResult {
    PlaneField g;
    double rho = 0.0;
    double noise_eps = 0.0;
    /// Relative L2 error against the declared truth (negative when none).
    double rel_error = -1.0;
    double max_imag = 0.0;
};

/// G_rho(x') = (2 pi)^-2 sum_{|eta'| <= rho} F_rec e^{i x'.eta'} d_eta^2 on the
/// nodes of `window`. Throws Error(RhoOutOfRange) when rho exceeds the sampled range.
ReconstructionResult truncated_inversion(const FourierRecovery& fourier, double rho, const PlaneField& window,
                                         const PlaneField* truth = nullptr);

/// Relative L2 distance between two plane fields on the same nodes.
double relative_l2(const PlaneField& a, const PlaneField& b);

struct ContrastChannel {
    /// Recovered transverse q = ref (c^-2 - c_ref^-2).
    PlaneField q;
    /// Transverse profile of the reference datum (g for order 0, f for order 1).
    PlaneField reference;
    /// Mask nodes (x-fastest) on the plane grid.
    std::vector<bool> mask;
};

struct SpeedContrast {
    PlaneField c_diff;      // c - c_ref
    PlaneField inv_sq_diff; // c^-2 - c_ref^-2
    std::vector<bool> mask;
    double m = 0.0;
    /// Relative L2 errors on the mask against the declared truth (negative when none).
    double rel_error_c = -1.0;
    double rel_error_inv_sq = -1.0;
    double norm_c = 0.0;
    double norm_inv_sq = 0.0;
};

/// Contrast (c^-2 - c_ref^-2) = q / ref on the union of the channel masks,
/// converted to c - c_ref with c_ref known. Throws Error(EmptyMask) for an
/// empty union and Error(ThresholdViolation) if a mask node has |ref| < m.
SpeedContrast recover_speed_contrast(const std::vector<ContrastChannel>& channels,
                                     const std::function<double(double, double)>& c_ref, double m,
                                     const std::function<double(double, double)>* c_truth = nullptr);

struct CauchyOptions {
    double lambda = 0.0;
    /// lambda <= 0 selects the L-curve corner over a log grid.
    int lcurve_points = 41;
    double lambda_min = 1e-14;
    double lambda_max = 1e0;
    /// Source surfaces: spheres about the Q1 centre (inner) and about the Sigma centre (outer).
    int sources_inner = 150;
    int sources_outer = 150;
    double inner_radius_factor = 0.6;
    double outer_radius_factor = 1.6;
    double max_condition = 1e18;
};

struct CauchyExtension {
    MomentTraces completed;  // traces on the obstacle and Sigma meshes
    double lambda = 0.0;
    double condition = 0.0;
    double residual = 0.0;
    double solution_norm = 0.0;
    std::vector<double> lcurve_lambda;
    std::vector<double> lcurve_residual;
    std::vector<double> lcurve_norm;
};

/// Fits sum_j a_j / |x - y_j| to the Cauchy data on the patch with Tikhonov
/// regularization and evaluates value and normal flux on `targets`.
/// Throws Error(InsufficientPatch) for fewer than 50 patch points and
/// Error(IllConditioned) when the regularized system exceeds max_condition.
CauchyExtension cauchy_extend(const MomentTraces& patch, const BoundaryMesh& targets, const DomainSpec& domain,
                              const CauchyOptions& options = {});

}  // namespace exwave
