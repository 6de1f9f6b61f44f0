#pragma once

#include <array>
#include <complex>
#include <vector>

#include "bb/sim.hpp"

namespace bb {

// The six local stability tests at the equilibrium (s0, 0): determinant and
// trace positivity of the closed-loop metric, of the lowered linearized
// dissipation, and of the shaped-potential Hessian.
struct StabilityReport {
    Eigen::Matrix2d ghat0 = Eigen::Matrix2d::Zero();
    Eigen::Matrix2d ghatchat0 = Eigen::Matrix2d::Zero();
    Eigen::Matrix2d d2vhat0 = Eigen::Matrix2d::Zero();

    double det_ghat = 0.0;
    double tr_ghat = 0.0;
    double det_ghatchat = 0.0;
    double tr_ghatchat = 0.0;
    double det_d2vhat = 0.0;
    double tr_d2vhat = 0.0;

    bool ok_det_ghat = false;
    bool ok_tr_ghat = false;
    bool ok_det_ghatchat = false;
    bool ok_tr_ghatchat = false;
    bool ok_det_d2vhat = false;
    bool ok_tr_d2vhat = false;

    bool overall = false;
    // The tests cannot be evaluated when s0 sits inside the excluded strip;
    // reported rather than thrown.
    bool equilibrium_singular = false;
};

// Evaluates the six tests on explicitly supplied matrices.  The dissipation
// matrix is rank-deficient by construction for this family, so its
// determinant test accepts values down to a roundoff-scaled slack below
// zero while the remaining five tests are strict.
StabilityReport stability_from_matrices(const Eigen::Matrix2d& ghat0, const Eigen::Matrix2d& ghatchat0,
                                        const Eigen::Matrix2d& d2vhat0);

// Assembles the three matrices for a family member and runs the tests.
StabilityReport stability_conditions(const FamilySpec& spec);

struct LinearizationResult {
    Eigen::Matrix4d A = Eigen::Matrix4d::Zero();
    std::array<std::complex<double>, 4> poles{};
    LinearGains gains_equivalent;
    // max |p(pole)| over the four poles, with p the characteristic
    // polynomial from a Faddeev-LeVerrier pass; an independent consistency
    // check on the eigensolver.
    double charpoly_residual_max = 0.0;
};

// Jacobian of the closed-loop vector field at the equilibrium (s0, 0, 0, 0)
// by scaled central differences, its eigenvalues, and the equivalent linear
// gains read off the torque gradient.  Throws non_equilibrium_error when
// the law does not hold the equilibrium.
LinearizationResult linearize(const FamilySpec& spec, const Law& law);

// Monic characteristic polynomial coefficients of a 4x4 matrix,
// {c0, c1, c2, c3} with p(s) = s^4 + c3 s^3 + c2 s^2 + c1 s + c0.
std::array<double, 4> charpoly_coeffs(const Eigen::Matrix4d& A);

struct FitInfo {
    int iterations = 0;
    double residual = 0.0;
};

// Solves for the four free scalars (mu1'(0), w''(0), k1, k2) of a family
// member whose linearization reproduces the target feedback gains; h(0)
// stays pinned by the template.  Throws fit_error on non-convergence.
FamilySpec fit_linear_gains(const LinearGains& target, const FamilySpec& spec_template,
                            FitInfo* info = nullptr);

// Inclusive uniform range; n = 1 collapses to lo.
struct GridRange {
    double lo = 0.0;
    double hi = 0.0;
    int n = 1;

    double at(int i) const { return n <= 1 ? lo : lo + (hi - lo) * i / (n - 1); }
};

struct BasinGrid {
    GridRange s;
    GridRange theta;
    GridRange s_dot;
    GridRange theta_dot;
};

struct BasinPoint {
    State x0;
    Termination termination = Termination::completed;
    double final_dist = 0.0;
    bool captured = false;
};

struct BasinResult {
    double fraction = 0.0;
    std::vector<BasinPoint> points;
};

// Simulates every grid point and reports the fraction that ends within
// capture_radius of the equilibrium at t_final.  Points are distributed
// over `threads` workers (0 picks a hardware-based default) and merged by
// grid index, so the result is independent of scheduling.
BasinResult basin_estimate(const FamilySpec& spec, const Law& law, const BasinGrid& grid,
                           const SimConfig& cfg, double capture_radius, int threads = 0);

}  // namespace bb
