#pragma once

#include <functional>
#include <memory>

#include <Eigen/Dense>

#include "bb/generators.hpp"
#include "bb/plant.hpp"

namespace bb {

// Half-width of the excluded strip around s = 0.  The auxiliary fields mu
// and sigma carry a 1/s factor, so inside the strip the metric components
// are assembled from algebraically cancelled limit forms instead; the
// public evaluation entry points refuse the strip outright because lambda
// degenerates there.
inline constexpr double s_tol = 1e-3;

// Exact partial derivatives of the closed-loop metric components.
struct GhatGrad {
    Metric2 d_s;
    Metric2 d_theta;
};

// Everything the downstream modules need at one configuration point.
struct GeometryAt {
    Metric2 ghat;
    double vhat = 0.0;
    Eigen::Vector2d dvhat = Eigen::Vector2d::Zero();
    GhatGrad ghat_grad;
    Eigen::Matrix2d lambda = Eigen::Matrix2d::Zero();
    double mu = 0.0;
    double sigma = 0.0;
    double psi = 0.0;
    double y = 0.0;
};

// Scaling function psi(alpha) = exp(-5 int_0^alpha mu1/mu1').
double psi(double alpha_val, const GeneratorSpec& gen);

// int_0^alpha psi, the quadrature term of the shape coordinate.
double psi_integral(double alpha_val, const GeneratorSpec& gen);

// Shape coordinate y = psi(alpha) s - s0 + int_0^alpha psi.
double y_coord(double s, double theta, const GeneratorSpec& gen, const PlantParams& p);

struct MuSigma {
    double mu = 0.0;
    double sigma = 0.0;
};

// mu = mu1'(alpha)/(5 s alpha'), sigma = mu1(alpha) - mu1'(alpha)/(5s).
// Throws singularity_error inside the excluded strip or at alpha' = 0.
MuSigma mu_sigma(double s, double theta, const GeneratorSpec& gen, const PlantParams& p);

// Full geometry of the selected family member at (s, theta): metric, its
// exact partials, potential and gradient, lambda, and the auxiliary
// scalars.  Throws singularity_error for |s| < s_tol and invariant_error
// if the assembled metric is not invertible.
GeometryAt ghat_at(double s, double theta, const FamilySpec& spec);

struct VhatEval {
    double vhat = 0.0;
    Eigen::Vector2d dvhat = Eigen::Vector2d::Zero();
};

// Shaped potential and its exact gradient.
VhatEval vhat_at(double s, double theta, const FamilySpec& spec);

// Injected dissipation vector field (chat^1, chat^2) with
// chat^2 = k1 s_dot + k2 theta_dot and chat^1 = -alpha' chat^2.
Eigen::Vector2d chat(const State& x, const FamilySpec& spec);

// Numerical residuals of the four matching conditions at one point.
struct MatchingResiduals {
    double r3 = 0.0;
    double r4_V = 0.0;
    double r5_lambda = 0.0;
    double r5_lie = 0.0;
};

MatchingResiduals matching_residuals(double s, double theta, const FamilySpec& spec);

// Same residuals with ghat_11 (and its partials) scaled by `ghat11_factor`
// before use.  A deliberate corruption hook: factors != 1 must make the
// residuals blow up, which the verification command uses as a sensitivity
// check.  Production callers always use factor 1.
MatchingResiduals matching_residuals_with_override(double s, double theta, const FamilySpec& spec,
                                                   double ghat11_factor);

// Residual evaluation against an arbitrary geometry provider, used to test
// the residual machinery itself (e.g. against the trivial self-match where
// the closed-loop data equals the open-loop data).
using GeometryFn = std::function<GeometryAt(double s, double theta)>;
MatchingResiduals matching_residuals_against(double s, double theta, const PlantParams& p,
                                             const GeometryFn& geometry);

// Evaluation entry point for the integrator and energy diagnostics: no
// strip check, so the cancelled limit forms are used for |s| < s_tol.
// `parts` selects optional work; the metric and its partials are always
// produced.  Fields not requested are left at their defaults.
enum GeoParts : unsigned {
    geo_vhat = 1u,    // fill vhat (the gradient dvhat is always filled)
    geo_lambda = 2u,  // fill lambda (requires an invertible metric)
};
GeometryAt geometry_unchecked(double s, double theta, const FamilySpec& spec, unsigned parts = 0);

// Reusable evaluation context.  Construction resolves every quadrature the
// family formulas need into spectral tables over the reachable inclination
// interval; geometry evaluations afterwards are a few microseconds, which
// is what makes dense simulation and basin sweeps affordable.  Immutable
// after construction and safe to share across threads.
class FamilyEvaluator {
  public:
    explicit FamilyEvaluator(const FamilySpec& spec);
    ~FamilyEvaluator();
    FamilyEvaluator(FamilyEvaluator&&) noexcept;
    FamilyEvaluator& operator=(FamilyEvaluator&&) noexcept;
    FamilyEvaluator(const FamilyEvaluator&) = delete;
    FamilyEvaluator& operator=(const FamilyEvaluator&) = delete;

    const FamilySpec& spec() const;

    // Same semantics as geometry_unchecked.
    GeometryAt geometry(double s, double theta, unsigned parts = 0) const;

  private:
    struct Impl;
    std::unique_ptr<const Impl> impl_;
};

}  // namespace bb
