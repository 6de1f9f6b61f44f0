#pragma once

#include "bb/family.hpp"

namespace bb {

// The matching control torque split into its three additive pieces: the
// quadratic-velocity (gyroscopic) part, the potential-shaping part, and the
// dissipation part.
struct ControlBreakdown {
    double u_g = 0.0;
    double u_V = 0.0;
    double u_c = 0.0;
    double u_total = 0.0;
};

// Christoffel symbols of the second kind: v[k][i][j] = Gamma^k_ij.
struct Christoffel2 {
    double v[2][2][2]{};

    // Contracts Gamma^k_ij q^i q^j into the quadratic-velocity acceleration.
    Eigen::Vector2d contract(const Eigen::Vector2d& q) const {
        Eigen::Vector2d out;
        for (int k = 0; k < 2; ++k) {
            double acc = 0.0;
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) acc += v[k][i][j] * q(i) * q(j);
            out(k) = acc;
        }
        return out;
    }
};

// Raises the last index of first-kind symbols through the metric.
Christoffel2 christoffel_second(const Metric2& m, const Christoffel1& first);

// Second-kind symbols of the closed-loop metric, from its exact partials.
// Throws singularity_error inside the excluded strip.
Christoffel2 christoffel_ghat(double s, double theta, const FamilySpec& spec);

// The nonlinear matching control law.  Throws singularity_error inside the
// excluded strip or when the closed-loop metric degenerates.
ControlBreakdown control(const State& x, const FamilySpec& spec);

// Same computation from an already-evaluated geometry (saves the repeated
// quadratures on the integrator's hot path).
ControlBreakdown control_from_geometry(const State& x, const GeometryAt& geo, const FamilySpec& spec);

// Constant-plus-linear state feedback around the equilibrium (s0, 0, 0, 0).
struct LinearGains {
    double a8 = 0.0;   // feedforward at the equilibrium
    double Kbp = 0.0;  // ball position
    double Kap = 0.0;  // beam angle
    double Kbd = 0.0;  // ball velocity
    double Kad = 0.0;  // beam rate
};

// u = a8 + Kbp (s - s0) + Kap theta + Kbd s_dot + Kad theta_dot, reported
// with the position terms as u_V and the velocity terms as u_c.
ControlBreakdown linear_control(const State& x, const LinearGains& k, double s0);

}  // namespace bb
