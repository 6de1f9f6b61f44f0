#pragma once

#include <Eigen/Dense>

#include "bb/errors.hpp"

namespace bb {

// Physical constants of the ball-and-beam rig, nondimensionalized.  a3/a4
// are the inertia coefficients of the beam metric, a5/a6 the potential
// offsets, a7 the viscous friction at the motor joint, rho the ratio of
// lever arm to beam length, s_max the half-length of the usable track.
struct PlantParams {
    double a3 = 1.4;
    double a4 = 2.0;
    double a5 = 1.0;
    double a6 = 0.1;
    double a7 = 0.05;
    double rho = 0.25;
    double s_max = 1.0;

    void validate() const;
};

// Beam inclination alpha(theta) = asin(rho sin theta) together with its
// first two derivatives in theta.
struct AlphaEval {
    double value = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;
};

AlphaEval alpha_eval(double theta, double rho);

// Symmetric 2x2 matrix in the (s, theta) frame.
struct Metric2 {
    double m11 = 0.0;
    double m12 = 0.0;
    double m22 = 0.0;

    double det() const { return m11 * m22 - m12 * m12; }
    double trace() const { return m11 + m22; }

    Eigen::Matrix2d matrix() const {
        Eigen::Matrix2d m;
        m << m11, m12, m12, m22;
        return m;
    }

    // Solves this * x = rhs via the explicit 2x2 inverse.
    Eigen::Vector2d solve(const Eigen::Vector2d& rhs) const {
        const double d = det();
        return Eigen::Vector2d((m22 * rhs(0) - m12 * rhs(1)) / d,
                               (m11 * rhs(1) - m12 * rhs(0)) / d);
    }
};

// Kinetic-energy metric g of the open-loop system.
Metric2 kinetic_metric(double s, double theta, const PlantParams& p);

// Gravitational potential V and its coordinate gradient (dV/ds, dV/dtheta).
double potential(double s, double theta, const PlantParams& p);
Eigen::Vector2d potential_grad(double s, double theta, const PlantParams& p);

// Christoffel symbols of the first kind: v[i][j][k] = [ij,k], symmetric in
// the first two slots.
struct Christoffel1 {
    double v[2][2][2]{};

    // Contracts q^i q^j [ij,k] into the lowered quadratic-velocity force.
    Eigen::Vector2d contract(const Eigen::Vector2d& q) const {
        Eigen::Vector2d out;
        for (int k = 0; k < 2; ++k) {
            double acc = 0.0;
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) acc += v[i][j][k] * q(i) * q(j);
            out(k) = acc;
        }
        return out;
    }
};

Christoffel1 christoffel_g(double s, double theta, const PlantParams& p);

// Christoffel symbols of the first kind for any metric whose coordinate
// partials (d/ds, d/dtheta) are known: [ij,k] = (d_i m_jk + d_j m_ik - d_k m_ij)/2.
Christoffel1 christoffel_first_from_grad(const Metric2& d_s, const Metric2& d_theta);

// Full state of the rig: ball position/velocity along the beam and motor
// angle/rate.
struct State {
    double s = 0.0;
    double theta = 0.0;
    double s_dot = 0.0;
    double theta_dot = 0.0;

    Eigen::Vector4d vec() const { return Eigen::Vector4d(s, theta, s_dot, theta_dot); }
    static State from_vec(const Eigen::Vector4d& v) { return {v(0), v(1), v(2), v(3)}; }
};

// Accelerations (s_ddot, theta_ddot) of the open-loop plant under torque u,
// obtained by solving the lowered Euler-Lagrange equations.
Eigen::Vector2d open_loop_accel(const State& x, double u, const PlantParams& p);

// Total mechanical energy T + V; conserved when u = 0 and a7 = 0.
double mechanical_energy(const State& x, const PlantParams& p);

}  // namespace bb
