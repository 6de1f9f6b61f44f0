#include "bb/plant.hpp"

#include <cmath>

#include <fmt/format.h>

namespace bb {

void PlantParams::validate() const {
    if (!(a4 > 0.0)) throw invariant_error(fmt::format("PlantParams: a4 must be positive, got {}", a4));
    if (!(a3 >= 0.0)) throw invariant_error(fmt::format("PlantParams: a3 must be nonnegative, got {}", a3));
    if (!(a7 >= 0.0)) throw invariant_error(fmt::format("PlantParams: a7 must be nonnegative, got {}", a7));
    if (!(rho > 0.0 && rho < 1.0))
        throw invariant_error(fmt::format("PlantParams: rho must lie in (0, 1), got {}", rho));
    if (!(s_max > 0.0)) throw invariant_error(fmt::format("PlantParams: s_max must be positive, got {}", s_max));
}

AlphaEval alpha_eval(double theta, double rho) {
    // alpha = asin(rho sin theta); with rho < 1 the argument stays strictly
    // inside (-1, 1) and both derivatives are smooth for all theta.
    const double st = std::sin(theta);
    const double ct = std::cos(theta);
    const double w = 1.0 - rho * rho * st * st;
    const double rw = std::sqrt(w);
    AlphaEval out;
    out.value = std::asin(rho * st);
    out.d1 = rho * ct / rw;
    out.d2 = rho * (rho * rho - 1.0) * st / (w * rw);
    return out;
}

Metric2 kinetic_metric(double s, double theta, const PlantParams& p) {
    const double ap = alpha_eval(theta, p.rho).d1;
    Metric2 g;
    g.m11 = 1.0;
    g.m12 = ap;
    g.m22 = p.a4 + (p.a3 + 2.5 * s * s) * ap * ap;
    return g;
}

double potential(double s, double theta, const PlantParams& p) {
    const double a = alpha_eval(theta, p.rho).value;
    return p.a5 * std::sin(theta) + (s + p.a6) * std::sin(a);
}

Eigen::Vector2d potential_grad(double s, double theta, const PlantParams& p) {
    const AlphaEval a = alpha_eval(theta, p.rho);
    // d/dtheta sin(alpha) = cos(alpha) alpha' = rho cos(theta) exactly.
    return Eigen::Vector2d(std::sin(a.value),
                           p.a5 * std::cos(theta) + (s + p.a6) * p.rho * std::cos(theta));
}

Christoffel1 christoffel_g(double s, double theta, const PlantParams& p) {
    const AlphaEval a = alpha_eval(theta, p.rho);
    const double ap = a.d1;
    const double app = a.d2;
    Christoffel1 c;
    // Nonzero entries of [ij,k] for g = [[1, a'], [a', a4 + (a3 + 5/2 s^2) a'^2]].
    c.v[0][1][1] = 2.5 * s * ap * ap;
    c.v[1][0][1] = c.v[0][1][1];
    c.v[1][1][0] = app - 2.5 * s * ap * ap;
    c.v[1][1][1] = (p.a3 + 2.5 * s * s) * ap * app;
    return c;
}

Christoffel1 christoffel_first_from_grad(const Metric2& d_s, const Metric2& d_theta) {
    Christoffel1 c;
    c.v[0][0][0] = 0.5 * d_s.m11;
    c.v[0][0][1] = d_s.m12 - 0.5 * d_theta.m11;
    c.v[0][1][0] = 0.5 * d_theta.m11;
    c.v[0][1][1] = 0.5 * d_s.m22;
    c.v[1][0][0] = c.v[0][1][0];
    c.v[1][0][1] = c.v[0][1][1];
    c.v[1][1][0] = d_theta.m12 - 0.5 * d_s.m22;
    c.v[1][1][1] = 0.5 * d_theta.m22;
    return c;
}

Eigen::Vector2d open_loop_accel(const State& x, double u, const PlantParams& p) {
    const Metric2 g = kinetic_metric(x.s, x.theta, p);
    const Eigen::Vector2d qdot(x.s_dot, x.theta_dot);
    const Eigen::Vector2d quad = christoffel_g(x.s, x.theta, p).contract(qdot);
    const Eigen::Vector2d dV = potential_grad(x.s, x.theta, p);
    const Eigen::Vector2d force(0.0, u - p.a7 * x.theta_dot);
    return g.solve(force - quad - dV);
}

double mechanical_energy(const State& x, const PlantParams& p) {
    const Metric2 g = kinetic_metric(x.s, x.theta, p);
    const Eigen::Vector2d qdot(x.s_dot, x.theta_dot);
    return 0.5 * qdot.dot(g.matrix() * qdot) + potential(x.s, x.theta, p);
}

}  // namespace bb
