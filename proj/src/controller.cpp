#include "bb/controller.hpp"

#include <cmath>

#include <fmt/format.h>

namespace bb {

Christoffel2 christoffel_second(const Metric2& m, const Christoffel1& first) {
    Christoffel2 out;
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            const Eigen::Vector2d low(first.v[i][j][0], first.v[i][j][1]);
            const Eigen::Vector2d up = m.solve(low);
            out.v[0][i][j] = up(0);
            out.v[1][i][j] = up(1);
        }
    }
    return out;
}

Christoffel2 christoffel_ghat(double s, double theta, const FamilySpec& spec) {
    if (std::abs(s) < s_tol)
        throw singularity_error(fmt::format(
            "christoffel_ghat: |s| = {:.6g} is inside the excluded strip (< {:g})", std::abs(s), s_tol));
    const GeometryAt geo = geometry_unchecked(s, theta, spec);
    const Christoffel1 first = christoffel_first_from_grad(geo.ghat_grad.d_s, geo.ghat_grad.d_theta);
    return christoffel_second(geo.ghat, first);
}

ControlBreakdown control_from_geometry(const State& x, const GeometryAt& geo, const FamilySpec& spec) {
    const double det = geo.ghat.det();
    if (!std::isfinite(det) || det == 0.0)
        throw singularity_error(fmt::format(
            "control: closed-loop metric degenerates at (s, theta) = ({:.6g}, {:.6g})", x.s, x.theta));

    const PlantParams& p = spec.plant;
    const Metric2 g = kinetic_metric(x.s, x.theta, p);
    const Eigen::Matrix2d gm = g.matrix();
    const Eigen::Vector2d qdot(x.s_dot, x.theta_dot);

    // Identify the torque by subtracting the closed-loop equation from the
    // open-loop one and reading off the theta component (the s component
    // vanishes identically by the matching conditions).
    const Eigen::Vector2d quad_g = christoffel_g(x.s, x.theta, p).contract(qdot);
    const Christoffel1 first_hat = christoffel_first_from_grad(geo.ghat_grad.d_s, geo.ghat_grad.d_theta);
    const Eigen::Vector2d quad_hat = first_hat.contract(qdot);

    ControlBreakdown out;
    out.u_g = quad_g(1) - (gm * geo.ghat.solve(quad_hat))(1);
    out.u_V = potential_grad(x.s, x.theta, p)(1) - (gm * geo.ghat.solve(geo.dvhat))(1);
    out.u_c = p.a7 * x.theta_dot - (gm * chat(x, spec))(1);
    out.u_total = out.u_g + out.u_V + out.u_c;
    return out;
}

ControlBreakdown control(const State& x, const FamilySpec& spec) {
    if (std::abs(x.s) < s_tol)
        throw singularity_error(fmt::format(
            "control: |s| = {:.6g} is inside the excluded strip (< {:g})", std::abs(x.s), s_tol));
    return control_from_geometry(x, geometry_unchecked(x.s, x.theta, spec), spec);
}

ControlBreakdown linear_control(const State& x, const LinearGains& k, double s0) {
    ControlBreakdown out;
    out.u_V = k.a8 + k.Kbp * (x.s - s0) + k.Kap * x.theta;
    out.u_c = k.Kbd * x.s_dot + k.Kad * x.theta_dot;
    out.u_total = out.u_g + out.u_V + out.u_c;
    return out;
}

}  // namespace bb
