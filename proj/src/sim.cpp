#include "bb/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>

namespace bb {
namespace {

constexpr double qnan = std::numeric_limits<double>::quiet_NaN();

ControlBreakdown breakdown_for(const State& x, const GeometryAt& geo, const FamilySpec& spec,
                               const Law& law) {
    switch (law.kind) {
        case LawKind::nonlinear_family:
            if (std::abs(x.s) < s_tol)
                throw singularity_error(
                    fmt::format("simulate: trajectory entered the excluded strip at s = {:.6g}", x.s));
            return control_from_geometry(x, geo, spec);
        case LawKind::linear:
            return linear_control(x, law.gains, spec.gen.s0);
        case LawKind::open_loop:
            return ControlBreakdown{};
    }
    return ControlBreakdown{};
}

// Derivative of sampled data, preferring fourth-order formulas wherever a
// uniformly spaced five-point stencil is available and falling back to
// quadratic-fit three-point formulas (exact on nonuniform grids) otherwise.
std::vector<double> differentiate(const std::vector<double>& t, const std::vector<double>& f) {
    const std::size_t n = t.size();
    std::vector<double> d(n, 0.0);
    if (n < 2) return d;
    if (n == 2) {
        d[0] = d[1] = (f[1] - f[0]) / (t[1] - t[0]);
        return d;
    }

    const auto uniform = [&](std::size_t lo, std::size_t hi, double& h) {
        h = t[lo + 1] - t[lo];
        for (std::size_t i = lo + 1; i < hi; ++i)
            if (std::abs((t[i + 1] - t[i]) - h) > 1e-9 * std::max(1.0, std::abs(h))) return false;
        return true;
    };

    const auto three_point = [&](std::size_t i) {
        // Quadratic through the three nearest points, differentiated at t[i].
        const std::size_t c = std::min(std::max<std::size_t>(i, 1), n - 2);
        const double h1 = t[c] - t[c - 1];
        const double h2 = t[c + 1] - t[c];
        const double f0 = f[c - 1], f1 = f[c], f2 = f[c + 1];
        if (i == c - 1)
            return -(2.0 * h1 + h2) / (h1 * (h1 + h2)) * f0 + (h1 + h2) / (h1 * h2) * f1 -
                   h1 / (h2 * (h1 + h2)) * f2;
        if (i == c)
            return -h2 / (h1 * (h1 + h2)) * f0 + (h2 - h1) / (h1 * h2) * f1 +
                   h1 / (h2 * (h1 + h2)) * f2;
        return h2 / (h1 * (h1 + h2)) * f0 - (h1 + h2) / (h1 * h2) * f1 +
               (2.0 * h2 + h1) / (h2 * (h1 + h2)) * f2;
    };

    for (std::size_t i = 0; i < n; ++i) {
        double h = 0.0;
        if (n >= 5 && i >= 2 && i + 2 < n && uniform(i - 2, i + 2, h)) {
            d[i] = (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / (12.0 * h);
        } else if (n >= 5 && i <= 1 && uniform(0, 4, h)) {
            d[i] = (i == 0)
                       ? (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) / (12.0 * h)
                       : (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) / (12.0 * h);
        } else if (n >= 5 && i + 2 >= n && uniform(n - 5, n - 1, h)) {
            d[i] = (i == n - 1)
                       ? (25.0 * f[n - 1] - 48.0 * f[n - 2] + 36.0 * f[n - 3] - 16.0 * f[n - 4] +
                          3.0 * f[n - 5]) /
                             (12.0 * h)
                       : (3.0 * f[n - 1] + 10.0 * f[n - 2] - 18.0 * f[n - 3] + 6.0 * f[n - 4] - f[n - 5]) /
                             (12.0 * h);
        } else {
            d[i] = three_point(i);
        }
    }
    return d;
}

}  // namespace

const char* to_string(Termination t) {
    switch (t) {
        case Termination::completed: return "completed";
        case Termination::beam_exit: return "beam_exit";
        case Termination::singularity: return "singularity";
        case Termination::numerical_failure: return "numerical_failure";
    }
    return "unknown";
}

void SimConfig::validate() const {
    if (!(std::isfinite(t_final) && t_final > 0.0))
        throw invariant_error(fmt::format("sim.t_final: must be positive and finite, got {}", t_final));
    if (!(std::isfinite(dt) && dt > 0.0))
        throw invariant_error(fmt::format("sim.dt: must be positive and finite, got {}", dt));
    if (!(integrator_tol > 1e-14 && integrator_tol < 1e-2))
        throw invariant_error(
            fmt::format("sim.integrator_tol: must lie in (1e-14, 1e-2), got {}", integrator_tol));
}

double hhat(const State& x, const FamilySpec& spec) {
    const GeometryAt geo = geometry_unchecked(x.s, x.theta, spec, geo_vhat);
    const Eigen::Vector2d qdot(x.s_dot, x.theta_dot);
    return 0.5 * qdot.dot(geo.ghat.matrix() * qdot) + geo.vhat;
}

double hhat_rate_exact(const State& x, const FamilySpec& spec) {
    const GeometryAt geo = geometry_unchecked(x.s, x.theta, spec);
    const Eigen::Vector2d qdot(x.s_dot, x.theta_dot);
    return -chat(x, spec).dot(geo.ghat.matrix() * qdot);
}

double hhat_rate_identity_max(const Trajectory& traj, const FamilySpec& spec) {
    const FamilyEvaluator ev(spec);
    double worst = 0.0;
    for (const Sample& smp : traj.samples) {
        if (!std::isfinite(smp.H_hat_rate)) break;
        const Eigen::Vector2d qdot(smp.x.s_dot, smp.x.theta_dot);
        const double exact = -chat(smp.x, spec).dot(ev.geometry(smp.x.s, smp.x.theta).ghat.matrix() * qdot);
        worst = std::max(worst, std::abs(smp.H_hat_rate - exact));
    }
    return worst;
}

Eigen::Vector4d closed_loop_rhs(const State& x, const FamilySpec& spec, const Law& law) {
    double u = 0.0;
    if (law.kind == LawKind::nonlinear_family) {
        u = control(x, spec).u_total;
    } else if (law.kind == LawKind::linear) {
        u = linear_control(x, law.gains, spec.gen.s0).u_total;
    }
    const Eigen::Vector2d acc = open_loop_accel(x, u, spec.plant);
    return Eigen::Vector4d(x.s_dot, x.theta_dot, acc(0), acc(1));
}

Trajectory simulate(const State& x0, const FamilySpec& spec, const SimConfig& cfg, const Law& law) {
    cfg.validate();
    Trajectory traj;

    std::optional<FamilyEvaluator> ev;
    try {
        ev.emplace(spec);
    } catch (const std::exception&) {
        Sample smp;
        smp.t = 0.0;
        smp.x = x0;
        smp.u = {qnan, qnan, qnan, qnan};
        smp.H_hat = qnan;
        smp.H_hat_rate = qnan;
        traj.samples.push_back(smp);
        traj.termination = Termination::numerical_failure;
        return traj;
    }

    // Sample grid: every multiple of dt up to t_final, plus t_final itself
    // when it does not land on the grid.
    std::vector<double> grid;
    const std::size_t k_max = static_cast<std::size_t>(std::floor(cfg.t_final / cfg.dt + 1e-9));
    grid.reserve(k_max + 2);
    for (std::size_t k = 0; k <= k_max; ++k) grid.push_back(static_cast<double>(k) * cfg.dt);
    if (cfg.t_final - grid.back() > 1e-9 * std::max(1.0, cfg.t_final)) grid.push_back(cfg.t_final);

    bool sample_failed = false;
    const auto record = [&](double t, const State& x) {
        Sample smp;
        smp.t = t;
        smp.x = x;
        smp.H_hat_rate = qnan;  // filled by post-hoc differencing
        try {
            const GeometryAt geo = ev->geometry(x.s, x.theta, geo_vhat);
            smp.u = breakdown_for(x, geo, spec, law);
            const Eigen::Vector2d qdot(x.s_dot, x.theta_dot);
            smp.H_hat = 0.5 * qdot.dot(geo.ghat.matrix() * qdot) + geo.vhat;
        } catch (const singularity_error&) {
            smp.u = {qnan, qnan, qnan, qnan};
            smp.H_hat = qnan;
            traj.termination = Termination::singularity;
            sample_failed = true;
        } catch (const std::exception&) {
            smp.u = {qnan, qnan, qnan, qnan};
            smp.H_hat = qnan;
            traj.termination = Termination::numerical_failure;
            sample_failed = true;
        }
        traj.samples.push_back(smp);
    };

    State x = x0;
    record(0.0, x);
    bool stopped = sample_failed;
    if (!stopped && cfg.stop_on_beam_exit && std::abs(x.s) > spec.plant.s_max) {
        traj.termination = Termination::beam_exit;
        stopped = true;
    }

    // Dormand-Prince 5(4) embedded pair with the first-same-as-last reuse.
    static const double a21 = 1.0 / 5.0;
    static const double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
    static const double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
    static const double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                        a54 = -212.0 / 729.0;
    static const double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                        a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
    static const double b1 = 35.0 / 384.0, b3 = 500.0 / 1113.0, b4 = 125.0 / 192.0,
                        b5 = -2187.0 / 6784.0, b6 = 11.0 / 84.0;
    static const double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                        e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
    static const double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;

    const double tol = cfg.integrator_tol;
    const auto rhs = [&](double /*t*/, const Eigen::Vector4d& yv) {
        const State xs = State::from_vec(yv);
        double u = 0.0;
        if (law.kind == LawKind::nonlinear_family) {
            if (std::abs(xs.s) < s_tol)
                throw singularity_error(
                    fmt::format("simulate: trajectory entered the excluded strip at s = {:.6g}", xs.s));
            u = control_from_geometry(xs, ev->geometry(xs.s, xs.theta), spec).u_total;
        } else if (law.kind == LawKind::linear) {
            u = linear_control(xs, law.gains, spec.gen.s0).u_total;
        }
        const Eigen::Vector2d acc = open_loop_accel(xs, u, spec.plant);
        return Eigen::Vector4d(xs.s_dot, xs.theta_dot, acc(0), acc(1));
    };

    double t = 0.0;
    Eigen::Vector4d y = x0.vec();
    double h_prop = cfg.dt;  // accuracy-driven step proposal
    Eigen::Vector4d k1v;
    bool have_k1 = false;

    try {
        for (std::size_t gi = 1; gi < grid.size() && !stopped; ++gi) {
            const double t_target = grid[gi];
            while (t < t_target - 1e-12 * std::max(1.0, t_target)) {
                if (!have_k1) {
                    k1v = rhs(t, y);
                    have_k1 = true;
                }
                // Clip to land exactly on the sample grid; the clip is not
                // an accuracy decision, so it never feeds back into h_prop.
                const double h = std::min(h_prop, t_target - t);
                if (!(h > 1e-14 * std::max(1.0, std::abs(t))))
                    throw std::runtime_error("step size underflow");

                const Eigen::Vector4d k2v = rhs(t + c2 * h, y + h * (a21 * k1v));
                const Eigen::Vector4d k3v = rhs(t + c3 * h, y + h * (a31 * k1v + a32 * k2v));
                const Eigen::Vector4d k4v = rhs(t + c4 * h, y + h * (a41 * k1v + a42 * k2v + a43 * k3v));
                const Eigen::Vector4d k5v =
                    rhs(t + c5 * h, y + h * (a51 * k1v + a52 * k2v + a53 * k3v + a54 * k4v));
                const Eigen::Vector4d k6v =
                    rhs(t + h, y + h * (a61 * k1v + a62 * k2v + a63 * k3v + a64 * k4v + a65 * k5v));
                const Eigen::Vector4d ynew =
                    y + h * (b1 * k1v + b3 * k3v + b4 * k4v + b5 * k5v + b6 * k6v);
                const Eigen::Vector4d k7v = rhs(t + h, ynew);

                const Eigen::Vector4d err =
                    h * (e1 * k1v + e3 * k3v + e4 * k4v + e5 * k5v + e6 * k6v + e7 * k7v);
                double norm_sq = 0.0;
                for (int i = 0; i < 4; ++i) {
                    const double sc = tol + tol * std::max(std::abs(y(i)), std::abs(ynew(i)));
                    norm_sq += (err(i) / sc) * (err(i) / sc);
                }
                const double err_norm = std::sqrt(norm_sq / 4.0);

                if (!std::isfinite(err_norm)) {
                    h_prop = 0.2 * h;
                    continue;
                }
                if (err_norm <= 1.0) {
                    t += h;
                    y = ynew;
                    k1v = k7v;  // first-same-as-last
                    const double grow =
                        (err_norm == 0.0) ? 5.0
                                          : std::clamp(0.9 * std::pow(err_norm, -0.2), 0.2, 5.0);
                    if (h == h_prop)
                        h_prop = h * grow;
                    else
                        h_prop = std::max(h_prop, h * grow);
                } else {
                    h_prop = h * std::clamp(0.9 * std::pow(err_norm, -0.2), 0.2, 1.0);
                }
            }
            t = t_target;
            record(t, State::from_vec(y));
            if (sample_failed) break;
            if (cfg.stop_on_beam_exit && std::abs(y(0)) > spec.plant.s_max) {
                traj.termination = Termination::beam_exit;
                break;
            }
        }
    } catch (const singularity_error&) {
        traj.termination = Termination::singularity;
    } catch (const std::exception&) {
        traj.termination = Termination::numerical_failure;
    }

    // Fill the energy-rate column by differencing the sampled energy over
    // the finite prefix.
    std::size_t n_finite = 0;
    while (n_finite < traj.samples.size() && std::isfinite(traj.samples[n_finite].H_hat)) ++n_finite;
    if (n_finite >= 2) {
        std::vector<double> ts(n_finite), hs(n_finite);
        for (std::size_t i = 0; i < n_finite; ++i) {
            ts[i] = traj.samples[i].t;
            hs[i] = traj.samples[i].H_hat;
        }
        const std::vector<double> rate = differentiate(ts, hs);
        for (std::size_t i = 0; i < n_finite; ++i) traj.samples[i].H_hat_rate = rate[i];
    } else if (n_finite == 1) {
        traj.samples[0].H_hat_rate = 0.0;
    }
    return traj;
}

void write_csv(std::ostream& os, const Trajectory& traj) {
    fmt::print(os, "t,s,theta,s_dot,theta_dot,u,u_g,u_V,u_c,H_hat,H_hat_rate\n");
    for (const Sample& smp : traj.samples) {
        fmt::print(os, "{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n",
                   smp.t, smp.x.s, smp.x.theta, smp.x.s_dot, smp.x.theta_dot, smp.u.u_total, smp.u.u_g,
                   smp.u.u_V, smp.u.u_c, smp.H_hat, smp.H_hat_rate);
    }
    fmt::print(os, "# termination={}\n", to_string(traj.termination));
}

}  // namespace bb
