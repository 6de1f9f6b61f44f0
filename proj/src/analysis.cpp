#include "bb/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include <fmt/format.h>

namespace bb {
namespace {

constexpr double qnan = std::numeric_limits<double>::quiet_NaN();

Eigen::Vector4d state_of(const FamilySpec& spec) {
    return Eigen::Vector4d(spec.gen.s0, 0.0, 0.0, 0.0);
}

double law_torque(const State& x, const FamilySpec& spec, const Law& law) {
    switch (law.kind) {
        case LawKind::nonlinear_family: return control(x, spec).u_total;
        case LawKind::linear: return linear_control(x, law.gains, spec.gen.s0).u_total;
        case LawKind::open_loop: return 0.0;
    }
    return 0.0;
}

}  // namespace

StabilityReport stability_from_matrices(const Eigen::Matrix2d& ghat0, const Eigen::Matrix2d& ghatchat0,
                                        const Eigen::Matrix2d& d2vhat0) {
    StabilityReport r;
    r.ghat0 = ghat0;
    r.ghatchat0 = ghatchat0;
    r.d2vhat0 = d2vhat0;

    r.det_ghat = ghat0.determinant();
    r.tr_ghat = ghat0.trace();
    r.det_ghatchat = ghatchat0.determinant();
    r.tr_ghatchat = ghatchat0.trace();
    r.det_d2vhat = d2vhat0.determinant();
    r.tr_d2vhat = d2vhat0.trace();

    r.ok_det_ghat = r.det_ghat > 0.0;
    r.ok_tr_ghat = r.tr_ghat > 0.0;
    // The lowered dissipation has rank one for the linear damping injected
    // here, so its determinant is zero in exact arithmetic.  The test
    // accepts a roundoff-sized dip below zero (scaled by the matrix size)
    // and relies on the strict trace test to reject sign-indefinite cases;
    // together they certify the symmetric part is positive semidefinite.
    const double slack = 1e-9 * std::max(1.0, ghatchat0.squaredNorm());
    const Eigen::Matrix2d sym = 0.5 * (ghatchat0 + ghatchat0.transpose());
    r.ok_det_ghatchat = sym.determinant() >= -slack;
    r.ok_tr_ghatchat = r.tr_ghatchat > 0.0;
    r.ok_det_d2vhat = r.det_d2vhat > 0.0;
    r.ok_tr_d2vhat = r.tr_d2vhat > 0.0;

    r.overall = r.ok_det_ghat && r.ok_tr_ghat && r.ok_det_ghatchat && r.ok_tr_ghatchat &&
                r.ok_det_d2vhat && r.ok_tr_d2vhat;
    return r;
}

StabilityReport stability_conditions(const FamilySpec& spec) {
    const double s0 = spec.gen.s0;
    try {
        const GeometryAt geo = ghat_at(s0, 0.0, spec);
        const Eigen::Matrix2d ghat0 = geo.ghat.matrix();

        // chat linearized at zero velocity: chat^2 = k1 s_dot + k2 theta_dot
        // and chat^1 = -alpha'(0) chat^2 = -rho chat^2.
        Eigen::Matrix2d B;
        B << -spec.plant.rho * spec.gen.k1, -spec.plant.rho * spec.gen.k2, spec.gen.k1, spec.gen.k2;
        const Eigen::Matrix2d ghatchat0 = ghat0 * B;

        // Hessian of vhat by one central differencing of its exact gradient.
        const double h = 1e-4;
        const Eigen::Vector2d ds =
            (vhat_at(s0 + h, 0.0, spec).dvhat - vhat_at(s0 - h, 0.0, spec).dvhat) / (2.0 * h);
        const Eigen::Vector2d dt =
            (vhat_at(s0, h, spec).dvhat - vhat_at(s0, -h, spec).dvhat) / (2.0 * h);
        Eigen::Matrix2d hess;
        hess << ds(0), ds(1), dt(0), dt(1);
        const Eigen::Matrix2d d2vhat0 = 0.5 * (hess + hess.transpose());

        return stability_from_matrices(ghat0, ghatchat0, d2vhat0);
    } catch (const singularity_error&) {
        StabilityReport r;
        r.equilibrium_singular = true;
        r.det_ghat = r.tr_ghat = r.det_ghatchat = r.tr_ghatchat = r.det_d2vhat = r.tr_d2vhat = qnan;
        return r;
    }
}

std::array<double, 4> charpoly_coeffs(const Eigen::Matrix4d& A) {
    // Faddeev-LeVerrier recursion.
    Eigen::Matrix4d M = A;
    const double c3 = -M.trace();
    M = A * (M + c3 * Eigen::Matrix4d::Identity());
    const double c2 = -M.trace() / 2.0;
    M = A * (M + c2 * Eigen::Matrix4d::Identity());
    const double c1 = -M.trace() / 3.0;
    M = A * (M + c1 * Eigen::Matrix4d::Identity());
    const double c0 = -M.trace() / 4.0;
    return {c0, c1, c2, c3};
}

LinearizationResult linearize(const FamilySpec& spec, const Law& law) {
    const Eigen::Vector4d xe = state_of(spec);
    const auto f = [&](const Eigen::Vector4d& v) { return closed_loop_rhs(State::from_vec(v), spec, law); };

    const double fnorm = f(xe).norm();
    if (fnorm > 1e-8)
        throw non_equilibrium_error(fmt::format(
            "linearize: (s0, 0, 0, 0) is not an equilibrium of this law, |f| = {:.3e}", fnorm));

    LinearizationResult out;
    for (int j = 0; j < 4; ++j) {
        const double h = 1e-6 * std::max(1.0, std::abs(xe(j)));
        Eigen::Vector4d xp = xe, xm = xe;
        xp(j) += h;
        xm(j) -= h;
        out.A.col(j) = (f(xp) - f(xm)) / (2.0 * h);
    }

    const Eigen::EigenSolver<Eigen::Matrix4d> es(out.A);
    std::array<std::complex<double>, 4> poles;
    for (int i = 0; i < 4; ++i) poles[i] = es.eigenvalues()(i);
    std::sort(poles.begin(), poles.end(), [](const std::complex<double>& a, const std::complex<double>& b) {
        if (a.real() != b.real()) return a.real() < b.real();
        return a.imag() < b.imag();
    });
    out.poles = poles;

    const std::array<double, 4> c = charpoly_coeffs(out.A);
    for (const std::complex<double>& p : poles) {
        const std::complex<double> val = (((p + c[3]) * p + c[2]) * p + c[1]) * p + c[0];
        out.charpoly_residual_max = std::max(out.charpoly_residual_max, std::abs(val));
    }

    // Equivalent linear gains from the torque gradient at the equilibrium.
    const auto u_of = [&](const Eigen::Vector4d& v) { return law_torque(State::from_vec(v), spec, law); };
    out.gains_equivalent.a8 = u_of(xe);
    double* slots[4] = {&out.gains_equivalent.Kbp, &out.gains_equivalent.Kap, &out.gains_equivalent.Kbd,
                        &out.gains_equivalent.Kad};
    for (int j = 0; j < 4; ++j) {
        const double h = 1e-6 * std::max(1.0, std::abs(xe(j)));
        Eigen::Vector4d xp = xe, xm = xe;
        xp(j) += h;
        xm(j) -= h;
        *slots[j] = (u_of(xp) - u_of(xm)) / (2.0 * h);
    }
    return out;
}

FamilySpec fit_linear_gains(const LinearGains& target, const FamilySpec& spec_template, FitInfo* info) {
    FamilySpec spec = spec_template;
    if (spec.gen.mu1.c.size() < 2) spec.gen.mu1.c.resize(2, 0.0);
    if (spec.gen.w.c.size() < 3) spec.gen.w.c.resize(3, 0.0);

    const auto spec_of = [&](const Eigen::Vector4d& z) {
        FamilySpec s = spec;
        s.gen.mu1.c[1] = z(0);  // mu1'(0)
        s.gen.w.c[2] = z(1);    // w''(0) / 2
        s.gen.k1 = z(2);
        s.gen.k2 = z(3);
        return s;
    };
    const auto gains_of = [&](const Eigen::Vector4d& z) {
        const LinearGains g = linearize(spec_of(z), Law{LawKind::nonlinear_family, {}}).gains_equivalent;
        return Eigen::Vector4d(g.Kbp - target.Kbp, g.Kap - target.Kap, g.Kbd - target.Kbd,
                               g.Kad - target.Kad);
    };

    // Decoupled initial guess: unit mu1 slope, a curvature scale from the
    // position gain, and velocity gains divided through the open-loop
    // metric determinant at the equilibrium.
    const PlantParams& p = spec.plant;
    const double s0 = spec.gen.s0;
    const double det0 = p.a4 + (p.a3 + 2.5 * s0 * s0) * p.rho * p.rho - p.rho * p.rho;
    Eigen::Vector4d z(1.0, std::max(0.2, std::abs(p.rho - target.Kbp)), -target.Kbd / det0,
                      (p.a7 - target.Kad) / det0);

    constexpr int max_iters = 60;
    constexpr double mu1p_floor = 1e-6;
    Eigen::Vector4d F;
    double fnorm = 0.0;
    const auto eval = [&](const Eigen::Vector4d& zz, Eigen::Vector4d& out) {
        out = gains_of(zz);
        return out.norm();
    };
    fnorm = eval(z, F);

    int it = 0;
    for (; it < max_iters && fnorm >= 1e-8; ++it) {
        // Forward-difference Jacobian.
        Eigen::Matrix4d J;
        for (int j = 0; j < 4; ++j) {
            const double h = 1e-6 * std::max(1.0, std::abs(z(j)));
            Eigen::Vector4d zp = z;
            zp(j) += h;
            Eigen::Vector4d Fp;
            eval(zp, Fp);
            J.col(j) = (Fp - F) / h;
        }
        const Eigen::FullPivLU<Eigen::Matrix4d> lu(J);
        if (!lu.isInvertible())
            throw fit_error(fmt::format("fit_linear_gains: singular Jacobian at iteration {}", it));
        const Eigen::Vector4d dz = lu.solve(-F);

        // Backtracking line search, also retreating from invalid members.
        double lambda = 1.0;
        bool advanced = false;
        for (int bt = 0; bt < 13; ++bt, lambda *= 0.5) {
            Eigen::Vector4d zn = z + lambda * dz;
            if (zn(0) < mu1p_floor) continue;
            try {
                Eigen::Vector4d Fn;
                const double fn = eval(zn, Fn);
                if (fn < fnorm) {
                    z = zn;
                    F = Fn;
                    fnorm = fn;
                    advanced = true;
                    break;
                }
            } catch (const std::exception&) {
                // invalid candidate (e.g. mu1' loses positivity); shrink
            }
        }
        if (!advanced)
            throw fit_error(fmt::format(
                "fit_linear_gains: stalled at iteration {} with residual {:.3e}", it, fnorm));
    }
    if (fnorm >= 1e-8)
        throw fit_error(
            fmt::format("fit_linear_gains: no convergence after {} iterations, residual {:.3e}", it, fnorm));

    if (info) {
        info->iterations = it;
        info->residual = fnorm;
    }
    return spec_of(z);
}

BasinResult basin_estimate(const FamilySpec& spec, const Law& law, const BasinGrid& grid,
                           const SimConfig& cfg, double capture_radius, int threads) {
    cfg.validate();
    if (!(std::isfinite(capture_radius) && capture_radius > 0.0))
        throw invariant_error(
            fmt::format("basin.capture_radius: must be positive and finite, got {}", capture_radius));
    for (const auto* r : {&grid.s, &grid.theta, &grid.s_dot, &grid.theta_dot})
        if (r->n < 1) throw invariant_error("basin grid: each range needs n >= 1");
    if (law.kind == LawKind::nonlinear_family && !stability_conditions(spec).overall)
        throw invariant_error(
            "basin_estimate: the spec fails the local stability conditions; no basin to estimate");

    const Eigen::Vector4d xe = state_of(spec);
    BasinResult result;
    const std::size_t total = static_cast<std::size_t>(grid.s.n) * grid.theta.n * grid.s_dot.n *
                              static_cast<std::size_t>(grid.theta_dot.n);
    result.points.resize(total);

    const auto point_at = [&](std::size_t idx) {
        const int i_td = static_cast<int>(idx % grid.theta_dot.n);
        std::size_t rest = idx / grid.theta_dot.n;
        const int i_sd = static_cast<int>(rest % grid.s_dot.n);
        rest /= grid.s_dot.n;
        const int i_th = static_cast<int>(rest % grid.theta.n);
        const int i_s = static_cast<int>(rest / grid.theta.n);
        return State{grid.s.at(i_s), grid.theta.at(i_th), grid.s_dot.at(i_sd), grid.theta_dot.at(i_td)};
    };

    const auto run_point = [&](std::size_t idx) {
        BasinPoint bp;
        bp.x0 = point_at(idx);
        const Trajectory traj = simulate(bp.x0, spec, cfg, law);
        bp.termination = traj.termination;
        const State& last = traj.samples.back().x;
        bp.final_dist = (last.vec() - xe).norm();
        bp.captured = traj.termination == Termination::completed && std::isfinite(bp.final_dist) &&
                      bp.final_dist < capture_radius;
        result.points[idx] = bp;
    };

    int n_threads = threads > 0 ? threads
                                : std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
    n_threads = std::min<int>(n_threads, static_cast<int>(total));
    if (n_threads <= 1) {
        for (std::size_t i = 0; i < total; ++i) run_point(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(n_threads);
        for (int w = 0; w < n_threads; ++w)
            pool.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < total; i = next.fetch_add(1)) run_point(i);
            });
        for (std::thread& th : pool) th.join();
    }

    std::size_t captured = 0;
    for (const BasinPoint& bp : result.points) captured += bp.captured ? 1 : 0;
    result.fraction = static_cast<double>(captured) / static_cast<double>(total);
    return result;
}

}  // namespace bb
