#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "bb/analysis.hpp"
#include "bb/config.hpp"

namespace {

using namespace bb;

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw config_error(fmt::format("cannot write '{}'", path.string()));
    out << content;
}

Law make_law(const RunConfig& rc, const std::string& name) {
    if (name == "nonlinear") return Law{LawKind::nonlinear_family, {}};
    if (name == "open") return Law{LawKind::open_loop, {}};
    if (name == "linear") {
        if (!rc.linear_gains)
            throw config_error("linear_gains: section required for --law linear");
        return Law{LawKind::linear, *rc.linear_gains};
    }
    throw config_error(fmt::format("--law: unknown value '{}'", name));
}

State parse_x0(const std::string& text) {
    std::vector<double> v;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t comma = text.find(',', pos);
        const std::string tok = text.substr(pos, comma == std::string::npos ? std::string::npos
                                                                            : comma - pos);
        try {
            std::size_t used = 0;
            v.push_back(std::stod(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw config_error(fmt::format("--x0: '{}' is not a number", tok));
        }
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    if (v.size() != 4)
        throw config_error(fmt::format("--x0: expected 4 comma-separated numbers, got {}", v.size()));
    return State{v[0], v[1], v[2], v[3]};
}

std::string plot_script() {
    std::string s;
    s += "# Plots trajectory.csv; run with: gnuplot trajectory.gp\n";
    s += "set datafile separator comma\n";
    s += "set terminal pngcairo size 1400,1000\n";
    s += "set output 'trajectory.png'\n";
    s += "set key autotitle columnhead\n";
    s += "set multiplot layout 2,2\n";
    s += "set xlabel 't'\n";
    s += "plot 'trajectory.csv' using (column('t')):(column('s')) with lines title 's', \\\n";
    s += "     '' using (column('t')):(column('theta')) with lines title 'theta'\n";
    s += "plot 'trajectory.csv' using (column('t')):(column('s_dot')) with lines title 's_dot', \\\n";
    s += "     '' using (column('t')):(column('theta_dot')) with lines title 'theta_dot'\n";
    s += "plot 'trajectory.csv' using (column('t')):(column('u')) with lines title 'u', \\\n";
    s += "     '' using (column('t')):(column('u_g')) with lines title 'u_g', \\\n";
    s += "     '' using (column('t')):(column('u_V')) with lines title 'u_V', \\\n";
    s += "     '' using (column('t')):(column('u_c')) with lines title 'u_c'\n";
    s += "plot 'trajectory.csv' using (column('t')):(column('H_hat')) with lines title 'H_hat', \\\n";
    s += "     '' using (column('t')):(column('H_hat_rate')) with lines title 'H_hat_rate'\n";
    s += "unset multiplot\n";
    return s;
}

int cmd_simulate(const RunConfig& rc, const State& x0, const Law& law,
                 const std::filesystem::path& out, bool emit_plots) {
    const Trajectory traj = simulate(x0, rc.spec, rc.sim, law);
    {
        std::ofstream csv(out / "trajectory.csv", std::ios::binary);
        if (!csv) throw config_error(fmt::format("cannot write '{}'", (out / "trajectory.csv").string()));
        write_csv(csv, traj);
    }
    if (emit_plots) write_file(out / "trajectory.gp", plot_script());
    fmt::print("simulate: {} samples, termination={}\n", traj.samples.size(),
               to_string(traj.termination));
    return traj.termination == Termination::completed ? 0 : 2;
}

int cmd_verify(const RunConfig& rc, const std::filesystem::path& out) {
    const FamilySpec& spec = rc.spec;
    std::string report;
    bool all_pass = true;

    // Matching-condition residuals over the verification grid.
    {
        constexpr double tol = 1e-6;
        double worst[4] = {0, 0, 0, 0};
        double worst_s[4] = {0, 0, 0, 0}, worst_th[4] = {0, 0, 0, 0};
        for (int i = 0; i < 20; ++i) {
            for (int j = 0; j < 20; ++j) {
                const double s = 0.3 + 0.6 * i / 19.0;
                const double th = -0.5 + 1.0 * j / 19.0;
                const MatchingResiduals r =
                    matching_residuals_with_override(s, th, spec, rc.verify.ghat11_factor);
                const double vals[4] = {r.r3, r.r4_V, r.r5_lambda, r.r5_lie};
                for (int k = 0; k < 4; ++k) {
                    if (vals[k] > worst[k]) {
                        worst[k] = vals[k];
                        worst_s[k] = s;
                        worst_th[k] = th;
                    }
                }
            }
        }
        const char* names[4] = {"r3", "r4_V", "r5_lambda", "r5_lie"};
        for (int k = 0; k < 4; ++k) {
            const bool ok = worst[k] < tol;
            all_pass = all_pass && ok;
            report += fmt::format(
                "matching_residuals {:<10} max = {:.6e} at (s, theta) = ({:.4f}, {:.4f})  tol = {:.0e}  {}\n",
                names[k], worst[k], worst_s[k], worst_th[k], tol, ok ? "PASS" : "FAIL");
        }
    }

    // Dissipation identity along a short closed-loop run.
    {
        constexpr double tol = 1e-4;
        SimConfig cfg;
        cfg.t_final = 5.0;
        cfg.dt = 1e-3;
        cfg.integrator_tol = 1e-10;
        const State x0{spec.gen.s0 + 0.1, 0.05, 0.0, 0.0};
        const Trajectory traj = simulate(x0, spec, cfg, Law{LawKind::nonlinear_family, {}});
        const bool completed = traj.termination == Termination::completed;
        const double gap = completed ? hhat_rate_identity_max(traj, spec)
                                     : std::numeric_limits<double>::infinity();
        const bool ok = completed && gap < tol;
        all_pass = all_pass && ok;
        report += fmt::format(
            "dissipation_identity max |dH_hat/dt + ghat(chat, qdot)| = {:.6e}  tol = {:.0e}  "
            "(termination={})  {}\n",
            gap, tol, to_string(traj.termination), ok ? "PASS" : "FAIL");
    }

    // Exact derivatives against central finite differences.
    {
        constexpr double tol = 1e-6;
        constexpr double h = 1e-5;
        double worst = 0.0, worst_s = 0.0, worst_th = 0.0;
        const FamilyEvaluator ev(spec);
        for (int i = 0; i < 5; ++i) {
            for (int j = 0; j < 5; ++j) {
                const double s = 0.35 + 0.5 * i / 4.0;
                const double th = -0.4 + 0.8 * j / 4.0;
                const GeometryAt geo = ev.geometry(s, th, geo_vhat);
                const GeometryAt sp = ev.geometry(s + h, th, geo_vhat);
                const GeometryAt sm = ev.geometry(s - h, th, geo_vhat);
                const GeometryAt tp = ev.geometry(s, th + h, geo_vhat);
                const GeometryAt tm = ev.geometry(s, th - h, geo_vhat);
                const double checks[8] = {
                    geo.dvhat(0) - (sp.vhat - sm.vhat) / (2 * h),
                    geo.dvhat(1) - (tp.vhat - tm.vhat) / (2 * h),
                    geo.ghat_grad.d_s.m11 - (sp.ghat.m11 - sm.ghat.m11) / (2 * h),
                    geo.ghat_grad.d_s.m12 - (sp.ghat.m12 - sm.ghat.m12) / (2 * h),
                    geo.ghat_grad.d_s.m22 - (sp.ghat.m22 - sm.ghat.m22) / (2 * h),
                    geo.ghat_grad.d_theta.m11 - (tp.ghat.m11 - tm.ghat.m11) / (2 * h),
                    geo.ghat_grad.d_theta.m12 - (tp.ghat.m12 - tm.ghat.m12) / (2 * h),
                    geo.ghat_grad.d_theta.m22 - (tp.ghat.m22 - tm.ghat.m22) / (2 * h),
                };
                for (double c : checks) {
                    if (std::abs(c) > worst) {
                        worst = std::abs(c);
                        worst_s = s;
                        worst_th = th;
                    }
                }
            }
        }
        const bool ok = worst < tol;
        all_pass = all_pass && ok;
        report += fmt::format(
            "derivative_oracles max |exact - FD| = {:.6e} at (s, theta) = ({:.4f}, {:.4f})  tol = {:.0e}  {}\n",
            worst, worst_s, worst_th, tol, ok ? "PASS" : "FAIL");
    }

    report += fmt::format("verify: {}\n", all_pass ? "PASS" : "FAIL");
    write_file(out / "verify.txt", report);
    fmt::print("{}", report);
    return all_pass ? 0 : 3;
}

std::string bool_str(bool b) { return b ? "true" : "false"; }

int cmd_stability(const RunConfig& rc, const std::filesystem::path& out) {
    const StabilityReport r = stability_conditions(rc.spec);
    std::string txt;
    if (r.equilibrium_singular)
        txt += "equilibrium inside the excluded strip; conditions not evaluable\n";
    const auto mat = [](const Eigen::Matrix2d& m) {
        return fmt::format("[[{:.12g}, {:.12g}], [{:.12g}, {:.12g}]]", m(0, 0), m(0, 1), m(1, 0), m(1, 1));
    };
    txt += fmt::format("ghat(0)      = {}\n", mat(r.ghat0));
    txt += fmt::format("ghat.chat(0) = {}\n", mat(r.ghatchat0));
    txt += fmt::format("D2vhat(0)    = {}\n", mat(r.d2vhat0));
    txt += fmt::format("det ghat(0)      = {:.12g}  positive: {}\n", r.det_ghat, bool_str(r.ok_det_ghat));
    txt += fmt::format("tr  ghat(0)      = {:.12g}  positive: {}\n", r.tr_ghat, bool_str(r.ok_tr_ghat));
    txt += fmt::format("det ghat.chat(0) = {:.12g}  nonnegative(sym): {}\n", r.det_ghatchat,
                       bool_str(r.ok_det_ghatchat));
    txt += fmt::format("tr  ghat.chat(0) = {:.12g}  positive: {}\n", r.tr_ghatchat,
                       bool_str(r.ok_tr_ghatchat));
    txt += fmt::format("det D2vhat(0)    = {:.12g}  positive: {}\n", r.det_d2vhat,
                       bool_str(r.ok_det_d2vhat));
    txt += fmt::format("tr  D2vhat(0)    = {:.12g}  positive: {}\n", r.tr_d2vhat, bool_str(r.ok_tr_d2vhat));
    txt += fmt::format("overall = {}\n", bool_str(r.overall));
    write_file(out / "stability.txt", txt);

    std::string csv =
        "det_ghat,tr_ghat,det_ghatchat,tr_ghatchat,det_d2vhat,tr_d2vhat,ok_det_ghat,ok_tr_ghat,"
        "ok_det_ghatchat,ok_tr_ghatchat,ok_det_d2vhat,ok_tr_d2vhat,overall,equilibrium_singular\n";
    csv += fmt::format("{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{},{},{},{},{},{},{},{}\n",
                       r.det_ghat, r.tr_ghat, r.det_ghatchat, r.tr_ghatchat, r.det_d2vhat, r.tr_d2vhat,
                       int(r.ok_det_ghat), int(r.ok_tr_ghat), int(r.ok_det_ghatchat),
                       int(r.ok_tr_ghatchat), int(r.ok_det_d2vhat), int(r.ok_tr_d2vhat), int(r.overall),
                       int(r.equilibrium_singular));
    write_file(out / "stability.csv", csv);
    fmt::print("{}", txt);
    return 0;
}

std::string linearization_text(const LinearizationResult& r) {
    std::string txt;
    txt += "A =\n";
    for (int i = 0; i < 4; ++i)
        txt += fmt::format("  [{: .12g}, {: .12g}, {: .12g}, {: .12g}]\n", r.A(i, 0), r.A(i, 1), r.A(i, 2),
                           r.A(i, 3));
    for (int i = 0; i < 4; ++i)
        txt += fmt::format("pole_{} = {:.12g} {:+.12g}i\n", i, r.poles[i].real(), r.poles[i].imag());
    txt += fmt::format("charpoly_residual_max = {:.6e}\n", r.charpoly_residual_max);
    const LinearGains& g = r.gains_equivalent;
    txt += fmt::format("gains: a8 = {:.12g}, Kbp = {:.12g}, Kap = {:.12g}, Kbd = {:.12g}, Kad = {:.12g}\n",
                       g.a8, g.Kbp, g.Kap, g.Kbd, g.Kad);
    return txt;
}

std::string linearization_csv(const LinearizationResult& r) {
    std::string csv = "name,value\n";
    const LinearGains& g = r.gains_equivalent;
    csv += fmt::format("a8,{:.17g}\n", g.a8);
    csv += fmt::format("Kbp,{:.17g}\n", g.Kbp);
    csv += fmt::format("Kap,{:.17g}\n", g.Kap);
    csv += fmt::format("Kbd,{:.17g}\n", g.Kbd);
    csv += fmt::format("Kad,{:.17g}\n", g.Kad);
    for (int i = 0; i < 4; ++i) {
        csv += fmt::format("pole_{}_re,{:.17g}\n", i, r.poles[i].real());
        csv += fmt::format("pole_{}_im,{:.17g}\n", i, r.poles[i].imag());
    }
    csv += fmt::format("charpoly_residual_max,{:.17g}\n", r.charpoly_residual_max);
    return csv;
}

int cmd_linearize(const RunConfig& rc, const Law& law, const std::filesystem::path& out) {
    try {
        const LinearizationResult r = linearize(rc.spec, law);
        const std::string txt = linearization_text(r);
        write_file(out / "linearize.txt", txt);
        write_file(out / "linearize.csv", linearization_csv(r));
        fmt::print("{}", txt);
    } catch (const non_equilibrium_error& e) {
        const std::string txt = fmt::format("non_equilibrium: {}\n", e.what());
        write_file(out / "linearize.txt", txt);
        fmt::print("{}", txt);
    }
    return 0;
}

int cmd_fit(const RunConfig& rc, const std::filesystem::path& out) {
    if (!rc.fit_target) throw config_error("fit: section required for the fit command");
    FitInfo info;
    const FamilySpec fitted = fit_linear_gains(*rc.fit_target, rc.spec, &info);
    const LinearizationResult lin = linearize(fitted, Law{LawKind::nonlinear_family, {}});

    std::string txt;
    txt += fmt::format("fitted: mu1'(0) = {:.12g}, w''(0) = {:.12g}, k1 = {:.12g}, k2 = {:.12g}\n",
                       fitted.gen.mu1.c[1], 2.0 * fitted.gen.w.c[2], fitted.gen.k1, fitted.gen.k2);
    txt += fmt::format("newton: iterations = {}, residual = {:.6e}\n", info.iterations, info.residual);
    txt += linearization_text(lin);
    write_file(out / "fit.txt", txt);

    std::string csv = "name,value\n";
    csv += fmt::format("mu1_slope,{:.17g}\n", fitted.gen.mu1.c[1]);
    csv += fmt::format("w_curvature,{:.17g}\n", 2.0 * fitted.gen.w.c[2]);
    csv += fmt::format("k1,{:.17g}\n", fitted.gen.k1);
    csv += fmt::format("k2,{:.17g}\n", fitted.gen.k2);
    csv += fmt::format("iterations,{}\n", info.iterations);
    csv += fmt::format("residual,{:.17g}\n", info.residual);
    write_file(out / "fit.csv", csv);
    fmt::print("{}", txt);
    return 0;
}

int cmd_basin(const RunConfig& rc, const Law& law, const std::filesystem::path& out) {
    if (!rc.basin) throw config_error("basin: section required for the basin command");
    const BasinConfig& bc = *rc.basin;
    const BasinResult res = basin_estimate(rc.spec, law, bc.grid, rc.sim, bc.capture_radius, bc.threads);

    std::string csv = "s,theta,s_dot,theta_dot,termination,final_dist,captured\n";
    for (const BasinPoint& p : res.points)
        csv += fmt::format("{:.17g},{:.17g},{:.17g},{:.17g},{},{:.17g},{}\n", p.x0.s, p.x0.theta,
                           p.x0.s_dot, p.x0.theta_dot, to_string(p.termination), p.final_dist,
                           int(p.captured));
    write_file(out / "basin.csv", csv);

    const std::string txt = fmt::format("points = {}\ncaptured_fraction = {:.17g}\n", res.points.size(),
                                        res.fraction);
    write_file(out / "basin.txt", txt);
    fmt::print("{}", txt);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ball-and-beam matching control toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    std::string law_name = "nonlinear";
    std::string x0_text;
    std::string out_dir = ".";
    bool emit_plots = false;

    const auto add_common = [&](CLI::App* cmd, bool with_law) {
        cmd->add_option("--config", config_path, "configuration file")->required();
        cmd->add_option("--out", out_dir, "output directory");
        if (with_law)
            cmd->add_option("--law", law_name, "control law: nonlinear|linear|open");
        return cmd;
    };

    CLI::App* c_sim = add_common(app.add_subcommand("simulate", "integrate one trajectory"), true);
    c_sim->add_option("--x0", x0_text, "initial state s,theta,s_dot,theta_dot");
    c_sim->add_flag("--emit-plots", emit_plots, "also write a gnuplot script");
    add_common(app.add_subcommand("verify", "matching-condition and derivative checks"), false);
    add_common(app.add_subcommand("stability", "six local stability tests"), false);
    add_common(app.add_subcommand("linearize", "closed-loop Jacobian, poles, gains"), true);
    add_common(app.add_subcommand("fit", "match a linear gain set with a family member"), false);
    add_common(app.add_subcommand("basin", "basin-of-attraction grid estimate"), true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        const RunConfig rc = load_config(config_path);
        const std::filesystem::path out(out_dir);
        std::filesystem::create_directories(out);

        if (app.got_subcommand("simulate")) {
            const State x0 = x0_text.empty() ? rc.x0 : parse_x0(x0_text);
            return cmd_simulate(rc, x0, make_law(rc, law_name), out, emit_plots);
        }
        if (app.got_subcommand("verify")) return cmd_verify(rc, out);
        if (app.got_subcommand("stability")) return cmd_stability(rc, out);
        if (app.got_subcommand("linearize")) return cmd_linearize(rc, make_law(rc, law_name), out);
        if (app.got_subcommand("fit")) return cmd_fit(rc, out);
        if (app.got_subcommand("basin")) return cmd_basin(rc, make_law(rc, law_name), out);
        return 1;
    } catch (const fit_error& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 4;
    } catch (const config_error& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 1;
    } catch (const invariant_error& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 1;
    }
}
