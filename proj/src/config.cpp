#include "bb/config.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

namespace bb {
namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& section, std::initializer_list<const char*> allowed) {
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* k : allowed)
            if (item.key() == k) {
                known = true;
                break;
            }
        if (!known)
            throw config_error(fmt::format("{}.{}: unknown field", section, item.key()));
    }
}

double get_number(const json& j, const std::string& section, const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (!v.is_number())
        throw config_error(fmt::format("{}.{}: expected a number", section, key));
    return v.get<double>();
}

bool get_bool(const json& j, const std::string& section, const char* key, bool fallback) {
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (!v.is_boolean())
        throw config_error(fmt::format("{}.{}: expected true or false", section, key));
    return v.get<bool>();
}

int get_int(const json& j, const std::string& section, const char* key, int fallback) {
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (!v.is_number_integer())
        throw config_error(fmt::format("{}.{}: expected an integer", section, key));
    return v.get<int>();
}

std::vector<double> get_array(const json& j, const std::string& section, const char* key,
                              int exact_size = -1) {
    if (!j.contains(key))
        throw config_error(fmt::format("{}.{}: required field is missing", section, key));
    const json& v = j.at(key);
    if (!v.is_array())
        throw config_error(fmt::format("{}.{}: expected an array of numbers", section, key));
    std::vector<double> out;
    out.reserve(v.size());
    for (const json& e : v) {
        if (!e.is_number())
            throw config_error(fmt::format("{}.{}: expected an array of numbers", section, key));
        out.push_back(e.get<double>());
    }
    if (exact_size >= 0 && static_cast<int>(out.size()) != exact_size)
        throw config_error(
            fmt::format("{}.{}: expected exactly {} numbers, got {}", section, key, exact_size, out.size()));
    return out;
}

LinearGains parse_gains(const json& j, const std::string& section) {
    check_keys(j, section, {"a8", "Kbp", "Kap", "Kbd", "Kad"});
    LinearGains g;
    g.a8 = get_number(j, section, "a8", 0.0);
    g.Kbp = get_number(j, section, "Kbp", 0.0);
    g.Kap = get_number(j, section, "Kap", 0.0);
    g.Kbd = get_number(j, section, "Kbd", 0.0);
    g.Kad = get_number(j, section, "Kad", 0.0);
    for (double v : {g.a8, g.Kbp, g.Kap, g.Kbd, g.Kad})
        if (!std::isfinite(v)) throw config_error(fmt::format("{}: gains must all be finite", section));
    return g;
}

GridRange parse_range(const json& j, const std::string& section) {
    check_keys(j, section, {"lo", "hi", "n"});
    GridRange r;
    r.lo = get_number(j, section, "lo", 0.0);
    r.hi = get_number(j, section, "hi", r.lo);
    r.n = get_int(j, section, "n", 1);
    if (!std::isfinite(r.lo) || !std::isfinite(r.hi))
        throw config_error(fmt::format("{}: lo/hi must be finite", section));
    if (r.n < 1) throw config_error(fmt::format("{}.n: must be at least 1, got {}", section, r.n));
    return r;
}

}  // namespace

RunConfig parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw config_error(fmt::format("config: {}", e.what()));
    }
    if (!j.is_object()) throw config_error("config: top level must be an object");
    check_keys(j, "config",
               {"plant", "generator", "sim", "linear_gains", "fit", "basin", "verify"});

    RunConfig rc;

    if (j.contains("plant")) {
        const json& p = j.at("plant");
        if (!p.is_object()) throw config_error("plant: expected an object");
        check_keys(p, "plant", {"a3", "a4", "a5", "a6", "a7", "rho", "s_max"});
        PlantParams& pp = rc.spec.plant;
        pp.a3 = get_number(p, "plant", "a3", pp.a3);
        pp.a4 = get_number(p, "plant", "a4", pp.a4);
        pp.a5 = get_number(p, "plant", "a5", pp.a5);
        pp.a6 = get_number(p, "plant", "a6", pp.a6);
        pp.a7 = get_number(p, "plant", "a7", pp.a7);
        pp.rho = get_number(p, "plant", "rho", pp.rho);
        pp.s_max = get_number(p, "plant", "s_max", pp.s_max);
    }

    if (!j.contains("generator")) throw config_error("generator: required section is missing");
    {
        const json& g = j.at("generator");
        if (!g.is_object()) throw config_error("generator: expected an object");
        check_keys(g, "generator", {"mu1", "h", "w", "s0", "chat_gains"});
        GeneratorSpec& gs = rc.spec.gen;
        gs.mu1 = Poly(get_array(g, "generator", "mu1"));
        gs.h = Poly(get_array(g, "generator", "h"));
        gs.w = Poly(get_array(g, "generator", "w"));
        gs.s0 = get_number(g, "generator", "s0", 0.0);
        if (g.contains("chat_gains")) {
            const std::vector<double> k = get_array(g, "generator", "chat_gains", 2);
            gs.k1 = k[0];
            gs.k2 = k[1];
        }
    }

    if (j.contains("sim")) {
        const json& s = j.at("sim");
        if (!s.is_object()) throw config_error("sim: expected an object");
        check_keys(s, "sim", {"t_final", "dt", "integrator_tol", "stop_on_beam_exit", "x0"});
        rc.sim.t_final = get_number(s, "sim", "t_final", rc.sim.t_final);
        rc.sim.dt = get_number(s, "sim", "dt", rc.sim.dt);
        rc.sim.integrator_tol = get_number(s, "sim", "integrator_tol", rc.sim.integrator_tol);
        rc.sim.stop_on_beam_exit = get_bool(s, "sim", "stop_on_beam_exit", rc.sim.stop_on_beam_exit);
        if (s.contains("x0")) {
            const std::vector<double> v = get_array(s, "sim", "x0", 4);
            rc.x0 = State{v[0], v[1], v[2], v[3]};
        } else {
            rc.x0 = State{rc.spec.gen.s0, 0.0, 0.0, 0.0};
        }
    } else {
        rc.x0 = State{rc.spec.gen.s0, 0.0, 0.0, 0.0};
    }

    if (j.contains("linear_gains")) {
        const json& g = j.at("linear_gains");
        if (!g.is_object()) throw config_error("linear_gains: expected an object");
        rc.linear_gains = parse_gains(g, "linear_gains");
    }

    if (j.contains("fit")) {
        const json& f = j.at("fit");
        if (!f.is_object()) throw config_error("fit: expected an object");
        check_keys(f, "fit", {"target"});
        if (!f.contains("target")) throw config_error("fit.target: required field is missing");
        rc.fit_target = parse_gains(f.at("target"), "fit.target");
    }

    if (j.contains("basin")) {
        const json& b = j.at("basin");
        if (!b.is_object()) throw config_error("basin: expected an object");
        check_keys(b, "basin", {"s", "theta", "s_dot", "theta_dot", "capture_radius", "threads"});
        BasinConfig bc;
        for (const auto& [key, slot] :
             std::initializer_list<std::pair<const char*, GridRange*>>{{"s", &bc.grid.s},
                                                                       {"theta", &bc.grid.theta},
                                                                       {"s_dot", &bc.grid.s_dot},
                                                                       {"theta_dot", &bc.grid.theta_dot}}) {
            if (!b.contains(key))
                throw config_error(fmt::format("basin.{}: required field is missing", key));
            if (!b.at(key).is_object())
                throw config_error(fmt::format("basin.{}: expected an object with lo/hi/n", key));
            *slot = parse_range(b.at(key), fmt::format("basin.{}", key));
        }
        bc.capture_radius = get_number(b, "basin", "capture_radius", bc.capture_radius);
        if (!(std::isfinite(bc.capture_radius) && bc.capture_radius > 0.0))
            throw config_error(
                fmt::format("basin.capture_radius: must be positive and finite, got {}", bc.capture_radius));
        bc.threads = get_int(b, "basin", "threads", 0);
        if (bc.threads < 0)
            throw config_error(fmt::format("basin.threads: must be nonnegative, got {}", bc.threads));
        rc.basin = bc;
    }

    if (j.contains("verify")) {
        const json& v = j.at("verify");
        if (!v.is_object()) throw config_error("verify: expected an object");
        check_keys(v, "verify", {"ghat11_factor"});
        rc.verify.ghat11_factor = get_number(v, "verify", "ghat11_factor", 1.0);
        if (!(std::isfinite(rc.verify.ghat11_factor) && rc.verify.ghat11_factor > 0.0))
            throw config_error(fmt::format("verify.ghat11_factor: must be positive and finite, got {}",
                                           rc.verify.ghat11_factor));
    }

    // Model invariants; these throw invariant_error naming the field.
    rc.spec.validate();
    rc.sim.validate();
    return rc;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error(fmt::format("config: cannot open '{}'", path));
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

}  // namespace bb
