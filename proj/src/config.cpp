#include "mergesim/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace mergesim {

using nlohmann::json;

ScenarioConfig default_config() {
    ScenarioConfig cfg;
    cfg.controller.beta =
        beta_from_alpha(cfg.controller.alpha, cfg.controller.u_max, cfg.controller.u_min);
    return cfg;
}

namespace {

void check(ValidationReport& rep, bool ok, const std::string& msg) {
    if (!ok) rep.errors.push_back(msg);
}

bool finite(double v) { return std::isfinite(v); }

void warn_unknown_keys(ValidationReport* rep, const json& obj, const std::string& scope,
                       const std::set<std::string>& known) {
    if (!rep || !obj.is_object()) return;
    for (const auto& item : obj.items()) {
        if (!known.count(item.key())) {
            rep->warnings.push_back(scope + item.key() + ": unknown key, ignored");
        }
    }
}

Lane parse_lane(const json& j, const std::string& where) {
    const std::string s = j.get<std::string>();
    if (s == "main") return Lane::main;
    if (s == "merging" || s == "merge") return Lane::merging;
    throw ConfigError(where + ": lane must be \"main\" or \"merging\", got \"" + s + "\"");
}

}  // namespace

ValidationReport validate_config(const ScenarioConfig& cfg) {
    ValidationReport rep;
    const auto& p = cfg.controller;
    const auto& g = cfg.geometry;
    const auto& a = cfg.arrivals;
    const auto& n = cfg.noise;

    check(rep, g.length > 0.0, "geometry.length: must be > 0");
    check(rep, g.exit_len >= 0.0, "geometry.exit_len: must be >= 0");

    check(rep, p.phi > 0.0, "controller.phi: must be > 0");
    check(rep, p.delta >= 0.0, "controller.delta: must be >= 0");
    check(rep, p.k1 > 0.0 && p.k2 > 0.0 && p.k3 > 0.0 && p.k4 > 0.0,
          "controller.k1..k4: class-K gains must be > 0");
    check(rep, p.c3 > 0.0, "controller.c3: must be > 0");
    check(rep, p.lambda > 0.0, "controller.lambda: must be > 0");
    check(rep, p.alpha >= 0.0 && p.alpha < 1.0, "controller.alpha: must lie in [0, 1)");
    check(rep, p.u_min < 0.0 && p.u_max > 0.0, "controller.u_min/u_max: need u_min < 0 < u_max");
    check(rep, p.v_min >= 0.0 && p.v_min < p.v_max,
          "controller.v_min/v_max: need 0 <= v_min < v_max");
    check(rep, p.s_x > 0.0 && p.s_v > 0.0, "controller.s_x/s_v: trigger bounds must be > 0");
    check(rep, p.dt_ctrl > 0.0, "controller.dt_ctrl: must be > 0");
    check(rep, p.dt_actuation > 0.0, "controller.dt_actuation: must be > 0");
    check(rep, p.sample_hz > 0.0, "controller.sample_hz: must be > 0");

    if (p.alpha >= 0.0 && p.alpha < 1.0 && p.u_min < 0.0 && p.u_max > 0.0) {
        const double expect = beta_from_alpha(p.alpha, p.u_max, p.u_min);
        check(rep, std::abs(p.beta - expect) <= 1e-12 * std::max(1.0, std::abs(expect)),
              "controller.beta: inconsistent with alpha, expected " + std::to_string(expect));
    }

    if (n.enabled) {
        check(rep, n.x_bound >= 0.0 && n.v_bound >= 0.0, "noise.x_bound/v_bound: must be >= 0");
        check(rep, p.s_x >= n.x_bound,
              "controller.s_x: trigger bound must be >= noise.x_bound so bounded measurement "
              "noise cannot fake or mask a boundary crossing");
        check(rep, p.s_v >= n.v_bound,
              "controller.s_v: trigger bound must be >= noise.v_bound so bounded measurement "
              "noise cannot fake or mask a boundary crossing");
    }

    check(rep, a.rate_main >= 0.0 && a.rate_merge >= 0.0, "arrivals.rate: must be >= 0");
    check(rep, a.window >= 0.0, "arrivals.window: must be >= 0");
    check(rep, a.v0_min > 0.0, "arrivals.v0_min: must be > 0");
    check(rep, a.v0_min <= a.v0_max, "arrivals.v0_min/v0_max: need v0_min <= v0_max");
    check(rep, a.v0_min >= p.v_min && a.v0_max <= p.v_max,
          "arrivals.v0 range: must lie within [v_min, v_max]");
    for (std::size_t i = 0; i < a.scripted.size(); ++i) {
        const auto& s = a.scripted[i];
        const std::string at = "arrivals.scripted[" + std::to_string(i) + "]";
        check(rep, s.t >= 0.0, at + ".t: must be >= 0");
        check(rep, s.v0 > 0.0 && s.v0 >= p.v_min && s.v0 <= p.v_max,
              at + ".v0: must lie within (0, v_max] and the speed band");
    }

    check(rep, cfg.max_sim_time > 0.0, "max_sim_time: must be > 0");
    check(rep, cfg.actuation_lag_tau > 0.0, "actuation_lag_tau: must be > 0");

    check(rep, finite(p.beta) && finite(g.length) && finite(p.lambda), "config: non-finite value");

    if (p.dt_actuation > p.dt_ctrl) {
        rep.warnings.push_back(
            "controller.dt_actuation exceeds dt_ctrl; the inner actuation loop is slower than "
            "the control update period");
    }
    return rep;
}

ScenarioConfig load_config(const std::string& path, ValidationReport* report) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config parse failure in " + path + ": " + e.what());
    }

    ScenarioConfig cfg = default_config();

    warn_unknown_keys(report, j, "",
                      {"geometry", "controller", "arrivals", "noise", "fuel", "mode",
                       "actuation", "actuation_lag_tau", "seed", "max_sim_time"});

    try {
        if (j.contains("geometry")) {
            const auto& g = j["geometry"];
            warn_unknown_keys(report, g, "geometry.", {"length", "exit_len"});
            if (g.contains("length")) cfg.geometry.length = g["length"].get<double>();
            if (g.contains("exit_len")) cfg.geometry.exit_len = g["exit_len"].get<double>();
        }
        if (j.contains("controller")) {
            const auto& c = j["controller"];
            warn_unknown_keys(report, c, "controller.",
                              {"phi", "delta", "k1", "k2", "k3", "k4", "c3", "lambda", "alpha",
                               "u_min", "u_max", "v_min", "v_max", "s_x", "s_v", "dt_ctrl",
                               "dt_actuation", "sample_hz", "joint_min_rows"});
            auto& p = cfg.controller;
            if (c.contains("phi")) p.phi = c["phi"].get<double>();
            if (c.contains("delta")) p.delta = c["delta"].get<double>();
            if (c.contains("k1")) p.k1 = c["k1"].get<double>();
            if (c.contains("k2")) p.k2 = c["k2"].get<double>();
            if (c.contains("k3")) p.k3 = c["k3"].get<double>();
            if (c.contains("k4")) p.k4 = c["k4"].get<double>();
            if (c.contains("c3")) p.c3 = c["c3"].get<double>();
            if (c.contains("lambda")) p.lambda = c["lambda"].get<double>();
            if (c.contains("alpha")) p.alpha = c["alpha"].get<double>();
            if (c.contains("u_min")) p.u_min = c["u_min"].get<double>();
            if (c.contains("u_max")) p.u_max = c["u_max"].get<double>();
            if (c.contains("v_min")) p.v_min = c["v_min"].get<double>();
            if (c.contains("v_max")) p.v_max = c["v_max"].get<double>();
            if (c.contains("s_x")) p.s_x = c["s_x"].get<double>();
            if (c.contains("s_v")) p.s_v = c["s_v"].get<double>();
            if (c.contains("dt_ctrl")) p.dt_ctrl = c["dt_ctrl"].get<double>();
            if (c.contains("dt_actuation")) p.dt_actuation = c["dt_actuation"].get<double>();
            if (c.contains("sample_hz")) p.sample_hz = c["sample_hz"].get<double>();
            if (c.contains("joint_min_rows")) p.joint_min_rows = c["joint_min_rows"].get<bool>();
        }
        if (j.contains("arrivals")) {
            const auto& a = j["arrivals"];
            warn_unknown_keys(report, a, "arrivals.",
                              {"rate_main", "rate_merge", "v0_min", "v0_max", "window",
                               "max_vehicles", "scripted"});
            if (a.contains("rate_main")) cfg.arrivals.rate_main = a["rate_main"].get<double>();
            if (a.contains("rate_merge")) cfg.arrivals.rate_merge = a["rate_merge"].get<double>();
            if (a.contains("v0_min")) cfg.arrivals.v0_min = a["v0_min"].get<double>();
            if (a.contains("v0_max")) cfg.arrivals.v0_max = a["v0_max"].get<double>();
            if (a.contains("window")) cfg.arrivals.window = a["window"].get<double>();
            if (a.contains("max_vehicles"))
                cfg.arrivals.max_vehicles = a["max_vehicles"].get<std::uint32_t>();
            if (a.contains("scripted")) {
                for (std::size_t i = 0; i < a["scripted"].size(); ++i) {
                    const auto& s = a["scripted"][i];
                    ScriptedArrival sa;
                    sa.lane = parse_lane(s.at("lane"),
                                         "arrivals.scripted[" + std::to_string(i) + "]");
                    sa.t = s.at("t").get<double>();
                    sa.v0 = s.at("v0").get<double>();
                    cfg.arrivals.scripted.push_back(sa);
                }
            }
        }
        if (j.contains("noise")) {
            const auto& n = j["noise"];
            warn_unknown_keys(report, n, "noise.", {"enabled", "x_bound", "v_bound"});
            if (n.contains("enabled")) cfg.noise.enabled = n["enabled"].get<bool>();
            if (n.contains("x_bound")) cfg.noise.x_bound = n["x_bound"].get<double>();
            if (n.contains("v_bound")) cfg.noise.v_bound = n["v_bound"].get<double>();
        }
        if (j.contains("fuel")) {
            const auto& f = j["fuel"];
            warn_unknown_keys(report, f, "fuel.", {"w0", "w1", "w2", "w3", "r0", "r1", "r2"});
            if (f.contains("w0")) cfg.fuel.w0 = f["w0"].get<double>();
            if (f.contains("w1")) cfg.fuel.w1 = f["w1"].get<double>();
            if (f.contains("w2")) cfg.fuel.w2 = f["w2"].get<double>();
            if (f.contains("w3")) cfg.fuel.w3 = f["w3"].get<double>();
            if (f.contains("r0")) cfg.fuel.r0 = f["r0"].get<double>();
            if (f.contains("r1")) cfg.fuel.r1 = f["r1"].get<double>();
            if (f.contains("r2")) cfg.fuel.r2 = f["r2"].get<double>();
        }
        if (j.contains("mode")) {
            const std::string m = j["mode"].get<std::string>();
            if (m == "event") cfg.mode = ControllerMode::event;
            else if (m == "time") cfg.mode = ControllerMode::time;
            else throw ConfigError("mode: must be \"event\" or \"time\", got \"" + m + "\"");
        }
        if (j.contains("actuation")) {
            const std::string m = j["actuation"].get<std::string>();
            if (m == "ideal") cfg.actuation = ActuationMode::ideal;
            else if (m == "velocity_lag") cfg.actuation = ActuationMode::velocity_lag;
            else throw ConfigError("actuation: must be \"ideal\" or \"velocity_lag\"");
        }
        if (j.contains("actuation_lag_tau"))
            cfg.actuation_lag_tau = j["actuation_lag_tau"].get<double>();
        if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("max_sim_time")) cfg.max_sim_time = j["max_sim_time"].get<double>();
    } catch (const json::exception& e) {
        throw ConfigError("config field error in " + path + ": " + e.what());
    }

    cfg.controller.beta =
        beta_from_alpha(cfg.controller.alpha, cfg.controller.u_max, cfg.controller.u_min);

    if (report) {
        ValidationReport checks = validate_config(cfg);
        report->errors.insert(report->errors.end(), checks.errors.begin(), checks.errors.end());
        report->warnings.insert(report->warnings.end(), checks.warnings.begin(),
                                checks.warnings.end());
    }
    return cfg;
}

std::vector<ScriptedArrival> load_scripted_arrivals(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scripted-arrivals file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("scripted-arrivals parse failure in " + path + ": " + e.what());
    }
    if (!j.is_array()) throw ConfigError("scripted-arrivals file must hold a JSON array");
    std::vector<ScriptedArrival> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        ScriptedArrival sa;
        sa.lane = parse_lane(j[i].at("lane"), "scripted[" + std::to_string(i) + "]");
        sa.t = j[i].at("t").get<double>();
        sa.v0 = j[i].at("v0").get<double>();
        out.push_back(sa);
    }
    return out;
}

std::string config_to_json(const ScenarioConfig& cfg) {
    json j;
    j["geometry"] = {{"length", cfg.geometry.length}, {"exit_len", cfg.geometry.exit_len}};
    const auto& p = cfg.controller;
    j["controller"] = {{"phi", p.phi},       {"delta", p.delta},
                       {"k1", p.k1},         {"k2", p.k2},
                       {"k3", p.k3},         {"k4", p.k4},
                       {"c3", p.c3},         {"lambda", p.lambda},
                       {"alpha", p.alpha},   {"u_min", p.u_min},
                       {"u_max", p.u_max},   {"v_min", p.v_min},
                       {"v_max", p.v_max},   {"s_x", p.s_x},
                       {"s_v", p.s_v},       {"dt_ctrl", p.dt_ctrl},
                       {"dt_actuation", p.dt_actuation},
                       {"sample_hz", p.sample_hz},
                       {"joint_min_rows", p.joint_min_rows}};
    j["arrivals"] = {{"rate_main", cfg.arrivals.rate_main},
                     {"rate_merge", cfg.arrivals.rate_merge},
                     {"v0_min", cfg.arrivals.v0_min},
                     {"v0_max", cfg.arrivals.v0_max},
                     {"window", cfg.arrivals.window},
                     {"max_vehicles", cfg.arrivals.max_vehicles}};
    if (!cfg.arrivals.scripted.empty()) {
        json arr = json::array();
        for (const auto& s : cfg.arrivals.scripted) {
            arr.push_back({{"lane", lane_name(s.lane)}, {"t", s.t}, {"v0", s.v0}});
        }
        j["arrivals"]["scripted"] = arr;
    }
    j["noise"] = {{"enabled", cfg.noise.enabled},
                  {"x_bound", cfg.noise.x_bound},
                  {"v_bound", cfg.noise.v_bound}};
    j["fuel"] = {{"w0", cfg.fuel.w0}, {"w1", cfg.fuel.w1}, {"w2", cfg.fuel.w2},
                 {"w3", cfg.fuel.w3}, {"r0", cfg.fuel.r0}, {"r1", cfg.fuel.r1},
                 {"r2", cfg.fuel.r2}};
    j["mode"] = mode_name(cfg.mode);
    j["actuation"] = cfg.actuation == ActuationMode::ideal ? "ideal" : "velocity_lag";
    j["actuation_lag_tau"] = cfg.actuation_lag_tau;
    j["seed"] = cfg.seed;
    j["max_sim_time"] = cfg.max_sim_time;
    return j.dump(2);
}

}  // namespace mergesim
