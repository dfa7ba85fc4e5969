#include "cli_app.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "mergesim/config.hpp"
#include "mergesim/sweep.hpp"
#include "mergesim/trace_io.hpp"

namespace mergesim {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

std::string fmt_alpha(double alpha) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", alpha);
    return buf;
}

std::string fmt17(double v) {
    if (std::isnan(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string run_basename(ControllerMode mode, double alpha, std::uint64_t seed) {
    std::ostringstream os;
    os << mode_name(mode) << "_a" << fmt_alpha(alpha) << "_s" << seed;
    return os.str();
}

void write_run_outputs(const std::filesystem::path& out_dir, const ScenarioConfig& cfg,
                       const RunResult& result, bool fixed_epoch) {
    const std::string base = run_basename(cfg.mode, cfg.controller.alpha, cfg.seed);
    write_trace_file((out_dir / ("trace_" + base + ".csv")).string(), result.trace);
    write_summary_file((out_dir / ("summary_" + base + ".txt")).string(), result.metrics, cfg,
                       fixed_epoch);
}

struct RunOptions {
    std::string config_path;
    std::string mode = "";
    std::vector<std::uint64_t> seeds;
    std::vector<double> alphas;
    std::string out_dir = "out";
    std::string scripted_path;
    bool fixed_epoch = false;
};

int cmd_run(const RunOptions& opt) {
    ValidationReport report;
    ScenarioConfig base = load_config(opt.config_path, &report);
    for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
    if (!report.ok()) {
        std::cerr << "invalid config " << opt.config_path << ":\n";
        for (const auto& e : report.errors) std::cerr << "  " << e << '\n';
        return kExitConfig;
    }

    if (!opt.scripted_path.empty()) {
        base.arrivals.scripted = load_scripted_arrivals(opt.scripted_path);
        const ValidationReport again = validate_config(base);
        if (!again.ok()) {
            std::cerr << "invalid scripted arrivals " << opt.scripted_path << ":\n";
            for (const auto& e : again.errors) std::cerr << "  " << e << '\n';
            return kExitConfig;
        }
    }

    std::string mode = opt.mode.empty() ? mode_name(base.mode) : opt.mode;
    const std::vector<std::uint64_t> seeds = opt.seeds.empty()
                                                 ? std::vector<std::uint64_t>{base.seed}
                                                 : opt.seeds;
    const std::vector<double> alphas =
        opt.alphas.empty() ? std::vector<double>{base.controller.alpha} : opt.alphas;
    for (double a : alphas) {
        if (!(a >= 0.0 && a < 1.0)) {
            std::cerr << "invalid --alpha value " << a << ": must lie in [0, 1)\n";
            return kExitConfig;
        }
    }

    std::filesystem::create_directories(opt.out_dir);
    const std::filesystem::path out_dir(opt.out_dir);

    if (mode == "both") {
        const auto pairs = run_matched_sweep(base, alphas, seeds);
        for (const auto& pair : pairs) {
            ScenarioConfig cfg = base;
            cfg.controller.alpha = pair.alpha;
            cfg.controller.beta =
                beta_from_alpha(pair.alpha, cfg.controller.u_max, cfg.controller.u_min);
            cfg.seed = pair.seed;
            cfg.mode = ControllerMode::event;
            write_run_outputs(out_dir, cfg, pair.event_run, opt.fixed_epoch);
            cfg.mode = ControllerMode::time;
            write_run_outputs(out_dir, cfg, pair.time_run, opt.fixed_epoch);
        }
        const std::string table = comparison_table(aggregate_comparison(pairs));
        std::ofstream cmp(out_dir / "comparison.txt", std::ios::binary);
        cmp << table;
        std::cout << table;
        return kExitOk;
    }

    ControllerMode m;
    if (mode == "event") m = ControllerMode::event;
    else if (mode == "time") m = ControllerMode::time;
    else {
        std::cerr << "invalid --mode '" << mode << "' (expected event, time or both)\n";
        return kExitConfig;
    }
    for (double alpha : alphas) {
        for (std::uint64_t seed : seeds) {
            ScenarioConfig cfg = base;
            cfg.mode = m;
            cfg.seed = seed;
            cfg.controller.alpha = alpha;
            cfg.controller.beta =
                beta_from_alpha(alpha, cfg.controller.u_max, cfg.controller.u_min);
            const RunResult result = run_scenario(cfg, seed);
            write_run_outputs(out_dir, cfg, result, opt.fixed_epoch);
            std::cout << run_basename(m, alpha, seed) << ": travel "
                      << result.metrics.avg_travel_time << " s, QPs "
                      << result.metrics.qp_solve_count << ", infeasible "
                      << result.metrics.infeasible_count << ", min b1 "
                      << result.metrics.min_b1 << ", min b2 " << result.metrics.min_b2
                      << '\n';
        }
    }
    return kExitOk;
}

struct PlotOptions {
    std::string trace_path;
    std::string trace2_path;
    std::string kind = "constraints";
    std::string out_path;
};

int cmd_plotdata(const PlotOptions& opt) {
    const Trace trace = read_trace_file(opt.trace_path);
    std::ofstream out(opt.out_path, std::ios::binary);
    if (!out) {
        std::cerr << "cannot open output file " << opt.out_path << '\n';
        return kExitRuntime;
    }

    if (opt.kind == "constraints") {
        // Per-vehicle time series of the rear-end and merging margins.
        out << "t,id,b1,b2\n";
        for (const auto& r : trace.rows) {
            if (std::isnan(r.b1) && std::isnan(r.b2)) continue;
            out << fmt17(r.t) << ',' << r.id << ',' << fmt17(r.b1) << ',' << fmt17(r.b2)
                << '\n';
        }
        return kExitOk;
    }
    if (opt.kind == "margins") {
        if (opt.trace2_path.empty()) {
            std::cerr << "--kind margins needs --trace2 with the paired run\n";
            return kExitConfig;
        }
        const Trace other = read_trace_file(opt.trace2_path);
        // Join the merging margin of the paired runs on (t, id).
        std::map<std::pair<double, VehicleId>, std::pair<double, double>> joined;
        for (const auto& r : trace.rows) {
            if (!std::isnan(r.b2)) {
                joined[{r.t, r.id}] = {r.b2, std::numeric_limits<double>::quiet_NaN()};
            }
        }
        for (const auto& r : other.rows) {
            if (std::isnan(r.b2)) continue;
            auto it = joined.find({r.t, r.id});
            if (it == joined.end()) {
                joined[{r.t, r.id}] = {std::numeric_limits<double>::quiet_NaN(), r.b2};
            } else {
                it->second.second = r.b2;
            }
        }
        out << "t,id,b2_a,b2_b\n";
        for (const auto& [key, val] : joined) {
            out << fmt17(key.first) << ',' << key.second << ',' << fmt17(val.first) << ','
                << fmt17(val.second) << '\n';
        }
        return kExitOk;
    }
    std::cerr << "unknown --kind '" << opt.kind << "' (expected constraints or margins)\n";
    return kExitConfig;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Merging-corridor simulator: event-triggered vs time-driven safety filters"};
    app.require_subcommand(1);

    RunOptions run_opt;
    CLI::App* run = app.add_subcommand("run", "run scenarios and write traces/summaries");
    run->add_option("--config", run_opt.config_path, "scenario config (JSON)")->required();
    run->add_option("--mode", run_opt.mode, "event, time or both (default: config)");
    run->add_option("--seeds", run_opt.seeds, "seed list")->delimiter(',');
    run->add_option("--alpha", run_opt.alphas, "time/energy weight list")->delimiter(',');
    run->add_option("--out", run_opt.out_dir, "output directory (default: out)");
    run->add_option("--scripted-arrivals", run_opt.scripted_path,
                    "JSON file of {lane,t,v0} records overriding the arrival process");
    run->add_flag("--fixed-epoch", run_opt.fixed_epoch,
                  "stamp outputs with a fixed epoch for byte-identical reruns");

    PlotOptions plot_opt;
    CLI::App* plot = app.add_subcommand("plotdata", "extract plot-ready series from a trace");
    plot->add_option("--trace", plot_opt.trace_path, "input trace CSV")->required();
    plot->add_option("--trace2", plot_opt.trace2_path, "paired trace for --kind margins");
    plot->add_option("--kind", plot_opt.kind, "constraints or margins");
    plot->add_option("--out", plot_opt.out_path, "output data file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (run->parsed()) return cmd_run(run_opt);
        if (plot->parsed()) return cmd_plotdata(plot_opt);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const TraceParseError& e) {
        std::cerr << "trace error: " << e.what() << '\n';
        return kExitRuntime;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitOk;
}

}  // namespace mergesim
