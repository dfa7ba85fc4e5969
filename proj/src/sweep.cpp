#include "mergesim/sweep.hpp"

#include <cstdio>
#include <future>
#include <sstream>
#include <thread>

namespace mergesim {

std::vector<MatchedPair> run_matched_sweep(const ScenarioConfig& base,
                                           const std::vector<double>& alphas,
                                           const std::vector<std::uint64_t>& seeds,
                                           bool parallel) {
    struct Job {
        double alpha;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (double a : alphas) {
        for (std::uint64_t s : seeds) jobs.push_back({a, s});
    }

    auto run_job = [&base](const Job& job) {
        MatchedPair pair;
        pair.alpha = job.alpha;
        pair.seed = job.seed;
        ScenarioConfig cfg = base;
        cfg.controller.alpha = job.alpha;
        cfg.controller.beta =
            beta_from_alpha(job.alpha, cfg.controller.u_max, cfg.controller.u_min);
        cfg.seed = job.seed;
        cfg.mode = ControllerMode::event;
        pair.event_run = run_scenario(cfg, job.seed);
        cfg.mode = ControllerMode::time;
        pair.time_run = run_scenario(cfg, job.seed);
        return pair;
    };

    std::vector<MatchedPair> out(jobs.size());
    if (!parallel || jobs.size() <= 1) {
        for (std::size_t i = 0; i < jobs.size(); ++i) out[i] = run_job(jobs[i]);
        return out;
    }

    const std::size_t workers =
        std::max<std::size_t>(1, std::min<std::size_t>(std::thread::hardware_concurrency(),
                                                       jobs.size()));
    std::vector<std::future<void>> futures;
    std::atomic<std::size_t> cursor{0};
    for (std::size_t w = 0; w < workers; ++w) {
        futures.push_back(std::async(std::launch::async, [&]() {
            for (;;) {
                const std::size_t i = cursor.fetch_add(1);
                if (i >= jobs.size()) return;
                out[i] = run_job(jobs[i]);
            }
        }));
    }
    for (auto& f : futures) f.get();
    return out;
}

std::vector<ComparisonBlock> aggregate_comparison(const std::vector<MatchedPair>& pairs) {
    std::vector<ComparisonBlock> blocks;
    for (const auto& pair : pairs) {
        ComparisonBlock* blk = nullptr;
        for (auto& b : blocks) {
            if (b.alpha == pair.alpha) blk = &b;
        }
        if (!blk) {
            blocks.push_back({});
            blk = &blocks.back();
            blk->alpha = pair.alpha;
        }
        blk->event_travel_time += pair.event_run.metrics.avg_travel_time;
        blk->time_travel_time += pair.time_run.metrics.avg_travel_time;
        blk->event_half_u2 += pair.event_run.metrics.avg_half_u2;
        blk->time_half_u2 += pair.time_run.metrics.avg_half_u2;
        blk->event_fuel += pair.event_run.metrics.avg_fuel;
        blk->time_fuel += pair.time_run.metrics.avg_fuel;
        blk->event_qp_count += pair.event_run.metrics.qp_solve_count;
        blk->time_qp_count += pair.time_run.metrics.qp_solve_count;
        blk->event_infeasible += pair.event_run.metrics.infeasible_count;
        blk->time_infeasible += pair.time_run.metrics.infeasible_count;
    }
    // Per-alpha seed counts are equal, so averaging the sums keeps the
    // comparison apples-to-apples.
    std::size_t seeds_per_alpha = 0;
    for (const auto& pair : pairs) {
        if (pair.alpha == blocks.front().alpha) ++seeds_per_alpha;
    }
    if (seeds_per_alpha > 1) {
        for (auto& b : blocks) {
            const double n = static_cast<double>(seeds_per_alpha);
            b.event_travel_time /= n;
            b.time_travel_time /= n;
            b.event_half_u2 /= n;
            b.time_half_u2 /= n;
            b.event_fuel /= n;
            b.time_fuel /= n;
        }
    }
    return blocks;
}

std::string comparison_table(const std::vector<ComparisonBlock>& blocks) {
    std::ostringstream os;
    char line[160];
    os << "# mergesim comparison v1\n";
    for (const auto& b : blocks) {
        std::snprintf(line, sizeof line, "alpha=%g\n", b.alpha);
        os << line;
        std::snprintf(line, sizeof line, "  %-28s %14s %14s\n", "item", "event", "time");
        os << line;
        std::snprintf(line, sizeof line, "  %-28s %14.3f %14.3f\n", "avg travel time [s]",
                      b.event_travel_time, b.time_travel_time);
        os << line;
        std::snprintf(line, sizeof line, "  %-28s %14.4f %14.4f\n", "avg 1/2 u^2",
                      b.event_half_u2, b.time_half_u2);
        os << line;
        std::snprintf(line, sizeof line, "  %-28s %14.3f %14.3f\n", "avg fuel",
                      b.event_fuel, b.time_fuel);
        os << line;
        std::snprintf(line, sizeof line, "  %-28s %6.1f%% (%llu) %11s (%llu)\n",
                      "QP solves", 100.0 * b.qp_ratio(),
                      static_cast<unsigned long long>(b.event_qp_count), "100.0%",
                      static_cast<unsigned long long>(b.time_qp_count));
        os << line;
        std::snprintf(line, sizeof line, "  %-28s %14llu %14llu\n", "infeasible cases",
                      static_cast<unsigned long long>(b.event_infeasible),
                      static_cast<unsigned long long>(b.time_infeasible));
        os << line;
    }
    return os.str();
}

}  // namespace mergesim
