#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mergesim/sim_runner.hpp"

namespace mergesim {

/// One matched event/time pair on a shared seed and alpha.
struct MatchedPair {
    double alpha = 0.0;
    std::uint64_t seed = 0;
    RunResult event_run;
    RunResult time_run;
};

/// Runs the full (alpha x seed x mode) grid with matched seeds. Scenarios are
/// independent, so they run in parallel; results come back in deterministic
/// (alpha, seed) order regardless of scheduling.
std::vector<MatchedPair> run_matched_sweep(const ScenarioConfig& base,
                                           const std::vector<double>& alphas,
                                           const std::vector<std::uint64_t>& seeds,
                                           bool parallel = true);

/// Per-alpha aggregation of a matched sweep, mirroring the usual comparison
/// table: travel time, control effort, fuel, QP count with event/time
/// percentage, infeasible count.
struct ComparisonBlock {
    double alpha = 0.0;
    double event_travel_time = 0.0, time_travel_time = 0.0;
    double event_half_u2 = 0.0, time_half_u2 = 0.0;
    double event_fuel = 0.0, time_fuel = 0.0;
    std::uint64_t event_qp_count = 0, time_qp_count = 0;
    std::uint64_t event_infeasible = 0, time_infeasible = 0;
    double qp_ratio() const {
        return time_qp_count == 0 ? 0.0
                                  : static_cast<double>(event_qp_count) /
                                        static_cast<double>(time_qp_count);
    }
};

std::vector<ComparisonBlock> aggregate_comparison(const std::vector<MatchedPair>& pairs);

std::string comparison_table(const std::vector<ComparisonBlock>& blocks);

}  // namespace mergesim
