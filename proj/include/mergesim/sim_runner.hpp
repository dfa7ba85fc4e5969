#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mergesim/config.hpp"
#include "mergesim/rng.hpp"
#include "mergesim/types.hpp"

namespace mergesim {

/// Exact zero-order-hold step of the double integrator, with the speed band
/// enforced piecewise-exactly: if the speed would cross a bound mid-step the
/// position integral switches to the saturated speed at the crossing time.
VehicleState step_dynamics(const VehicleState& state, double u, double dt, double v_min,
                           double v_max);

/// Adds independent bounded uniform noise to position and speed and records
/// the realized samples.
MeasuredState measure(const VehicleState& state, const NoiseConfig& noise, double t,
                      RngStream& rng);

/// Instantaneous fuel rate f_cruise(v) + f_accel(v) * u, floored at zero
/// (no fuel is recovered while braking).
double fuel_rate(double v, double u, const FuelModel& fuel);

/// Inner-loop velocity target: the desired acceleration mapped onto the
/// speed setpoint one actuation period ahead.
double actuation_emulation(double v_star, double u_star, double dT);

enum class TickQpStatus : std::uint8_t { held = 0, optimal = 1, infeasible = 2 };

struct TraceRow {
    double t = 0.0;
    VehicleId id = 0;
    int index = 0;
    Lane lane = Lane::main;
    double x = 0.0;
    double v = 0.0;
    double u = 0.0;       // control held from this tick forward
    double x_meas = 0.0;
    double v_meas = 0.0;
    double b1 = 0.0;      // NaN when no preceding vehicle
    double b2 = 0.0;      // NaN when no merge conflict
    double b3 = 0.0;
    double b4 = 0.0;
    bool event1 = false;
    bool event2 = false;
    bool event3 = false;
    TickQpStatus qp_status = TickQpStatus::held;
};

struct Trace {
    std::vector<TraceRow> rows;
};

struct RunMetrics {
    double avg_travel_time = 0.0;  // s, over exited vehicles
    double avg_half_u2 = 0.0;      // integral of u^2/2, averaged over exited vehicles
    double avg_fuel = 0.0;         // fuel-model units, averaged over exited vehicles
    std::uint64_t qp_solve_count = 0;   // control-update instances
    std::uint64_t infeasible_count = 0; // instances whose tracking QP was infeasible
    double min_b1 = 0.0;  // worst rear-end margin over all ticks/vehicles (true states)
    double min_b2 = 0.0;  // worst merging margin
    std::array<std::uint64_t, 3> event_counts{};  // triggers by kind (event mode)

    // Diagnostics.
    std::uint64_t solver_invocations = 0;   // raw QP solves incl. sign probes
    std::uint64_t sign_probe_infeasible = 0;
    std::uint64_t deferred_entries = 0;
    std::uint64_t packets_published = 0;
    std::uint64_t packets_delivered = 0;
    std::uint64_t protocol_errors = 0;
    std::uint32_t vehicles_spawned = 0;
    std::uint32_t vehicles_exited = 0;
    std::uint64_t ticks = 0;
    double sim_time = 0.0;
};

struct RunResult {
    RunMetrics metrics;
    Trace trace;
};

/// Runs one closed-loop scenario to completion (all spawned vehicles through
/// the merging point, or the hard time stop). The master loop ticks at the
/// sensor sampling period; each tick integrates held controls, processes MP
/// crossings, measures, triggers/solves controller updates, routes state
/// packets and admits arrivals, in that fixed order. Infeasible QPs apply
/// the hardest admissible braking and are counted, never fatal.
RunResult run_scenario(const ScenarioConfig& cfg, std::uint64_t seed);

}  // namespace mergesim
