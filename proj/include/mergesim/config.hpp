#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mergesim/types.hpp"

namespace mergesim {

enum class ControllerMode : std::uint8_t { event = 0, time = 1 };

inline const char* mode_name(ControllerMode m) {
    return m == ControllerMode::event ? "event" : "time";
}

enum class ActuationMode : std::uint8_t { ideal = 0, velocity_lag = 1 };

struct NoiseConfig {
    bool enabled = false;
    double x_bound = 0.01;   // m, uniform noise half-width on position
    double v_bound = 0.005;  // m/s, uniform noise half-width on speed
};

struct ScriptedArrival {
    Lane lane = Lane::main;
    double t = 0.0;
    double v0 = 0.5;
};

struct ArrivalConfig {
    double rate_main = 0.2;    // vehicles/s, Poisson
    double rate_merge = 0.2;   // vehicles/s, Poisson
    double v0_min = 0.1;       // m/s, uniform initial-speed law
    double v0_max = 1.0;
    double window = 40.0;          // s, spawn window for Poisson arrivals
    std::uint32_t max_vehicles = 0;  // total cap, 0 = unlimited
    std::vector<ScriptedArrival> scripted;  // when non-empty, replaces Poisson
};

/// Polynomial fuel-rate model f_cruise(v) + f_accel(v) * u. The shipped
/// coefficients are placeholder defaults; fuel comparisons in this project
/// are only ever made as event/time ratios on matched runs.
struct FuelModel {
    double w0 = 0.1569;
    double w1 = 2.450e-2;
    double w2 = -7.415e-4;
    double w3 = 5.975e-5;
    double r0 = 7.224e-2;
    double r1 = 9.681e-2;
    double r2 = 1.075e-3;
};

struct ScenarioConfig {
    CorridorGeometry geometry;
    ControllerParams controller;
    ArrivalConfig arrivals;
    NoiseConfig noise;
    FuelModel fuel;
    ControllerMode mode = ControllerMode::event;
    ActuationMode actuation = ActuationMode::ideal;
    double actuation_lag_tau = 0.25;  // s, time constant for velocity_lag mode
    std::uint64_t seed = 1;
    double max_sim_time = 600.0;  // s, hard stop
};

struct ValidationReport {
    std::vector<std::string> errors;
    std::vector<std::string> warnings;
    bool ok() const { return errors.empty(); }
};

/// Checks every structural invariant of the configuration; each violation is
/// reported with the path of the offending field. Never throws.
ValidationReport validate_config(const ScenarioConfig& cfg);

/// Defaults matching the reference merging setup (3.04 m corridor, 30 Hz
/// sampling, 0.05 s control period, box bounds [0.25 m, 0.05 m/s]).
ScenarioConfig default_config();

/// Loads a JSON config file; missing fields keep their defaults. Throws
/// ConfigError on I/O or parse failure. Unknown keys are reported in the
/// returned report's warnings.
ScenarioConfig load_config(const std::string& path, ValidationReport* report = nullptr);

/// Parses a JSON array of {lane, t, v0} records.
std::vector<ScriptedArrival> load_scripted_arrivals(const std::string& path);

std::string config_to_json(const ScenarioConfig& cfg);

}  // namespace mergesim
