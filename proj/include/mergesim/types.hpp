#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace mergesim {

using VehicleId = std::uint32_t;

enum class Lane : std::uint8_t { main = 0, merging = 1 };

inline const char* lane_name(Lane lane) {
    return lane == Lane::main ? "main" : "merging";
}

/// True longitudinal state of one vehicle plus the control it is holding.
/// Positions are measured along the vehicle's own road from the control-zone
/// origin of that road.
struct VehicleState {
    VehicleId id = 0;
    Lane lane = Lane::main;
    double x = 0.0;       // m from CZ origin
    double v = 0.0;       // m/s
    double u_held = 0.0;  // m/s^2, currently applied acceleration
    double t0 = 0.0;      // s, CZ entry time
};

/// Noisy observation of a VehicleState. `base.x` and `base.v` carry the
/// measured values; `w_x`/`w_v` are the realized noise samples, so the true
/// state is recovered as measured minus noise.
struct MeasuredState {
    VehicleState base;
    double w_x = 0.0;
    double w_v = 0.0;
    double t_meas = 0.0;
};

struct CorridorGeometry {
    double length = 3.04;    // m, CZ entry to merging point
    double exit_len = 0.3;   // m, post-MP segment kept in scope
};

/// Gains, bounds and timing shared by both controller variants.
struct ControllerParams {
    double phi = 0.18;       // s, reaction-time headway
    double delta = 0.15;     // m, minimum gap
    double k1 = 1.0;         // 1/s, class-K gains for the four barrier rows
    double k2 = 1.0;
    double k3 = 1.0;
    double k4 = 1.0;
    double c3 = 1.0;         // CLF decay rate
    double lambda = 10.0;    // slack weight in the tracking objective
    double alpha = 0.25;     // time/energy weight in [0,1)
    double beta = 0.0;       // derived from alpha, see beta_from_alpha()
    double u_min = -2.0;     // m/s^2
    double u_max = 2.0;      // m/s^2
    double v_min = 0.0;      // m/s
    double v_max = 1.0;      // m/s
    double s_x = 0.25;       // m, trigger-box half-width in position
    double s_v = 0.05;       // m/s, trigger-box half-width in speed
    double dt_ctrl = 0.05;       // s, time-driven QP period
    double dt_actuation = 0.25;  // s, inner actuation-loop period
    double sample_hz = 30.0;     // Hz, sensor sampling rate (master tick)
    bool joint_min_rows = false; // joint vertex minimization for the merge row
};

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Weight on travel time implied by the convex-combination weight alpha:
/// beta = alpha * max(u_max^2, u_min^2) / (2 (1 - alpha)).
double beta_from_alpha(double alpha, double u_max, double u_min);

enum class Sense : std::uint8_t { ge, le };

enum class RowTag : std::uint8_t {
    rear_end = 0,
    merge = 1,
    vmax = 2,
    vmin = 3,
    u_bound = 4,
    clf = 5,
};

inline const char* row_tag_name(RowTag tag) {
    switch (tag) {
        case RowTag::rear_end: return "rear_end";
        case RowTag::merge: return "merge";
        case RowTag::vmax: return "vmax";
        case RowTag::vmin: return "vmin";
        case RowTag::u_bound: return "u_bound";
        case RowTag::clf: return "clf";
    }
    return "?";
}

/// One affine inequality over the decision variables (u, e):
///     coef_u * u + coef_e * e  <sense>  rhs
/// Barrier and actuation rows have coef_e == 0; the CLF row has coef_e == -1.
struct ConstraintRow {
    double coef_u = 0.0;
    double coef_e = 0.0;
    double rhs = 0.0;
    Sense sense = Sense::ge;
    RowTag tag = RowTag::u_bound;

    double lhs(double u, double e) const { return coef_u * u + coef_e * e; }

    /// Signed slack, nonnegative iff the row is satisfied. For a >= row this
    /// equals the barrier-condition value L_f b + L_g b u + gamma(b).
    double margin(double u, double e) const {
        const double d = lhs(u, e) - rhs;
        return sense == Sense::ge ? d : -d;
    }

    bool satisfied(double u, double e, double tol = 0.0) const {
        return margin(u, e) >= -tol;
    }
};

}  // namespace mergesim
