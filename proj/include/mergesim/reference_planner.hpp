#pragma once

#include <stdexcept>
#include <string>

#include "mergesim/types.hpp"

namespace mergesim {

class PlannerError : public std::runtime_error {
public:
    explicit PlannerError(const std::string& what) : std::runtime_error(what) {}
};

/// Unconstrained minimum-effort plan through the corridor.
///
/// Minimizing beta * (tf - t0) + integral of u^2/2 for a double integrator
/// with fixed terminal position, free terminal speed and free terminal time
/// forces a control linear in time, u*(t) = a t + b, subject to
///     u*(tf) = 0                  (free terminal speed)
///     a + beta / v*(tf) = 0       (free terminal time)
///     x*(tf) = L                  (terminal position)
struct ReferencePlan {
    double a = 0.0;   // m/s^3
    double b = 0.0;   // m/s^2
    double tf = 0.0;  // s, planned exit time (absolute)
    double t0 = 0.0;
    double x0 = 0.0;
    double v0 = 0.0;

    double u_at(double t) const { return a * t + b; }
    double v_at(double t) const {
        return v0 + 0.5 * a * (t * t - t0 * t0) + b * (t - t0);
    }
    double x_at(double t) const {
        const double dt = t - t0;
        return x0 + v0 * dt + a * ((t * t * t - t0 * t0 * t0) / 6.0 - 0.5 * t0 * t0 * dt) +
               0.5 * b * dt * dt;
    }

    /// beta * (tf - t0) + integral over [t0, tf] of u*(t)^2 / 2.
    double cost(double beta) const;
};

/// Solves the three-condition system above. beta == 0 degenerates to a
/// constant-speed cruise. Throws PlannerError when no admissible root exists
/// (reports the residuals of the best iterate).
ReferencePlan plan_unconstrained(double x0, double v0, double t0, double beta, double road_len);

/// Reference pair for the tracking QPs at time t: the planned acceleration
/// clamped to the actuation bounds and the planned speed clamped to the speed
/// bounds. Past the planned exit time the plan coasts at its terminal speed.
struct RefPoint {
    double u_ref = 0.0;
    double v_ref = 0.0;
};

RefPoint ref_at(const ReferencePlan& plan, double t, const ControllerParams& p);

}  // namespace mergesim
