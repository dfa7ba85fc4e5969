#pragma once

#include <optional>

#include "mergesim/types.hpp"

namespace mergesim {

/// The (at most two) vehicles whose state enters CAV i's constraints: the
/// physically preceding same-lane vehicle i_p and the merge-conflict vehicle
/// i_c at queue index i-1 (when that index sits in the other lane).
struct NeighborView {
    std::optional<MeasuredState> ip;
    std::optional<MeasuredState> ic;
};

// Rows for the nominal tracking QP. Every barrier row is the standard
// relative-degree-one condition L_f b + L_g b * u + k b >= 0 written as a
// ConstraintRow with coef_e = 0.

/// Rear-end headway: b1 = x_ip - x_i - phi * v_i - delta.
ConstraintRow rear_end_row(const MeasuredState& self, const MeasuredState& ip,
                           const ControllerParams& p);

/// Safe merging: b2 = x_ic - x_i - (phi x_i / L) v_i - delta. The headway
/// coefficient ramps with position so the constraint is exact at the merging
/// point and vacuous at the CZ entry.
ConstraintRow merge_row(const MeasuredState& self, const MeasuredState& ic,
                        const ControllerParams& p, double road_len);

/// Speed-limit barriers b3 = v_max - v_i and b4 = v_i - v_min.
struct SpeedRows {
    ConstraintRow vmax;
    ConstraintRow vmin;
};
SpeedRows speed_rows(const MeasuredState& self, const ControllerParams& p);

/// Soft speed-tracking row with V = (v_i - v_ref)^2 and slack e:
/// 2 (v_i - v_ref) u + c3 V <= e.
ConstraintRow clf_row(const MeasuredState& self, double v_ref, const ControllerParams& p);

struct ActuationRows {
    ConstraintRow upper;  //  u <= u_max
    ConstraintRow lower;  // -u <= -u_min
};
ActuationRows actuation_rows(const ControllerParams& p);

}  // namespace mergesim
