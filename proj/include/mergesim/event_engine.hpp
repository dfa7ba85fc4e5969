#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "mergesim/qp_engine.hpp"
#include "mergesim/reference_planner.hpp"
#include "mergesim/types.hpp"

namespace mergesim {

/// Snapshot defining a trigger box: the measured state at an update instant
/// t_k plus the half-widths (s_x, s_v). The box is the set of states within
/// s of the snapshot componentwise.
struct EventAnchor {
    MeasuredState snapshot;
    double s_x = 0.25;
    double s_v = 0.05;
    double t_k = 0.0;

    bool contains(double x_meas, double v_meas) const {
        return std::abs(x_meas - snapshot.base.x) < s_x &&
               std::abs(v_meas - snapshot.base.v) < s_v;
    }
};

/// Trigger box intersected with the speed band and the road extent. All the
/// closed-form bound minima below are taken over these clipped boxes.
struct ClippedBox {
    double x_lo = 0.0;
    double x_hi = 0.0;
    double v_lo = 0.0;
    double v_hi = 0.0;
};

/// clip_road_end applies to the vehicle's own box; neighbor boxes keep their
/// upper position edge so a leader that has driven past the exit segment is
/// not clamped back into it. pad_x/pad_v inflate the box before clipping:
/// with noisy measurement the anchor is a measured state, so the box must
/// grow by the noise bound to contain the true state.
ClippedBox make_clipped_box(const EventAnchor& anchor, const ControllerParams& p,
                            const CorridorGeometry& geom, bool clip_road_end = true,
                            double pad_x = 0.0, double pad_v = 0.0);

/// Componentwise minima of one barrier row over the clipped boxes, evaluated
/// in closed form (each term is monotone or concave per coordinate, so the
/// minima sit at box vertices).
struct ConservativeTerms {
    int q = 1;             // 1 = rear-end, 2 = merge, 3 = vmax, 4 = vmin
    double bf_min = 0.0;   // min of the drift term L_f b_q
    double bg = 0.0;       // limit value of L_g b_q (constant for q in {1,3,4})
    double bgamma_min = 0.0;  // min of the class-K term k_q b_q
};

/// Minimum of the drift term L_f b_q. rel_box is required for q in {1, 2}.
double min_lf(int q, const ClippedBox& self_box, const std::optional<ClippedBox>& rel_box,
              const ControllerParams& p, double road_len);

/// Minimum of the class-K term gamma_q = k_q b_q.
double min_gamma(int q, const ClippedBox& self_box, const std::optional<ClippedBox>& rel_box,
                 const ControllerParams& p, double road_len);

/// Limit value of L_g b_2 = -(phi/L) x over the self box: the minimum when
/// the control is nonnegative, the maximum otherwise.
double limit_lg2(const ClippedBox& self_box, bool u_nonneg, const ControllerParams& p,
                 double road_len);

// The emitted rows minimize over the box intersected with the barrier's own
// feasible half-space {b_q >= 0}: states the scheme has already excluded
// cannot drive the bound. This floors the class-K term at zero and caps the
// worst-case own speed by the largest value compatible with b_q >= 0. When
// the box holds no feasible state at all the raw box minimum is kept.

/// min of L_f b_q over box ∩ {b_q >= 0} in closed form.
double min_lf_feasible(int q, const ClippedBox& self_box,
                       const std::optional<ClippedBox>& rel_box, const ControllerParams& p,
                       double road_len);

/// min of gamma_q over box ∩ {b_q >= 0} in closed form.
double min_gamma_feasible(int q, const ClippedBox& self_box,
                          const std::optional<ClippedBox>& rel_box, const ControllerParams& p,
                          double road_len);

/// Anchors a vehicle holds of its constraint neighbors, refreshed together
/// with its own anchor every time it updates its control. Event detection
/// and the conservative rows both read from one bundle, so the states a
/// control input was certified against are exactly the states whose box exit
/// forces the next update.
struct AnchorBundle {
    EventAnchor self;
    std::optional<EventAnchor> ip;
    std::optional<EventAnchor> ic;
    VehicleId ip_id = 0;
    VehicleId ic_id = 0;
};

/// The four barrier rows of the event-triggered QP for one sign branch.
std::vector<ConstraintRow> conservative_cbf_rows(const AnchorBundle& anchors, bool u_nonneg,
                                                 const ControllerParams& p,
                                                 const CorridorGeometry& geom,
                                                 double pad_x = 0.0, double pad_v = 0.0);

struct ConservativeBuild {
    QpProblem qp;                 // the conservative tracking QP
    QpOutcome nominal_outcome;    // phase-1 solve used for the sign of u
    bool sign_from_fallback = false;  // nominal infeasible: took the smaller L_g b2 limit
    bool nominal_solved = false;      // false when the joint variant skipped phase 1
};

/// Builds the event-triggered QP at an update instant: phase 1 solves the
/// nominal tracking QP at the snapshots to fix the sign of u, phase 2
/// replaces each barrier row by its box-minimum counterpart
///     bf_min + bg * u + bgamma_min >= 0,
/// keeping the CLF row (at the snapshot) and the actuation rows.
///
/// With joint_min_rows set, the merge row is instead emitted once per x
/// vertex of the self box (the only coordinate multiplying u), which is the
/// exact joint minimization of the whole left-hand side and needs no sign.
ConservativeBuild build_conservative_qp(const AnchorBundle& anchors, const RefPoint& plan_ref,
                                        const ControllerParams& p,
                                        const CorridorGeometry& geom, double pad_x = 0.0,
                                        double pad_v = 0.0);

enum class EventKind : std::uint8_t { own_state = 1, preceding = 2, conflict = 3 };

struct TriggeredEvent {
    VehicleId id;      // the vehicle that must re-solve
    EventKind kind;
};

/// Neighbor identities per vehicle, as resolved by the coordinator.
struct NeighborIds {
    std::optional<VehicleId> ip;
    std::optional<VehicleId> ic;
};

/// Scans one tick's measurement snapshot against every vehicle's anchor
/// bundle. A drift of at least the bound in any watched component fires the
/// corresponding event (boundary reached or crossed between samples).
/// Results are ordered by vehicle id, then kind.
std::vector<TriggeredEvent> detect_events(
    const std::map<VehicleId, MeasuredState>& current,
    const std::map<VehicleId, AnchorBundle>& anchors,
    const std::map<VehicleId, NeighborIds>& queue);

}  // namespace mergesim
