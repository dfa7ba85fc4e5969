#include "mergesim/event_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mergesim/constraint_builder.hpp"

namespace mergesim {

ClippedBox make_clipped_box(const EventAnchor& anchor, const ControllerParams& p,
                            const CorridorGeometry& geom, bool clip_road_end, double pad_x,
                            double pad_v) {
    const double road_max =
        clip_road_end ? geom.length + geom.exit_len : std::numeric_limits<double>::infinity();
    const double rx = anchor.s_x + pad_x;
    const double rv = anchor.s_v + pad_v;
    ClippedBox box;
    box.x_lo = std::clamp(anchor.snapshot.base.x - rx, 0.0, road_max);
    box.x_hi = std::clamp(anchor.snapshot.base.x + rx, 0.0, road_max);
    box.v_lo = std::clamp(anchor.snapshot.base.v - rv, p.v_min, p.v_max);
    box.v_hi = std::clamp(anchor.snapshot.base.v + rv, p.v_min, p.v_max);
    return box;
}

namespace {

const ClippedBox& require_rel(int q, const std::optional<ClippedBox>& rel_box) {
    if (!rel_box) {
        throw std::invalid_argument("bound minimization: constraint " + std::to_string(q) +
                                    " needs the relevant neighbor box");
    }
    return *rel_box;
}

}  // namespace

double min_lf(int q, const ClippedBox& self_box, const std::optional<ClippedBox>& rel_box,
              const ControllerParams& p, double road_len) {
    switch (q) {
        case 1:
            return require_rel(q, rel_box).v_lo - self_box.v_hi;
        case 2: {
            // v -> -v - (phi/L) v^2 decreases on v >= 0, so the self minimum
            // sits at the upper speed corner.
            const double vh = self_box.v_hi;
            return require_rel(q, rel_box).v_lo - vh - (p.phi / road_len) * vh * vh;
        }
        case 3:
        case 4:
            return 0.0;  // speed barriers have no drift term
        default:
            throw std::invalid_argument("min_lf: constraint index out of range");
    }
}

double min_gamma(int q, const ClippedBox& self_box, const std::optional<ClippedBox>& rel_box,
                 const ControllerParams& p, double road_len) {
    switch (q) {
        case 1: {
            const auto& rel = require_rel(q, rel_box);
            return p.k1 * (rel.x_lo - self_box.x_hi - p.phi * self_box.v_hi - p.delta);
        }
        case 2: {
            // The bilinear -x v term is largest in magnitude at the upper
            // corners since positions and speeds are nonnegative.
            const auto& rel = require_rel(q, rel_box);
            return p.k2 * (rel.x_lo - self_box.x_hi -
                           (p.phi / road_len) * self_box.x_hi * self_box.v_hi - p.delta);
        }
        case 3:
            return p.k3 * (p.v_max - self_box.v_hi);
        case 4:
            return p.k4 * (self_box.v_lo - p.v_min);
        default:
            throw std::invalid_argument("min_gamma: constraint index out of range");
    }
}

double limit_lg2(const ClippedBox& self_box, bool u_nonneg, const ControllerParams& p,
                 double road_len) {
    // L_g b2 = -(phi/L) x is nonpositive on the road, so the harmful extreme
    // depends on the sign of the control it multiplies.
    const double x = u_nonneg ? self_box.x_hi : self_box.x_lo;
    return -(p.phi / road_len) * x;
}

namespace {

// Largest own speed inside the box compatible with b_q >= 0 somewhere in the
// neighbor box; the barrier caps v through its headway term.
double feasible_speed_cap(int q, const ClippedBox& self_box, const ClippedBox& rel,
                          const ControllerParams& p, double road_len) {
    if (q == 1) return (rel.x_hi - self_box.x_lo - p.delta) / p.phi;
    const double ramp = (p.phi / road_len) * self_box.x_lo;
    if (ramp <= 0.0) return std::numeric_limits<double>::infinity();
    return (rel.x_hi - self_box.x_lo - p.delta) / ramp;
}

double raw_b_min(int q, const ClippedBox& self_box, const ClippedBox& rel,
                 const ControllerParams& p, double road_len) {
    if (q == 1) return rel.x_lo - self_box.x_hi - p.phi * self_box.v_hi - p.delta;
    return rel.x_lo - self_box.x_hi -
           (p.phi / road_len) * self_box.x_hi * self_box.v_hi - p.delta;
}

double raw_b_max(int q, const ClippedBox& self_box, const ClippedBox& rel,
                 const ControllerParams& p, double road_len) {
    if (q == 1) return rel.x_hi - self_box.x_lo - p.phi * self_box.v_lo - p.delta;
    return rel.x_hi - self_box.x_lo -
           (p.phi / road_len) * self_box.x_lo * self_box.v_lo - p.delta;
}

}  // namespace

double min_lf_feasible(int q, const ClippedBox& self_box,
                       const std::optional<ClippedBox>& rel_box, const ControllerParams& p,
                       double road_len) {
    if (q == 3 || q == 4) return 0.0;
    const ClippedBox& rel = require_rel(q, rel_box);
    if (raw_b_max(q, self_box, rel, p, road_len) < 0.0) {
        return min_lf(q, self_box, rel_box, p, road_len);  // no feasible state in the box
    }
    const double cap = feasible_speed_cap(q, self_box, rel, p, road_len);
    const double w = std::min(self_box.v_hi, std::max(self_box.v_lo, cap));
    if (q == 1) return rel.v_lo - w;
    return rel.v_lo - w - (p.phi / road_len) * w * w;
}

double min_gamma_feasible(int q, const ClippedBox& self_box,
                          const std::optional<ClippedBox>& rel_box, const ControllerParams& p,
                          double road_len) {
    if (q == 3 || q == 4) return min_gamma(q, self_box, rel_box, p, road_len);
    const ClippedBox& rel = require_rel(q, rel_box);
    if (raw_b_max(q, self_box, rel, p, road_len) < 0.0) {
        return min_gamma(q, self_box, rel_box, p, road_len);
    }
    const double k = q == 1 ? p.k1 : p.k2;
    return k * std::max(0.0, raw_b_min(q, self_box, rel, p, road_len));
}

namespace {

ConstraintRow conservative_row(RowTag tag, double bf_min, double bg, double bgamma_min) {
    ConstraintRow row;
    row.coef_u = bg;
    row.coef_e = 0.0;
    row.rhs = -(bf_min + bgamma_min);
    row.sense = Sense::ge;
    row.tag = tag;
    return row;
}

}  // namespace

std::vector<ConstraintRow> conservative_cbf_rows(const AnchorBundle& anchors, bool u_nonneg,
                                                 const ControllerParams& p,
                                                 const CorridorGeometry& geom, double pad_x,
                                                 double pad_v) {
    const double road_len = geom.length;
    const ClippedBox self_box = make_clipped_box(anchors.self, p, geom, true, pad_x, pad_v);
    std::vector<ConstraintRow> rows;

    if (anchors.ip) {
        const ClippedBox rel = make_clipped_box(*anchors.ip, p, geom, false, pad_x, pad_v);
        rows.push_back(conservative_row(RowTag::rear_end,
                                        min_lf_feasible(1, self_box, rel, p, road_len), -p.phi,
                                        min_gamma_feasible(1, self_box, rel, p, road_len)));
    }
    if (anchors.ic) {
        const ClippedBox rel = make_clipped_box(*anchors.ic, p, geom, false, pad_x, pad_v);
        if (p.joint_min_rows) {
            // Exact joint minimization of the whole left-hand side: position
            // is the only self coordinate multiplying u, so requiring the
            // row at both x vertices covers the box minimum for either
            // control sign. The class-K slice minimum gets the same
            // feasible-set floor as the componentwise form.
            const double lf = min_lf_feasible(2, self_box, rel, p, road_len);
            const bool has_feasible = raw_b_max(2, self_box, rel, p, road_len) >= 0.0;
            for (double x_vertex : {self_box.x_lo, self_box.x_hi}) {
                double gamma = p.k2 * (rel.x_lo - x_vertex -
                                       (p.phi / road_len) * x_vertex * self_box.v_hi -
                                       p.delta);
                if (has_feasible) gamma = std::max(0.0, gamma);
                rows.push_back(conservative_row(RowTag::merge, lf,
                                                -(p.phi / road_len) * x_vertex, gamma));
            }
        } else {
            rows.push_back(conservative_row(RowTag::merge,
                                            min_lf_feasible(2, self_box, rel, p, road_len),
                                            limit_lg2(self_box, u_nonneg, p, road_len),
                                            min_gamma_feasible(2, self_box, rel, p, road_len)));
        }
    }
    rows.push_back(conservative_row(RowTag::vmax, 0.0, -1.0,
                                    min_gamma(3, self_box, std::nullopt, p, road_len)));
    rows.push_back(conservative_row(RowTag::vmin, 0.0, 1.0,
                                    min_gamma(4, self_box, std::nullopt, p, road_len)));
    return rows;
}

ConservativeBuild build_conservative_qp(const AnchorBundle& anchors, const RefPoint& plan_ref,
                                        const ControllerParams& p,
                                        const CorridorGeometry& geom, double pad_x,
                                        double pad_v) {
    ConservativeBuild build;
    const double road_len = geom.length;
    const MeasuredState& self = anchors.self.snapshot;

    // Phase 1: nominal tracking QP at the snapshots, only to fix sign(u).
    // The joint-vertex variant covers both signs, so it skips this phase.
    bool u_nonneg = true;
    if (!p.joint_min_rows && anchors.ic) {
        QpProblem nominal;
        nominal.u_ref = plan_ref.u_ref;
        nominal.lambda = p.lambda;
        if (anchors.ip) nominal.rows.push_back(rear_end_row(self, anchors.ip->snapshot, p));
        nominal.rows.push_back(merge_row(self, anchors.ic->snapshot, p, road_len));
        const SpeedRows sp = speed_rows(self, p);
        nominal.rows.push_back(sp.vmax);
        nominal.rows.push_back(sp.vmin);
        nominal.rows.push_back(clf_row(self, plan_ref.v_ref, p));
        const ActuationRows act = actuation_rows(p);
        nominal.rows.push_back(act.upper);
        nominal.rows.push_back(act.lower);

        build.nominal_outcome = solve(nominal);
        build.nominal_solved = true;
        if (build.nominal_outcome.status == QpStatus::optimal) {
            u_nonneg = build.nominal_outcome.u >= 0.0;
        } else {
            // Unknown sign: keep the smaller limit value of L_g b2.
            build.sign_from_fallback = true;
            u_nonneg = true;
        }
    }

    QpProblem& qp = build.qp;
    qp.u_ref = plan_ref.u_ref;
    qp.lambda = p.lambda;
    qp.rows = conservative_cbf_rows(anchors, u_nonneg, p, geom, pad_x, pad_v);
    qp.rows.push_back(clf_row(self, plan_ref.v_ref, p));
    const ActuationRows act = actuation_rows(p);
    qp.rows.push_back(act.upper);
    qp.rows.push_back(act.lower);
    return build;
}

std::vector<TriggeredEvent> detect_events(
    const std::map<VehicleId, MeasuredState>& current,
    const std::map<VehicleId, AnchorBundle>& anchors,
    const std::map<VehicleId, NeighborIds>& queue) {
    std::vector<TriggeredEvent> events;

    auto box_left = [](const EventAnchor& anchor, const MeasuredState& now) {
        // >= catches a crossing that happened between samples.
        return std::abs(now.base.x - anchor.snapshot.base.x) >= anchor.s_x ||
               std::abs(now.base.v - anchor.snapshot.base.v) >= anchor.s_v;
    };

    for (const auto& [id, bundle] : anchors) {
        const auto self_now = current.find(id);
        if (self_now == current.end()) continue;
        if (box_left(bundle.self, self_now->second)) {
            events.push_back({id, EventKind::own_state});
        }
        const auto ids = queue.find(id);
        if (bundle.ip && ids != queue.end() && ids->second.ip == bundle.ip_id) {
            const auto rel_now = current.find(bundle.ip_id);
            if (rel_now != current.end() && box_left(*bundle.ip, rel_now->second)) {
                events.push_back({id, EventKind::preceding});
            }
        }
        if (bundle.ic && ids != queue.end() && ids->second.ic == bundle.ic_id) {
            const auto rel_now = current.find(bundle.ic_id);
            if (rel_now != current.end() && box_left(*bundle.ic, rel_now->second)) {
                events.push_back({id, EventKind::conflict});
            }
        }
    }
    return events;
}

}  // namespace mergesim
