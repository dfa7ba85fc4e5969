#include "mergesim/constraint_builder.hpp"

namespace mergesim {

// Each builder moves the control-free part of the barrier condition to the
// right-hand side, so row.margin(u, e) reproduces the condition value
// L_f b + L_g b u + k b exactly.

ConstraintRow rear_end_row(const MeasuredState& self, const MeasuredState& ip,
                           const ControllerParams& p) {
    const double z = ip.base.x - self.base.x;
    const double lf = ip.base.v - self.base.v;
    const double gamma = p.k1 * (z - p.phi * self.base.v - p.delta);
    ConstraintRow row;
    row.coef_u = -p.phi;
    row.coef_e = 0.0;
    row.rhs = -(lf + gamma);
    row.sense = Sense::ge;
    row.tag = RowTag::rear_end;
    return row;
}

ConstraintRow merge_row(const MeasuredState& self, const MeasuredState& ic,
                        const ControllerParams& p, double road_len) {
    const double z = ic.base.x - self.base.x;
    const double ramp = p.phi * self.base.x / road_len;  // headway grows toward the MP
    const double lf =
        ic.base.v - self.base.v - (p.phi / road_len) * self.base.v * self.base.v;
    const double gamma = p.k2 * (z - ramp * self.base.v - p.delta);
    ConstraintRow row;
    row.coef_u = -ramp;
    row.coef_e = 0.0;
    row.rhs = -(lf + gamma);
    row.sense = Sense::ge;
    row.tag = RowTag::merge;
    return row;
}

SpeedRows speed_rows(const MeasuredState& self, const ControllerParams& p) {
    SpeedRows rows;
    rows.vmax.coef_u = -1.0;
    rows.vmax.rhs = -p.k3 * (p.v_max - self.base.v);
    rows.vmax.sense = Sense::ge;
    rows.vmax.tag = RowTag::vmax;

    rows.vmin.coef_u = 1.0;
    rows.vmin.rhs = -p.k4 * (self.base.v - p.v_min);
    rows.vmin.sense = Sense::ge;
    rows.vmin.tag = RowTag::vmin;
    return rows;
}

ConstraintRow clf_row(const MeasuredState& self, double v_ref, const ControllerParams& p) {
    // V = (v - v_ref)^2 with v_ref held constant over the step, so the drift
    // term vanishes and only L_g V = 2 (v - v_ref) remains.
    const double dv = self.base.v - v_ref;
    ConstraintRow row;
    row.coef_u = 2.0 * dv;
    row.coef_e = -1.0;
    row.rhs = -p.c3 * dv * dv;
    row.sense = Sense::le;
    row.tag = RowTag::clf;
    return row;
}

ActuationRows actuation_rows(const ControllerParams& p) {
    ActuationRows rows;
    rows.upper.coef_u = 1.0;
    rows.upper.rhs = p.u_max;
    rows.upper.sense = Sense::le;
    rows.upper.tag = RowTag::u_bound;

    rows.lower.coef_u = -1.0;
    rows.lower.rhs = -p.u_min;
    rows.lower.sense = Sense::le;
    rows.lower.tag = RowTag::u_bound;
    return rows;
}

}  // namespace mergesim
