#include "mergesim/reference_planner.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mergesim {

namespace {

// Shifted problem with entry at time zero: u(t) = a t + b0, b0 = -a tau.
// Terminal speed and position:
//     v(tau) = v0 - a tau^2 / 2
//     x(tau) = x0 + v0 tau - a tau^3 / 3
// The free-terminal-time condition a v(tau) + beta = 0 is quadratic in a;
// the admissible (negative) root keeps v(tau) > v0 > 0:
double a_for_tau(double v0, double beta, double tau) {
    return (v0 - std::sqrt(v0 * v0 + 2.0 * beta * tau * tau)) / (tau * tau);
}

// Position residual with a eliminated; strictly increasing in tau.
double terminal_gap(double x0, double v0, double beta, double road_len, double tau) {
    const double root = std::sqrt(v0 * v0 + 2.0 * beta * tau * tau);
    return x0 + v0 * tau + tau * (root - v0) / 3.0 - road_len;
}

}  // namespace

double ReferencePlan::cost(double beta) const {
    const double tau = tf - t0;
    const double b0 = b + a * t0;  // coefficient in entry-shifted time
    const double effort =
        0.5 * (a * a * tau * tau * tau / 3.0 + a * b0 * tau * tau + b0 * b0 * tau);
    return beta * tau + effort;
}

ReferencePlan plan_unconstrained(double x0, double v0, double t0, double beta,
                                 double road_len) {
    if (!(v0 > 0.0)) throw PlannerError("plan_unconstrained: v0 must be > 0");
    if (!(road_len > x0)) throw PlannerError("plan_unconstrained: need x0 < road length");
    if (!(beta >= 0.0)) throw PlannerError("plan_unconstrained: beta must be >= 0");

    ReferencePlan plan;
    plan.t0 = t0;
    plan.x0 = x0;
    plan.v0 = v0;

    const double cruise_tau = (road_len - x0) / v0;
    if (beta == 0.0) {
        plan.a = 0.0;
        plan.b = 0.0;
        plan.tf = t0 + cruise_tau;
        return plan;
    }

    // Damped Newton on (a, tau) for the residuals
    //     F1 = a (v0 - a tau^2 / 2) + beta      (free terminal time)
    //     F2 = x0 + v0 tau - a tau^3 / 3 - L    (terminal position)
    double a = -beta / v0;
    double tau = cruise_tau;
    bool converged = false;
    for (int iter = 0; iter < 60; ++iter) {
        const double f1 = a * (v0 - 0.5 * a * tau * tau) + beta;
        const double f2 = x0 + v0 * tau - a * tau * tau * tau / 3.0 - road_len;
        const double norm0 = std::abs(f1) + std::abs(f2);
        if (norm0 < 1e-13) {
            converged = true;
            break;
        }
        const double j11 = v0 - a * tau * tau;
        const double j12 = -a * a * tau;
        const double j21 = -tau * tau * tau / 3.0;
        const double j22 = v0 - a * tau * tau;
        const double det = j11 * j22 - j12 * j21;
        if (std::abs(det) < 1e-14) break;
        const double da = (f1 * j22 - f2 * j12) / det;
        const double dtau = (f2 * j11 - f1 * j21) / det;

        double step = 1.0;
        bool accepted = false;
        for (int back = 0; back < 30; ++back) {
            const double an = a - step * da;
            const double tn = tau - step * dtau;
            if (tn > 1e-9) {
                const double g1 = an * (v0 - 0.5 * an * tn * tn) + beta;
                const double g2 = x0 + v0 * tn - an * tn * tn * tn / 3.0 - road_len;
                if (std::abs(g1) + std::abs(g2) < norm0) {
                    a = an;
                    tau = tn;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if (!accepted) break;
    }

    if (!converged || v0 - 0.5 * a * tau * tau <= 0.0) {
        // Bisection on the monotone single-variable form; always lands.
        double lo = 1e-9;
        double hi = std::max(cruise_tau, 1.0);
        while (terminal_gap(x0, v0, beta, road_len, hi) < 0.0 && hi < 1e9) hi *= 2.0;
        if (terminal_gap(x0, v0, beta, road_len, hi) < 0.0) {
            std::ostringstream msg;
            msg << "plan_unconstrained: no admissible exit time, residuals f1="
                << a * (v0 - 0.5 * a * tau * tau) + beta
                << " f2=" << x0 + v0 * tau - a * tau * tau * tau / 3.0 - road_len;
            throw PlannerError(msg.str());
        }
        for (int i = 0; i < 200; ++i) {
            const double mid = 0.5 * (lo + hi);
            if (terminal_gap(x0, v0, beta, road_len, mid) < 0.0) lo = mid;
            else hi = mid;
        }
        tau = 0.5 * (lo + hi);
        a = a_for_tau(v0, beta, tau);
    }

    plan.a = a;
    plan.tf = t0 + tau;
    plan.b = -a * tau - a * t0;  // u(tf) = 0 in absolute time
    return plan;
}

RefPoint ref_at(const ReferencePlan& plan, double t, const ControllerParams& p) {
    RefPoint ref;
    if (t >= plan.tf) {
        ref.u_ref = 0.0;
        ref.v_ref = std::clamp(plan.v_at(plan.tf), p.v_min, p.v_max);
        return ref;
    }
    ref.u_ref = std::clamp(plan.u_at(t), p.u_min, p.u_max);
    ref.v_ref = std::clamp(plan.v_at(t), p.v_min, p.v_max);
    return ref;
}

}  // namespace mergesim
