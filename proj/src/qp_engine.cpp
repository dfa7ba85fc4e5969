#include "mergesim/qp_engine.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>

namespace mergesim {

namespace {

constexpr double kFeasTol = 1e-9;
constexpr double kMultTol = 1e-9;
constexpr double kDegenerate = 1e-14;

// Row in >= 0 form: nu * u + ne * e + c >= 0.
struct Normalized {
    double nu, ne, c;
    RowTag tag;
    std::size_t idx;
};

Normalized normalize(const ConstraintRow& row, std::size_t idx) {
    if (row.sense == Sense::ge) return {row.coef_u, row.coef_e, -row.rhs, row.tag, idx};
    return {-row.coef_u, -row.coef_e, row.rhs, row.tag, idx};
}

double tag_rank(RowTag tag) {
    switch (tag) {  // fixed tie-break order
        case RowTag::rear_end: return 0;
        case RowTag::merge: return 1;
        case RowTag::vmax: return 2;
        case RowTag::vmin: return 3;
        case RowTag::u_bound: return 4;
        case RowTag::clf: return 5;
    }
    return 6;
}

struct Candidate {
    double u = 0.0;
    double e = 0.0;
    double obj = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> active;
    bool valid = false;
};

std::vector<double> rank_key(const std::vector<Normalized>& rows,
                             const std::vector<std::size_t>& active) {
    std::vector<double> key;
    for (std::size_t i : active) key.push_back(tag_rank(rows[i].tag) * 64.0 + double(rows[i].idx));
    std::sort(key.begin(), key.end());
    return key;
}

bool better(const std::vector<Normalized>& rows, const Candidate& a, const Candidate& b) {
    if (a.obj < b.obj - 1e-12) return true;
    if (a.obj > b.obj + 1e-12) return false;
    return rank_key(rows, a.active) < rank_key(rows, b.active);
}

}  // namespace

double qp_objective(const QpProblem& p, double u, double e) {
    const double du = u - p.u_ref;
    return 0.5 * du * du + p.lambda * e * e;
}

UInterval u_interval(const std::vector<ConstraintRow>& rows) {
    UInterval box{-std::numeric_limits<double>::infinity(),
                  std::numeric_limits<double>::infinity(), std::nullopt};
    RowTag lo_tag = RowTag::u_bound;
    RowTag hi_tag = RowTag::u_bound;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const Normalized n = normalize(rows[i], i);
        if (std::abs(n.ne) > kDegenerate) continue;  // slack absorbs the row
        if (std::abs(n.nu) < kDegenerate) {
            if (n.c < -kDegenerate) {  // constant row already violated
                box.lo = 1.0;
                box.hi = 0.0;
                box.certificate = std::make_pair(n.tag, n.tag);
                return box;
            }
            continue;
        }
        const double bound = -n.c / n.nu;
        if (n.nu > 0.0) {
            if (bound > box.lo) {
                box.lo = bound;
                lo_tag = n.tag;
            }
        } else {
            if (bound < box.hi) {
                box.hi = bound;
                hi_tag = n.tag;
            }
        }
    }
    if (box.lo > box.hi) box.certificate = std::make_pair(lo_tag, hi_tag);
    return box;
}

Feasibility feasibility_probe(const std::vector<ConstraintRow>& rows) {
    return u_interval(rows).certificate ? Feasibility::infeasible : Feasibility::feasible;
}

double kkt_residual(const QpProblem& problem, const QpOutcome& outcome) {
    if (outcome.status != QpStatus::optimal) return 0.0;
    const double gu = outcome.u - problem.u_ref;
    const double ge = 2.0 * problem.lambda * outcome.e;

    std::vector<Normalized> active;
    for (std::size_t i = 0; i < problem.rows.size(); ++i) {
        if (std::abs(problem.rows[i].margin(outcome.u, outcome.e)) <= 1e-7) {
            active.push_back(normalize(problem.rows[i], i));
        }
    }

    double best = std::hypot(gu, ge);  // empty combination
    for (std::size_t j = 0; j < active.size(); ++j) {
        const auto& a = active[j];
        const double denom = a.nu * a.nu + a.ne * a.ne;
        if (denom >= kDegenerate) {
            const double mu = (gu * a.nu + ge * a.ne) / denom;
            if (mu >= -kMultTol) {
                best = std::min(best, std::hypot(gu - mu * a.nu, ge - mu * a.ne));
            }
        }
        for (std::size_t k = j + 1; k < active.size(); ++k) {
            const auto& b = active[k];
            const double det = a.nu * b.ne - a.ne * b.nu;
            if (std::abs(det) < 1e-12) continue;
            const double mj = (gu * b.ne - ge * b.nu) / det;
            const double mk = (a.nu * ge - a.ne * gu) / det;
            if (mj < -kMultTol || mk < -kMultTol) continue;
            best = std::min(best, std::hypot(gu - mj * a.nu - mk * b.nu,
                                             ge - mj * a.ne - mk * b.ne));
        }
    }
    return best;
}

QpOutcome solve(const QpProblem& problem) {
    QpOutcome out;
    const UInterval box = u_interval(problem.rows);
    if (box.certificate) {
        out.status = QpStatus::infeasible;
        out.certificate = box.certificate;
        return out;
    }

    std::vector<Normalized> rows;
    rows.reserve(problem.rows.size());
    for (std::size_t i = 0; i < problem.rows.size(); ++i) {
        rows.push_back(normalize(problem.rows[i], i));
    }

    const double lam2 = 2.0 * problem.lambda;
    const double u0 = problem.u_ref;

    auto feasible_at = [&](double u, double e) {
        for (const auto& r : problem.rows) {
            if (!r.satisfied(u, e, kFeasTol)) return false;
        }
        return true;
    };

    Candidate best;

    auto consider = [&](double u, double e, std::vector<std::size_t> active) {
        if (!std::isfinite(u) || !std::isfinite(e)) return;
        if (!feasible_at(u, e)) return;
        Candidate c;
        c.u = u;
        c.e = e;
        c.obj = qp_objective(problem, u, e);
        c.active = std::move(active);
        c.valid = true;
        if (!best.valid || better(rows, c, best)) best = c;
    };

    // Unconstrained optimum.
    consider(u0, 0.0, {});

    // One active row: project the unconstrained optimum in the H metric.
    for (std::size_t j = 0; j < rows.size(); ++j) {
        const auto& a = rows[j];
        const double denom = a.nu * a.nu + a.ne * a.ne / lam2;
        if (denom < kDegenerate) continue;
        const double viol = a.nu * u0 + a.c;  // g at (u0, 0)
        const double mu = -viol / denom;
        if (mu < -kMultTol) continue;  // row would not bind at the optimum
        consider(u0 + mu * a.nu, mu * a.ne / lam2, {j});
    }

    // Two active rows: vertex of the pair plus multiplier sign check.
    for (std::size_t j = 0; j < rows.size(); ++j) {
        for (std::size_t k = j + 1; k < rows.size(); ++k) {
            const auto& a = rows[j];
            const auto& b = rows[k];
            const double det = a.nu * b.ne - a.ne * b.nu;
            if (std::abs(det) < 1e-12) continue;
            const double u = (-a.c * b.ne + b.c * a.ne) / det;
            const double e = (-a.nu * b.c + b.nu * a.c) / det;
            const double gu = u - u0;
            const double ge = lam2 * e;
            const double mj = (gu * b.ne - ge * b.nu) / det;
            const double mk = (a.nu * ge - a.ne * gu) / det;
            if (mj < -kMultTol || mk < -kMultTol) continue;
            consider(u, e, {j, k});
        }
    }

    if (!best.valid) {
        // The probe said feasible, so the enumeration must produce a point;
        // reaching this means a borderline-degenerate row set. Recover with a
        // deterministic golden-section scan of the slack-eliminated profile.
        double lo = std::max(box.lo, u0 - 1e6);
        double hi = std::min(box.hi, u0 + 1e6);
        auto profile = [&](double u) {
            double e_lo = 0.0, e_hi = 0.0;
            bool has_lo = false, has_hi = false;
            for (const auto& r : rows) {
                if (std::abs(r.ne) <= kDegenerate) continue;
                const double bound = -(r.nu * u + r.c) / r.ne;
                if (r.ne > 0.0) {
                    if (!has_lo || bound > e_lo) e_lo = bound, has_lo = true;
                } else {
                    if (!has_hi || bound < e_hi) e_hi = bound, has_hi = true;
                }
            }
            double e = 0.0;
            if (has_lo && e < e_lo) e = e_lo;
            if (has_hi && e > e_hi) e = e_hi;
            return std::pair<double, double>(qp_objective(problem, u, e), e);
        };
        const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
        double c = hi - phi * (hi - lo), d = lo + phi * (hi - lo);
        for (int i = 0; i < 200; ++i) {
            if (profile(c).first < profile(d).first) hi = d;
            else lo = c;
            c = hi - phi * (hi - lo);
            d = lo + phi * (hi - lo);
        }
        const double u = 0.5 * (lo + hi);
        const auto [obj, e] = profile(u);
        best.u = u;
        best.e = e;
        best.obj = obj;
        best.valid = true;
        best.active.clear();
    }

    out.status = QpStatus::optimal;
    out.u = best.u;
    out.e = best.e;
    for (std::size_t i : best.active) out.active_set.push_back(problem.rows[i].tag);

#ifndef NDEBUG
    assert(kkt_residual(problem, out) < 1e-6);
#endif
    return out;
}

}  // namespace mergesim
