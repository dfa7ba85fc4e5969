#pragma once

#include <optional>
#include <vector>

#include "mergesim/types.hpp"

namespace mergesim {

/// One tracking-QP instance over the decision variables (u, e):
///     min 1/2 (u - u_ref)^2 + lambda e^2   s.t. rows.
struct QpProblem {
    double u_ref = 0.0;
    double lambda = 10.0;
    std::vector<ConstraintRow> rows;
};

enum class QpStatus : std::uint8_t { optimal, infeasible };

struct QpOutcome {
    QpStatus status = QpStatus::optimal;
    double u = 0.0;
    double e = 0.0;
    std::vector<RowTag> active_set;
    /// For infeasible outcomes: the pair of rows whose u-intervals are
    /// disjoint after eliminating the slack (second entry absent when a
    /// single degenerate row is already unsatisfiable).
    std::optional<std::pair<RowTag, RowTag>> certificate;
};

/// Exact solve by enumerating KKT candidates over all active sets of size
/// <= 2. With two decision variables and a handful of rows this is branch-free
/// and certifiable, so infeasibility counts are never solver artifacts.
/// Ties between equal-objective candidates are broken by fixed tag order.
QpOutcome solve(const QpProblem& problem);

enum class Feasibility : std::uint8_t { feasible, infeasible };

/// Exact feasibility of the row set by interval intersection on the u axis.
/// Rows with a slack coefficient never cause infeasibility (e absorbs them);
/// a degenerate row (both coefficients ~0) with violated offset is an
/// immediate certificate.
Feasibility feasibility_probe(const std::vector<ConstraintRow>& rows);

/// [lo, hi] intersection of all pure-u rows; lo > hi when empty.
struct UInterval {
    double lo;
    double hi;
    std::optional<std::pair<RowTag, RowTag>> certificate;  // set when empty
};
UInterval u_interval(const std::vector<ConstraintRow>& rows);

/// KKT stationarity residual at an outcome (0 at a true optimum). Used by the
/// debug-build self-check and exposed for tests.
double kkt_residual(const QpProblem& problem, const QpOutcome& outcome);

double qp_objective(const QpProblem& problem, double u, double e);

}  // namespace mergesim
