#include <doctest.h>

#include <cmath>
#include <random>

#include "mergesim/reference_planner.hpp"
#include "oracles.hpp"

using namespace mergesim;

namespace {

ControllerParams params() { return ControllerParams{}; }

void check_residuals(const ReferencePlan& plan, double beta, double road_len, double tol) {
    CHECK(std::abs(plan.u_at(plan.tf)) < tol);                       // terminal control
    CHECK(std::abs(plan.x_at(plan.tf) - road_len) < tol);            // terminal position
    if (beta > 0.0) {
        CHECK(std::abs(plan.a + beta / plan.v_at(plan.tf)) < tol);   // free terminal time
    }
}

}  // namespace

TEST_SUITE("reference_planner") {

TEST_CASE("zero time weight degenerates to constant-speed cruise") {
    const ReferencePlan plan = plan_unconstrained(0.0, 0.5, 0.0, 0.0, 3.04);
    CHECK(plan.a == 0.0);
    CHECK(plan.b == 0.0);
    CHECK(plan.tf == doctest::Approx(6.08).epsilon(1e-12));
}

TEST_CASE("boundary residuals vanish for a weighted plan") {
    const ReferencePlan plan = plan_unconstrained(0.0, 0.5, 0.0, 2.0, 3.04);
    check_residuals(plan, 2.0, 3.04, 1e-8);
    CHECK(plan.a < 0.0);               // accelerating profile tapering to zero
    CHECK(plan.u_at(plan.t0) > 0.0);
}

TEST_CASE("plan cost agrees with a dense profile search") {
    const double beta = 2.0, road_len = 3.04, v0 = 0.5;
    const ReferencePlan plan = plan_unconstrained(0.0, v0, 0.0, beta, road_len);
    const auto search = oracles::planner_grid_search(0.0, v0, beta, road_len);
    CHECK(plan.cost(beta) == doctest::Approx(search.best_cost).epsilon(1e-4));
    CHECK(plan.cost(beta) <= search.best_cost + 1e-9);
}

TEST_CASE("nonzero entry time just shifts the plan") {
    const ReferencePlan base = plan_unconstrained(0.0, 0.7, 0.0, 1.0, 3.04);
    const ReferencePlan shifted = plan_unconstrained(0.0, 0.7, 5.0, 1.0, 3.04);
    CHECK(shifted.tf - shifted.t0 == doctest::Approx(base.tf - base.t0).epsilon(1e-10));
    CHECK(shifted.a == doctest::Approx(base.a).epsilon(1e-10));
    CHECK(shifted.u_at(shifted.t0 + 0.3) ==
          doctest::Approx(base.u_at(base.t0 + 0.3)).epsilon(1e-9));
}

TEST_CASE("preconditions are enforced") {
    CHECK_THROWS_AS(plan_unconstrained(0.0, 0.0, 0.0, 1.0, 3.04), PlannerError);
    CHECK_THROWS_AS(plan_unconstrained(3.1, 0.5, 0.0, 1.0, 3.04), PlannerError);
    CHECK_THROWS_AS(plan_unconstrained(0.0, 0.5, 0.0, -1.0, 3.04), PlannerError);
}

TEST_CASE("ref_at clamps and coasts past the exit time") {
    const ControllerParams p = params();
    const ReferencePlan cruise = plan_unconstrained(0.0, 0.5, 0.0, 0.0, 3.04);
    for (double t : {0.0, 1.0, 5.0}) {
        const RefPoint ref = ref_at(cruise, t, p);
        CHECK(ref.u_ref == 0.0);
        CHECK(ref.v_ref == doctest::Approx(0.5));
    }

    const ReferencePlan plan = plan_unconstrained(0.0, 0.5, 0.0, 2.0, 3.04);
    CHECK(ref_at(plan, plan.tf, p).u_ref == 0.0);  // terminal control is zero
    const RefPoint past = ref_at(plan, plan.tf + 1.0, p);
    CHECK(past.u_ref == 0.0);
    CHECK(past.v_ref == doctest::Approx(std::clamp(plan.v_at(plan.tf), p.v_min, p.v_max)));

    // A heavy time weight demands more than u_max early on; the reference is
    // clamped to the actuation bounds.
    const ReferencePlan hot = plan_unconstrained(0.0, 0.1, 0.0, 8.0, 3.04);
    CHECK(ref_at(hot, 0.0, p).u_ref <= p.u_max);
}

TEST_CASE("mid-horizon speed matches quadrature of the control") {
    const ControllerParams p = params();
    ControllerParams wide = p;   // avoid clamping so the comparison is exact
    wide.v_max = 100.0;
    wide.u_max = 100.0;
    wide.u_min = -100.0;
    const ReferencePlan plan = plan_unconstrained(0.0, 0.5, 0.0, 2.0, 3.04);
    for (double t : {0.3, 0.9, 0.5 * plan.tf}) {
        const double v_quad =
            0.5 + oracles::simpson([&](double s) { return plan.u_at(s); }, 0.0, t, 1024);
        CHECK(ref_at(plan, t, wide).v_ref == doctest::Approx(v_quad).epsilon(1e-9));
    }
}

TEST_CASE("plan cost beats random feasible linear alternatives") {
    std::mt19937_64 gen(2024);
    std::uniform_real_distribution<double> v0_dist(0.15, 1.0);
    std::uniform_real_distribution<double> beta_dist(0.0, 2.5);
    for (int trial = 0; trial < 20; ++trial) {
        const double v0 = v0_dist(gen);
        const double beta = beta_dist(gen);
        const ReferencePlan plan = plan_unconstrained(0.0, v0, 0.0, beta, 3.04);
        const double cost = plan.cost(beta);
        std::uniform_real_distribution<double> tf_dist(0.3, 30.0);
        std::uniform_real_distribution<double> vf_dist(0.05, 4.0);
        int alternatives = 0;
        while (alternatives < 10000) {
            const auto prof =
                oracles::profile_for(0.0, v0, beta, 3.04, tf_dist(gen), vf_dist(gen));
            if (!prof.ok) continue;
            ++alternatives;
            CHECK(cost <= prof.cost + 1e-9);
        }
    }
}

TEST_CASE("exit time responds smoothly to the entry speed") {
    for (double beta : {0.1, 1.0, 2.0}) {
        const double tf0 = plan_unconstrained(0.0, 0.6, 0.0, beta, 3.04).tf;
        const double tf1 = plan_unconstrained(0.0, 0.6 + 1e-6, 0.0, beta, 3.04).tf;
        CHECK(std::abs(tf1 - tf0) < 1e-3);
    }
}

}  // TEST_SUITE
