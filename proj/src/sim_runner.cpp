#include "mergesim/sim_runner.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <optional>

#include "mergesim/constraint_builder.hpp"
#include "mergesim/coordinator.hpp"
#include "mergesim/event_engine.hpp"
#include "mergesim/qp_engine.hpp"
#include "mergesim/reference_planner.hpp"

namespace mergesim {

VehicleState step_dynamics(const VehicleState& state, double u, double dt, double v_min,
                           double v_max) {
    VehicleState next = state;
    double v_end = state.v + u * dt;
    if (u != 0.0 && (v_end > v_max || v_end < v_min)) {
        const double bound = v_end > v_max ? v_max : v_min;
        const double t_star = std::clamp((bound - state.v) / u, 0.0, dt);
        next.x = state.x + state.v * t_star + 0.5 * u * t_star * t_star +
                 bound * (dt - t_star);
        next.v = bound;
    } else {
        next.x = state.x + state.v * dt + 0.5 * u * dt * dt;
        next.v = std::clamp(v_end, v_min, v_max);
    }
    return next;
}

MeasuredState measure(const VehicleState& state, const NoiseConfig& noise, double t,
                      RngStream& rng) {
    MeasuredState m;
    m.base = state;
    m.t_meas = t;
    if (noise.enabled) {
        m.w_x = rng.symmetric(noise.x_bound);
        m.w_v = rng.symmetric(noise.v_bound);
        m.base.x += m.w_x;
        m.base.v += m.w_v;
    }
    return m;
}

double fuel_rate(double v, double u, const FuelModel& f) {
    const double cruise = f.w0 + f.w1 * v + f.w2 * v * v + f.w3 * v * v * v;
    const double accel = (f.r0 + f.r1 * v + f.r2 * v * v) * u;
    return std::max(0.0, cruise + accel);
}

double actuation_emulation(double v_star, double u_star, double dT) {
    return u_star * dT + v_star;
}

namespace {

constexpr double kTimeEps = 1e-9;

struct ActiveVehicle {
    VehicleState state;
    ReferencePlan plan;
    MeasuredState last_meas;
    std::uint32_t time_solve_k = 1;  // next periodic solve is t0 + k * dt_ctrl
    double v_target = 0.0;           // velocity_lag inner-loop setpoint
    double next_act_update = 0.0;
    bool crossed = false;
    double half_u2 = 0.0;
    double fuel = 0.0;
};

struct PendingArrival {
    VehicleId id = 0;
    Lane lane = Lane::main;
    double t_arr = 0.0;
    double v0 = 0.0;
    bool deferral_logged = false;
};

struct TickSolveInfo {
    TickQpStatus status = TickQpStatus::held;
    bool ev1 = false, ev2 = false, ev3 = false;
};

class SimEngine {
public:
    SimEngine(const ScenarioConfig& cfg, std::uint64_t seed)
        : cfg_(cfg),
          p_(cfg.controller),
          geom_(cfg.geometry),
          dt_(1.0 / cfg.controller.sample_hz),
          arrival_rng_{RngStream(seed, "arrivals.main"), RngStream(seed, "arrivals.merge")},
          speed_rng_{RngStream(seed, "speeds.main"), RngStream(seed, "speeds.merge")},
          noise_rng_(seed, "noise") {
        metrics_.min_b1 = std::numeric_limits<double>::infinity();
        metrics_.min_b2 = std::numeric_limits<double>::infinity();
        if (cfg_.arrivals.scripted.empty()) {
            prime_poisson(Lane::main, cfg_.arrivals.rate_main);
            prime_poisson(Lane::merging, cfg_.arrivals.rate_merge);
        } else {
            script_ = cfg_.arrivals.scripted;
            std::stable_sort(script_.begin(), script_.end(),
                             [](const ScriptedArrival& a, const ScriptedArrival& b) {
                                 if (a.t != b.t) return a.t < b.t;
                                 return a.lane < b.lane;
                             });
        }
    }

    RunResult run() {
        for (std::uint64_t tick = 0;; ++tick) {
            const double t = static_cast<double>(tick) * dt_;
            if (t > cfg_.max_sim_time) break;
            tick_info_.clear();

            if (tick > 0) {
                integrate(t);
                process_crossings(t);
            }
            measure_all(t);
            if (cfg_.mode == ControllerMode::event) {
                event_phase(t);
            } else {
                time_phase(t);
            }
            metrics_.packets_delivered += bus_.drain().size();
            admit_phase(t);
            record(t);
            metrics_.ticks = tick + 1;
            metrics_.sim_time = t;
            if (finished()) break;
        }
        finalize();
        return {metrics_, std::move(trace_)};
    }

private:
    std::size_t lane_idx(Lane lane) const { return lane == Lane::main ? 0 : 1; }

    void prime_poisson(Lane lane, double rate) {
        next_arrival_[lane_idx(lane)] =
            rate > 0.0 ? arrival_rng_[lane_idx(lane)].exponential(rate)
                       : std::numeric_limits<double>::infinity();
    }

    bool generation_capped() const {
        return cfg_.arrivals.max_vehicles != 0 && generated_ >= cfg_.arrivals.max_vehicles;
    }

    void generate_arrivals(double t) {
        if (!cfg_.arrivals.scripted.empty()) {
            while (script_pos_ < script_.size() && script_[script_pos_].t <= t &&
                   !generation_capped()) {
                const auto& s = script_[script_pos_++];
                pending_[lane_idx(s.lane)].push_back(
                    {next_id_++, s.lane, s.t, s.v0, false});
                ++generated_;
            }
            if (script_pos_ == script_.size()) scripted_done_ = true;
            return;
        }
        // Poisson lanes, merged in arrival-time order so ids are global.
        while (!generation_capped()) {
            const double tm = next_arrival_[0];
            const double tg = next_arrival_[1];
            const double earliest = std::min(tm, tg);
            if (earliest > t || earliest > cfg_.arrivals.window) break;
            const Lane lane = tm <= tg ? Lane::main : Lane::merging;
            const std::size_t li = lane_idx(lane);
            const double v0 = speed_rng_[li].uniform(cfg_.arrivals.v0_min, cfg_.arrivals.v0_max);
            pending_[li].push_back({next_id_++, lane, next_arrival_[li], v0, false});
            ++generated_;
            const double rate = lane == Lane::main ? cfg_.arrivals.rate_main
                                                   : cfg_.arrivals.rate_merge;
            next_arrival_[li] += rate > 0.0 ? arrival_rng_[li].exponential(rate)
                                            : std::numeric_limits<double>::infinity();
        }
    }

    bool spawning_done(double t) const {
        if (generation_capped()) return true;
        if (!cfg_.arrivals.scripted.empty()) return scripted_done_ || script_pos_ >= script_.size();
        return std::min(next_arrival_[0], next_arrival_[1]) > cfg_.arrivals.window &&
               t >= cfg_.arrivals.window;
    }

    // ---- per-tick phases -------------------------------------------------

    double applied_u(const ActiveVehicle& veh) const {
        if (cfg_.actuation == ActuationMode::ideal) return veh.state.u_held;
        const double u = (veh.v_target - veh.state.v) / cfg_.actuation_lag_tau;
        return std::clamp(u, p_.u_min, p_.u_max);
    }

    void integrate(double t) {
        for (auto& [id, veh] : vehicles_) {
            if (cfg_.actuation == ActuationMode::velocity_lag) {
                while (t >= veh.next_act_update - kTimeEps) {
                    veh.v_target =
                        actuation_emulation(veh.v_target, veh.state.u_held, p_.dt_actuation);
                    veh.next_act_update += p_.dt_actuation;
                }
            }
            const double u = applied_u(veh);
            if (!veh.crossed) {
                veh.half_u2 += 0.5 * u * u * dt_;
                veh.fuel += fuel_rate(veh.state.v, u, cfg_.fuel) * dt_;
            }
            veh.state = step_dynamics(veh.state, u, dt_, p_.v_min, p_.v_max);
        }
    }

    void process_crossings(double t) {
        for (;;) {
            // FIFO: handle the lowest-index crosser first.
            std::optional<VehicleId> crosser;
            int crosser_index = 0;
            for (const auto& e : coord_.entries()) {
                if (e.index < 1) continue;
                const auto it = vehicles_.find(e.id);
                if (it != vehicles_.end() && !it->second.crossed &&
                    it->second.state.x >= geom_.length) {
                    if (!crosser || e.index < crosser_index) {
                        crosser = e.id;
                        crosser_index = e.index;
                    }
                }
            }
            if (!crosser) break;
            auto& veh = vehicles_.at(*crosser);
            veh.crossed = true;
            travel_times_.push_back(t - veh.state.t0);
            half_u2_done_.push_back(veh.half_u2);
            fuel_done_.push_back(veh.fuel);
            ++metrics_.vehicles_exited;
            const std::optional<VehicleId> dropped = coord_.cross_mp(*crosser);
            if (dropped) {
                vehicles_.erase(*dropped);
                anchors_.erase(*dropped);
            }
        }
        metrics_.protocol_errors = coord_.protocol_errors();
    }

    void measure_all(double t) {
        // Index order keeps the noise draw sequence deterministic.
        for (const auto& e : coord_.entries()) {
            auto it = vehicles_.find(e.id);
            if (it != vehicles_.end()) {
                it->second.last_meas = measure(it->second.state, cfg_.noise, t, noise_rng_);
            }
        }
    }

    NeighborIds neighbor_ids(VehicleId id) const {
        const auto n = coord_.resolve_neighbors(id);
        return {n.ip, n.ic};
    }

    EventAnchor anchor_of(VehicleId id, double t) const {
        return {vehicles_.at(id).last_meas, p_.s_x, p_.s_v, t};
    }

    AnchorBundle fresh_bundle(VehicleId id, double t) const {
        AnchorBundle bundle;
        bundle.self = anchor_of(id, t);
        const auto n = coord_.resolve_neighbors(id);
        if (n.ip && vehicles_.count(*n.ip)) {
            bundle.ip = anchor_of(*n.ip, t);
            bundle.ip_id = *n.ip;
        }
        if (n.ic && vehicles_.count(*n.ic)) {
            bundle.ic = anchor_of(*n.ic, t);
            bundle.ic_id = *n.ic;
        }
        return bundle;
    }

    double fallback_braking(const std::vector<ConstraintRow>& rows) const {
        // Hardest admissible braking toward the most binding upper bound.
        const UInterval box = u_interval(rows);
        double u = box.hi;
        if (!std::isfinite(u)) u = p_.u_min;
        return std::clamp(std::max(p_.u_min, u), p_.u_min, p_.u_max);
    }

    void apply_control(ActiveVehicle& veh, double u) {
        veh.state.u_held = u;
        if (cfg_.actuation == ActuationMode::velocity_lag) return;  // target follows u_held
        veh.v_target = veh.state.v;
    }

    void publish_state(VehicleId id) {
        const auto entry = coord_.entry_for(id);
        if (!entry) return;
        const auto& meas = vehicles_.at(id).last_meas;
        StatePacket pkt;
        pkt.index = static_cast<std::uint32_t>(entry->index);
        pkt.x_long = meas.base.x;
        pkt.x_lat = Coordinator::lane_lat(entry->lane);
        pkt.v = meas.base.v;
        bus_.publish(coord_, pkt);
        metrics_.packets_published = bus_.published();
    }

    double noise_pad_x() const { return cfg_.noise.enabled ? cfg_.noise.x_bound : 0.0; }
    double noise_pad_v() const { return cfg_.noise.enabled ? cfg_.noise.v_bound : 0.0; }

    void solve_event_instance(VehicleId id, double t) {
        auto& veh = vehicles_.at(id);
        AnchorBundle bundle = fresh_bundle(id, t);
        const RefPoint ref = ref_at(veh.plan, t, p_);
        ConservativeBuild build =
            build_conservative_qp(bundle, ref, p_, geom_, noise_pad_x(), noise_pad_v());
        if (build.nominal_solved) {
            ++metrics_.solver_invocations;
            if (build.nominal_outcome.status == QpStatus::infeasible) {
                ++metrics_.sign_probe_infeasible;
            }
        }
        const QpOutcome outcome = solve(build.qp);
        ++metrics_.solver_invocations;
        ++metrics_.qp_solve_count;
        if (outcome.status == QpStatus::optimal) {
            apply_control(veh, outcome.u);
            tick_info_[id].status = TickQpStatus::optimal;
        } else {
            ++metrics_.infeasible_count;
            apply_control(veh, fallback_braking(build.qp.rows));
            tick_info_[id].status = TickQpStatus::infeasible;
        }
        anchors_[id] = std::move(bundle);
        publish_state(id);
    }

    void solve_time_instance(VehicleId id, double t) {
        auto& veh = vehicles_.at(id);
        const RefPoint ref = ref_at(veh.plan, t, p_);
        QpProblem qp;
        qp.u_ref = ref.u_ref;
        qp.lambda = p_.lambda;
        const auto n = coord_.resolve_neighbors(id);
        if (n.ip && vehicles_.count(*n.ip)) {
            qp.rows.push_back(rear_end_row(veh.last_meas, vehicles_.at(*n.ip).last_meas, p_));
        }
        if (n.ic && vehicles_.count(*n.ic)) {
            qp.rows.push_back(
                merge_row(veh.last_meas, vehicles_.at(*n.ic).last_meas, p_, geom_.length));
        }
        const SpeedRows sp = speed_rows(veh.last_meas, p_);
        qp.rows.push_back(sp.vmax);
        qp.rows.push_back(sp.vmin);
        qp.rows.push_back(clf_row(veh.last_meas, ref.v_ref, p_));
        const ActuationRows act = actuation_rows(p_);
        qp.rows.push_back(act.upper);
        qp.rows.push_back(act.lower);

        const QpOutcome outcome = solve(qp);
        ++metrics_.solver_invocations;
        ++metrics_.qp_solve_count;
        if (outcome.status == QpStatus::optimal) {
            apply_control(veh, outcome.u);
            tick_info_[id].status = TickQpStatus::optimal;
        } else {
            ++metrics_.infeasible_count;
            apply_control(veh, fallback_braking(qp.rows));
            tick_info_[id].status = TickQpStatus::infeasible;
        }
        publish_state(id);
    }

    void event_phase(double t) {
        std::map<VehicleId, MeasuredState> current;
        std::map<VehicleId, NeighborIds> queue;
        for (const auto& e : coord_.entries()) {
            if (!vehicles_.count(e.id)) continue;
            current.emplace(e.id, vehicles_.at(e.id).last_meas);
            queue.emplace(e.id, neighbor_ids(e.id));
        }
        const auto events = detect_events(current, anchors_, queue);
        for (const auto& ev : events) {
            auto& info = tick_info_[ev.id];
            switch (ev.kind) {
                case EventKind::own_state: info.ev1 = true; break;
                case EventKind::preceding: info.ev2 = true; break;
                case EventKind::conflict: info.ev3 = true; break;
            }
            metrics_.event_counts[static_cast<int>(ev.kind) - 1]++;
        }
        // Re-solve each triggered vehicle once, in queue order.
        std::vector<VehicleId> triggered;
        for (const auto& e : coord_.entries()) {
            const auto it = tick_info_.find(e.id);
            if (it != tick_info_.end() && (it->second.ev1 || it->second.ev2 || it->second.ev3)) {
                triggered.push_back(e.id);
            }
        }
        for (VehicleId id : triggered) solve_event_instance(id, t);
    }

    void time_phase(double t) {
        std::vector<VehicleId> due;
        for (const auto& e : coord_.entries()) {
            const auto it = vehicles_.find(e.id);
            if (it == vehicles_.end()) continue;
            auto& veh = it->second;
            if (t + kTimeEps >= veh.state.t0 + veh.time_solve_k * p_.dt_ctrl) {
                while (t + kTimeEps >= veh.state.t0 + veh.time_solve_k * p_.dt_ctrl) {
                    ++veh.time_solve_k;
                }
                due.push_back(e.id);
            }
        }
        for (VehicleId id : due) solve_time_instance(id, t);
    }

    /// Entry gate: the spawn state must satisfy the headway/merge margins and
    /// leave enough distance to brake out of the worst case (leader stopping
    /// at the hardest deceleration), padded by the measurement-noise bounds.
    bool entry_feasible(Lane lane, double v0, double) const {
        const auto& entries = coord_.entries();
        const QueueEntry* tail_same = nullptr;
        for (const auto& e : entries) {
            if (e.lane == lane && vehicles_.count(e.id)) tail_same = &e;
        }
        const QueueEntry* tail_any = nullptr;
        for (auto it = entries.rbegin(); it != entries.rend(); ++it) {
            if (vehicles_.count(it->id)) {
                tail_any = &*it;
                break;
            }
        }
        const double brake = std::abs(p_.u_min);
        // A leader's hard brake is only noticed once its speed drifts past
        // the trigger bound and acted on a sample later; cover that reaction
        // window in the escape distance.
        const double reaction = (p_.s_v / brake) + 2.0 / p_.sample_hz;
        auto gap_ok = [&](const MeasuredState& lead) {
            const double z = lead.base.x - noise_pad_x();
            const double v_lead = std::max(0.0, lead.base.v - noise_pad_v());
            const double need_stop =
                std::max(0.0, (v0 * v0 - v_lead * v_lead) / (2.0 * brake));
            return z >= p_.delta + p_.phi * v0 + need_stop + v0 * reaction;
        };
        if (tail_same && !gap_ok(vehicles_.at(tail_same->id).last_meas)) return false;
        if (tail_any && tail_any->lane != lane &&
            !gap_ok(vehicles_.at(tail_any->id).last_meas)) {
            return false;
        }
        return true;
    }

    void admit_one(PendingArrival& arr, double t) {
        ActiveVehicle veh;
        veh.state.id = arr.id;
        veh.state.lane = arr.lane;
        veh.state.x = 0.0;
        veh.state.v = arr.v0;
        veh.state.t0 = t;
        veh.plan = plan_unconstrained(0.0, arr.v0, t, p_.beta, geom_.length);
        veh.v_target = arr.v0;
        veh.next_act_update = t + p_.dt_actuation;
        coord_.admit(arr.id, arr.lane, t);
        vehicles_.emplace(arr.id, std::move(veh));
        vehicles_.at(arr.id).last_meas = measure(vehicles_.at(arr.id).state, cfg_.noise, t,
                                                 noise_rng_);
        ++metrics_.vehicles_spawned;
        if (cfg_.mode == ControllerMode::event) {
            solve_event_instance(arr.id, t);
        } else {
            solve_time_instance(arr.id, t);
        }
    }

    void admit_phase(double t) {
        generate_arrivals(t);
        for (;;) {
            PendingArrival* best = nullptr;
            std::size_t best_lane = 0;
            for (std::size_t li = 0; li < 2; ++li) {
                if (pending_[li].empty()) continue;
                PendingArrival& head = pending_[li].front();
                if (head.t_arr > t + kTimeEps) continue;
                const Lane lane = li == 0 ? Lane::main : Lane::merging;
                if (!entry_feasible(lane, head.v0, t)) {
                    if (!head.deferral_logged) {
                        head.deferral_logged = true;
                        ++metrics_.deferred_entries;
                    }
                    continue;
                }
                if (!best || head.t_arr < best->t_arr ||
                    (head.t_arr == best->t_arr && li < best_lane)) {
                    best = &head;
                    best_lane = li;
                }
            }
            if (!best) break;
            PendingArrival arr = *best;
            pending_[best_lane].pop_front();
            admit_one(arr, t);
        }
    }

    void record(double t) {
        for (const auto& e : coord_.entries()) {
            const auto it = vehicles_.find(e.id);
            if (it == vehicles_.end()) continue;
            const ActiveVehicle& veh = it->second;
            TraceRow row;
            row.t = t;
            row.id = e.id;
            row.index = e.index;
            row.lane = e.lane;
            row.x = veh.state.x;
            row.v = veh.state.v;
            row.u = applied_u(veh);
            row.x_meas = veh.last_meas.base.x;
            row.v_meas = veh.last_meas.base.v;

            const auto n = coord_.resolve_neighbors(e.id);
            row.b1 = std::numeric_limits<double>::quiet_NaN();
            row.b2 = std::numeric_limits<double>::quiet_NaN();
            if (n.ip && vehicles_.count(*n.ip)) {
                const auto& lead = vehicles_.at(*n.ip).state;
                row.b1 = lead.x - veh.state.x - p_.phi * veh.state.v - p_.delta;
                if (e.index >= 1) metrics_.min_b1 = std::min(metrics_.min_b1, row.b1);
            }
            if (n.ic && vehicles_.count(*n.ic)) {
                const auto& lead = vehicles_.at(*n.ic).state;
                row.b2 = lead.x - veh.state.x -
                         (p_.phi * veh.state.x / geom_.length) * veh.state.v - p_.delta;
                if (e.index >= 1) metrics_.min_b2 = std::min(metrics_.min_b2, row.b2);
            }
            row.b3 = p_.v_max - veh.state.v;
            row.b4 = veh.state.v - p_.v_min;

            const auto info = tick_info_.find(e.id);
            if (info != tick_info_.end()) {
                row.event1 = info->second.ev1;
                row.event2 = info->second.ev2;
                row.event3 = info->second.ev3;
                row.qp_status = info->second.status;
            }
            trace_.rows.push_back(row);
        }
    }

    bool finished() const {
        if (!spawning_done(metrics_.sim_time)) return false;
        if (!pending_[0].empty() || !pending_[1].empty()) return false;
        for (const auto& [id, veh] : vehicles_) {
            if (!veh.crossed) return false;
        }
        return true;
    }

    void finalize() {
        const auto avg = [](const std::vector<double>& xs) {
            if (xs.empty()) return 0.0;
            double sum = 0.0;
            for (double x : xs) sum += x;
            return sum / static_cast<double>(xs.size());
        };
        metrics_.avg_travel_time = avg(travel_times_);
        metrics_.avg_half_u2 = avg(half_u2_done_);
        metrics_.avg_fuel = avg(fuel_done_);
        if (!std::isfinite(metrics_.min_b1)) metrics_.min_b1 = 0.0;
        if (!std::isfinite(metrics_.min_b2)) metrics_.min_b2 = 0.0;
    }

    ScenarioConfig cfg_;
    ControllerParams p_;
    CorridorGeometry geom_;
    double dt_;

    RngStream arrival_rng_[2];
    RngStream speed_rng_[2];
    RngStream noise_rng_;

    Coordinator coord_;
    MessageBus bus_;
    std::map<VehicleId, ActiveVehicle> vehicles_;
    std::map<VehicleId, AnchorBundle> anchors_;
    std::map<VehicleId, TickSolveInfo> tick_info_;

    std::vector<ScriptedArrival> script_;
    std::size_t script_pos_ = 0;
    bool scripted_done_ = false;
    double next_arrival_[2] = {std::numeric_limits<double>::infinity(),
                               std::numeric_limits<double>::infinity()};
    std::deque<PendingArrival> pending_[2];
    VehicleId next_id_ = 1;
    std::uint32_t generated_ = 0;

    std::vector<double> travel_times_;
    std::vector<double> half_u2_done_;
    std::vector<double> fuel_done_;

    RunMetrics metrics_;
    Trace trace_;
};

}  // namespace

RunResult run_scenario(const ScenarioConfig& cfg, std::uint64_t seed) {
    SimEngine engine(cfg, seed);
    return engine.run();
}

}  // namespace mergesim
