#include "mergesim/trace_io.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace mergesim {

namespace {

constexpr const char* kColumns =
    "t,id,index,lane,x,v,u,x_meas,v_meas,b1,b2,b3,b4,event1,event2,event3,qp_status";

// Round-trip exact and locale independent.
std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

const char* status_name(TickQpStatus s) {
    switch (s) {
        case TickQpStatus::held: return "held";
        case TickQpStatus::optimal: return "optimal";
        case TickQpStatus::infeasible: return "infeasible";
    }
    return "?";
}

double parse_double(const std::string& field, std::size_t line) {
    if (field == "nan") return std::numeric_limits<double>::quiet_NaN();
    double out;
    const auto res = std::from_chars(field.data(), field.data() + field.size(), out);
    if (res.ec != std::errc{} || res.ptr != field.data() + field.size()) {
        throw TraceParseError("bad numeric field '" + field + "'", line);
    }
    return out;
}

}  // namespace

void write_trace(std::ostream& os, const Trace& trace) {
    os << kTraceHeader << '\n' << kColumns << '\n';
    for (const auto& r : trace.rows) {
        os << fmt(r.t) << ',' << r.id << ',' << r.index << ',' << lane_name(r.lane) << ','
           << fmt(r.x) << ',' << fmt(r.v) << ',' << fmt(r.u) << ',' << fmt(r.x_meas) << ','
           << fmt(r.v_meas) << ',' << fmt(r.b1) << ',' << fmt(r.b2) << ',' << fmt(r.b3) << ','
           << fmt(r.b4) << ',' << (r.event1 ? 1 : 0) << ',' << (r.event2 ? 1 : 0) << ','
           << (r.event3 ? 1 : 0) << ',' << status_name(r.qp_status) << '\n';
    }
}

std::string trace_to_string(const Trace& trace) {
    std::ostringstream os;
    write_trace(os, trace);
    return os.str();
}

void write_trace_file(const std::string& path, const Trace& trace) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open trace file for writing: " + path);
    write_trace(out, trace);
}

Trace read_trace(std::istream& is) {
    Trace trace;
    std::string line;
    std::size_t lineno = 0;

    if (!std::getline(is, line)) throw TraceParseError("empty trace", 1);
    ++lineno;
    if (line != kTraceHeader) throw TraceParseError("missing trace header", lineno);
    if (!std::getline(is, line)) throw TraceParseError("missing column header", 2);
    ++lineno;
    if (line != kColumns) throw TraceParseError("unexpected column header", lineno);

    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::size_t start = 0;
        for (;;) {
            const std::size_t comma = line.find(',', start);
            if (comma == std::string::npos) {
                fields.push_back(line.substr(start));
                break;
            }
            fields.push_back(line.substr(start, comma - start));
            start = comma + 1;
        }
        if (fields.size() != 17) throw TraceParseError("expected 17 fields", lineno);

        TraceRow r;
        r.t = parse_double(fields[0], lineno);
        r.id = static_cast<VehicleId>(parse_double(fields[1], lineno));
        r.index = static_cast<int>(parse_double(fields[2], lineno));
        if (fields[3] == "main") r.lane = Lane::main;
        else if (fields[3] == "merging") r.lane = Lane::merging;
        else throw TraceParseError("bad lane '" + fields[3] + "'", lineno);
        r.x = parse_double(fields[4], lineno);
        r.v = parse_double(fields[5], lineno);
        r.u = parse_double(fields[6], lineno);
        r.x_meas = parse_double(fields[7], lineno);
        r.v_meas = parse_double(fields[8], lineno);
        r.b1 = parse_double(fields[9], lineno);
        r.b2 = parse_double(fields[10], lineno);
        r.b3 = parse_double(fields[11], lineno);
        r.b4 = parse_double(fields[12], lineno);
        r.event1 = fields[13] == "1";
        r.event2 = fields[14] == "1";
        r.event3 = fields[15] == "1";
        if (fields[16] == "held") r.qp_status = TickQpStatus::held;
        else if (fields[16] == "optimal") r.qp_status = TickQpStatus::optimal;
        else if (fields[16] == "infeasible") r.qp_status = TickQpStatus::infeasible;
        else throw TraceParseError("bad qp_status '" + fields[16] + "'", lineno);
        trace.rows.push_back(r);
    }
    return trace;
}

Trace read_trace_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open trace file: " + path);
    return read_trace(in);
}

void write_summary(std::ostream& os, const RunMetrics& m, const ScenarioConfig& cfg,
                   bool fixed_epoch) {
    os << kSummaryHeader << '\n';
    if (fixed_epoch) {
        os << "generated=1970-01-01T00:00:00Z\n";
    } else {
        const auto now = std::chrono::system_clock::now();
        const std::time_t tt = std::chrono::system_clock::to_time_t(now);
        char buf[32];
        std::strftime(buf, sizeof buf, "%FT%TZ", std::gmtime(&tt));
        os << "generated=" << buf << '\n';
    }
    os << "mode=" << mode_name(cfg.mode) << '\n';
    os << "seed=" << cfg.seed << '\n';
    os << "alpha=" << fmt(cfg.controller.alpha) << '\n';
    os << "avg_travel_time=" << fmt(m.avg_travel_time) << '\n';
    os << "avg_half_u2=" << fmt(m.avg_half_u2) << '\n';
    os << "avg_fuel=" << fmt(m.avg_fuel) << '\n';
    os << "qp_solve_count=" << m.qp_solve_count << '\n';
    os << "infeasible_count=" << m.infeasible_count << '\n';
    os << "min_b1=" << fmt(m.min_b1) << '\n';
    os << "min_b2=" << fmt(m.min_b2) << '\n';
    os << "events_own_state=" << m.event_counts[0] << '\n';
    os << "events_preceding=" << m.event_counts[1] << '\n';
    os << "events_conflict=" << m.event_counts[2] << '\n';
    os << "solver_invocations=" << m.solver_invocations << '\n';
    os << "sign_probe_infeasible=" << m.sign_probe_infeasible << '\n';
    os << "deferred_entries=" << m.deferred_entries << '\n';
    os << "packets_published=" << m.packets_published << '\n';
    os << "packets_delivered=" << m.packets_delivered << '\n';
    os << "protocol_errors=" << m.protocol_errors << '\n';
    os << "vehicles_spawned=" << m.vehicles_spawned << '\n';
    os << "vehicles_exited=" << m.vehicles_exited << '\n';
    os << "ticks=" << m.ticks << '\n';
    os << "sim_time=" << fmt(m.sim_time) << '\n';
}

void write_summary_file(const std::string& path, const RunMetrics& m,
                        const ScenarioConfig& cfg, bool fixed_epoch) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open summary file for writing: " + path);
    write_summary(out, m, cfg, fixed_epoch);
}

}  // namespace mergesim
