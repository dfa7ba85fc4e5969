#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>

#include "mergesim/sim_runner.hpp"

namespace mergesim {

class TraceParseError : public std::runtime_error {
public:
    TraceParseError(const std::string& what, std::size_t line)
        : std::runtime_error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

inline constexpr const char* kTraceHeader = "# mergesim trace v1";
inline constexpr const char* kSummaryHeader = "# mergesim summary v1";

/// CSV, one row per (tick, vehicle). Floats are written round-trip exact so
/// identical runs produce byte-identical files.
void write_trace(std::ostream& os, const Trace& trace);
void write_trace_file(const std::string& path, const Trace& trace);
std::string trace_to_string(const Trace& trace);

Trace read_trace(std::istream& is);
Trace read_trace_file(const std::string& path);

/// Key/value summary of all run metrics. `generated` stamps the file with
/// the wall-clock time unless fixed_epoch is set.
void write_summary(std::ostream& os, const RunMetrics& m, const ScenarioConfig& cfg,
                   bool fixed_epoch);
void write_summary_file(const std::string& path, const RunMetrics& m,
                        const ScenarioConfig& cfg, bool fixed_epoch);

}  // namespace mergesim
