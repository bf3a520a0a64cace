#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mprtree/channel.hpp"
#include "mprtree/rng.hpp"

namespace mprtree {

struct SlotRecord {
    std::int64_t occupancy = 0;
    Feedback feedback = Feedback::Idle;
};

// One realized collision resolution interval. split_decisions holds, per
// split, the Bernoulli group decisions (0 = group 0) in the order the
// transmitters consumed them; recorded on request so a trace can be replayed.
struct CriTrace {
    std::vector<SlotRecord> slots;
    std::int64_t length = 0;
    std::vector<std::vector<std::uint8_t>> split_decisions;
};

// Slot-by-slot execution of the counter protocol for one batch of n users.
// BTA follows the counter update rule exactly; MTA additionally re-splits the
// waiting group when the group-0 slot of a split comes back idle.
CriTrace run_cri(std::int64_t n, const ChannelConfig& config, std::uint64_t seed,
                 bool record_splits = false);

// Re-runs a CRI with scripted split decisions instead of random draws.
CriTrace run_cri_replayed(std::int64_t n, const ChannelConfig& config,
                          const std::vector<std::vector<std::uint8_t>>& splits);

struct SimulationReport {
    std::int64_t replications = 0;
    double mean = 0.0;
    double ci95_halfwidth = 0.0;
    double sample_variance = 0.0;
    std::uint64_t seed = 0;
    std::optional<std::vector<double>> raw_samples;
};

// Monte Carlo estimate of L_n over i.i.d. replications on independent RNG
// substreams. Deterministic for fixed (inputs, seed) regardless of `threads`
// (0 = hardware concurrency).
SimulationReport estimate_L_n(std::int64_t n, const ChannelConfig& config, std::int64_t reps,
                              std::uint64_t seed, int threads = 0, bool keep_raw = false);

enum class AccessScheme { Gated, Windowed };

struct ArrivalProcess {
    double rate = 0.1;     // packets per slot
    AccessScheme access = AccessScheme::Windowed;
    double window = 1.0;   // slots; Windowed only
    std::int64_t horizon = 100000; // slots
    std::uint64_t seed = 1;
};

// Continuous operation under Poisson arrivals. `delay` aggregates per-packet
// delay (arrival instant to the end of the decoding slot, in slots) with a
// batch-means confidence interval. The backlog trajectory holds the service
// lag of each sampled window (windowed) or the batch sizes (gated); the
// explosion flag fires when the regression slope over the last half of the
// horizon is positive with p < 0.01.
struct ArrivalsReport {
    SimulationReport delay;
    std::int64_t packets = 0;
    std::int64_t served_intervals = 0;
    bool backlog_explosion = false;
    double backlog_slope = 0.0;   // slots per served interval
    double slope_t_stat = 0.0;
    std::vector<std::pair<double, double>> backlog_trajectory; // (interval index, lag)
};

ArrivalsReport run_arrivals(const ArrivalProcess& process, const ChannelConfig& config);

// CSV dump of a trace: slot,occupancy,feedback.
void write_trace_csv(std::ostream& out, const CriTrace& trace);

// JSON report {config, seed, reps, mean, ci95, method:"mc"}.
std::string report_json(const SimulationReport& report, const ChannelConfig& config);

} // namespace mprtree
