#include "mprtree/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <ostream>
#include <thread>

#include <json.hpp>

namespace mprtree {
namespace {

constexpr std::int64_t kRunawaySlots = 1'000'000'000;

// Supplies group decisions for splits: random draws or a replay script.
struct SplitSource {
    SplitMix64* rng = nullptr;
    const std::vector<std::vector<std::uint8_t>>* script = nullptr;
    double p = 0.5;
    std::size_t split_index = 0;

    // Draws `count` decisions, returns how many chose group 0; appends the
    // decisions to `record` when recording.
    std::int64_t draw_group0(std::int64_t count, std::vector<std::uint8_t>* record) {
        std::int64_t zeros = 0;
        if (rng) {
            for (std::int64_t i = 0; i < count; ++i) {
                const std::uint8_t b = rng->bernoulli(p) ? 0 : 1;
                if (b == 0) ++zeros;
                if (record) record->push_back(b);
            }
            return zeros;
        }
        if (split_index >= script->size())
            throw ValidationError("replay script exhausted before the CRI completed");
        const auto& draws = (*script)[split_index++];
        if (static_cast<std::int64_t>(draws.size()) != count)
            throw ValidationError("replay script split size does not match the transmitter count");
        for (const std::uint8_t b : draws) {
            if (b > 1) throw ValidationError("replay script decisions must be 0 or 1");
            if (b == 0) ++zeros;
        }
        if (record) record->insert(record->end(), draws.begin(), draws.end());
        return zeros;
    }
};

CriTrace run_cri_impl(std::int64_t n, const ChannelConfig& config, SplitSource& source,
                      bool record_splits, bool record_slots) {
    if (n < 0) throw ValidationError("batch size n cannot be negative");
    const int K = config.K();
    const bool mta = config.variant() == TreeVariant::Mta;

    CriTrace trace;
    std::vector<std::int64_t> stack; // group sizes, transmitting group at the back
    stack.push_back(n);
    bool certain_collision = false; // next slot is a group-0 slot of a > K split

    while (!stack.empty()) {
        const std::int64_t occ = stack.back();
        const Feedback fb = classify_slot(occ, K);
        ++trace.length;
        if (record_slots) trace.slots.push_back({occ, fb});
        if (trace.length > kRunawaySlots)
            throw NumericalError("run_cri: runaway CRI exceeded the slot cap");

        if (fb == Feedback::Collision) {
            std::vector<std::uint8_t>* rec = nullptr;
            if (record_splits) rec = &trace.split_decisions.emplace_back();
            const std::int64_t zeros = source.draw_group0(occ, rec);
            stack.back() = occ - zeros;
            stack.push_back(zeros);
            certain_collision = true;
            continue;
        }

        stack.pop_back();
        if (fb == Feedback::Idle && mta && certain_collision && !stack.empty()) {
            const std::int64_t group1 = stack.back();
            std::vector<std::uint8_t>* rec = nullptr;
            if (record_splits) rec = &trace.split_decisions.emplace_back();
            const std::int64_t zeros = source.draw_group0(group1, rec);
            stack.back() = group1 - zeros;
            stack.push_back(zeros);
            certain_collision = true;
        } else {
            certain_collision = false;
        }
    }
    return trace;
}

double normal_ci95(double variance, std::int64_t samples) {
    if (samples < 2 || !(variance > 0.0)) return 0.0;
    return 1.959963984540054 * std::sqrt(variance / double(samples));
}

struct ChunkStats {
    double sum = 0.0;
    double sum_sq = 0.0;
};

// Least-squares slope with its t statistic over (x_i, y_i).
struct SlopeFit {
    double slope = 0.0;
    double t_stat = 0.0;
};

SlopeFit fit_slope(const std::vector<std::pair<double, double>>& pts) {
    const std::size_t n = pts.size();
    SlopeFit out;
    if (n < 3) return out;
    double mx = 0.0, my = 0.0;
    for (const auto& [x, y] : pts) {
        mx += x;
        my += y;
    }
    mx /= double(n);
    my /= double(n);
    double sxx = 0.0, sxy = 0.0;
    for (const auto& [x, y] : pts) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if (!(sxx > 0.0)) return out;
    out.slope = sxy / sxx;
    double sse = 0.0;
    for (const auto& [x, y] : pts) {
        const double r = y - my - out.slope * (x - mx);
        sse += r * r;
    }
    const double sigma2 = sse / double(n - 2);
    const double se = std::sqrt(sigma2 / sxx);
    out.t_stat = se > 0.0 ? out.slope / se : (out.slope > 0.0 ? 1e9 : 0.0);
    return out;
}

} // namespace

std::int64_t SplitMix64::poisson(double mean) {
    if (mean < 0.0) throw ValidationError("poisson mean cannot be negative");
    std::int64_t total = 0;
    while (mean > 30.0) { // additivity keeps the exponentials in range
        double prod = uniform01();
        const double floor_l = std::exp(-30.0);
        std::int64_t k = 0;
        while (prod > floor_l) {
            prod *= uniform01();
            ++k;
        }
        total += k;
        mean -= 30.0;
    }
    const double limit = std::exp(-mean);
    double prod = uniform01();
    std::int64_t k = 0;
    while (prod > limit) {
        prod *= uniform01();
        ++k;
    }
    return total + k;
}

CriTrace run_cri(std::int64_t n, const ChannelConfig& config, std::uint64_t seed,
                 bool record_splits) {
    SplitMix64 rng = SplitMix64::substream(seed, 0);
    SplitSource source;
    source.rng = &rng;
    source.p = config.p();
    return run_cri_impl(n, config, source, record_splits, /*record_slots=*/true);
}

CriTrace run_cri_replayed(std::int64_t n, const ChannelConfig& config,
                          const std::vector<std::vector<std::uint8_t>>& splits) {
    SplitSource source;
    source.script = &splits;
    return run_cri_impl(n, config, source, /*record_splits=*/true, /*record_slots=*/true);
}

SimulationReport estimate_L_n(std::int64_t n, const ChannelConfig& config, std::int64_t reps,
                              std::uint64_t seed, int threads, bool keep_raw) {
    if (reps < 2) throw ValidationError("estimate_L_n requires at least 2 replications");
    if (n < 0) throw ValidationError("batch size n cannot be negative");

    int workers = threads > 0 ? threads : int(std::thread::hardware_concurrency());
    workers = std::clamp(workers, 1, 64);
    const std::int64_t chunk = (reps + workers - 1) / workers;

    std::vector<double> raw;
    if (keep_raw) raw.resize(reps);
    double* raw_ptr = keep_raw ? raw.data() : nullptr;

    auto run_chunk = [&](std::int64_t lo, std::int64_t hi) {
        ChunkStats stats;
        for (std::int64_t r = lo; r < hi; ++r) {
            SplitMix64 rng = SplitMix64::substream(seed, std::uint64_t(r));
            SplitSource source;
            source.rng = &rng;
            source.p = config.p();
            const auto trace =
                run_cri_impl(n, config, source, /*record_splits=*/false, /*record_slots=*/false);
            const double len = double(trace.length);
            stats.sum += len;
            stats.sum_sq += len * len;
            if (raw_ptr) raw_ptr[r] = len;
        }
        return stats;
    };

    std::vector<std::future<ChunkStats>> futures;
    for (std::int64_t lo = 0; lo < reps; lo += chunk) {
        const std::int64_t hi = std::min(reps, lo + chunk);
        futures.push_back(std::async(std::launch::async, run_chunk, lo, hi));
    }
    double sum = 0.0, sum_sq = 0.0;
    for (auto& f : futures) { // fixed combination order keeps results bit-stable
        const ChunkStats s = f.get();
        sum += s.sum;
        sum_sq += s.sum_sq;
    }

    SimulationReport out;
    out.replications = reps;
    out.seed = seed;
    out.mean = sum / double(reps);
    const double var = std::max(0.0, (sum_sq - double(reps) * out.mean * out.mean) /
                                         double(reps - 1));
    out.sample_variance = var;
    out.ci95_halfwidth = normal_ci95(var, reps);
    if (keep_raw) out.raw_samples = std::move(raw);
    return out;
}

namespace {

// Per-packet execution of one CRI so every packet's decoding slot is known.
// Returns the CRI length; appends each packet's delay to `delays`.
std::int64_t resolve_batch(const std::vector<double>& arrivals, double start_slot,
                           const ChannelConfig& config, SplitMix64& rng,
                           std::vector<double>& delays) {
    const std::int64_t n = static_cast<std::int64_t>(arrivals.size());
    if (n == 0) return 1; // an empty batch still consumes one idle slot

    const int K = config.K();
    const bool mta = config.variant() == TreeVariant::Mta;
    const double p = config.p();

    std::vector<std::int32_t> counter(n, 0);
    std::int64_t slot = 0;
    // Pending-group depth as the access point sees it. Splits can leave empty
    // groups whose idle slots belong to the CRI (l_0 = 1), so termination
    // follows the depth, not the count of resolved users.
    std::int64_t depth = 1;
    bool certain_collision = false;

    while (depth > 0) {
        std::int64_t occ = 0;
        for (const auto c : counter)
            if (c == 0) ++occ;
        const Feedback fb = classify_slot(occ, K);
        const double slot_end = start_slot + double(slot + 1);
        ++slot;
        if (slot > kRunawaySlots)
            throw NumericalError("run_arrivals: runaway CRI exceeded the slot cap");

        switch (fb) {
        case Feedback::Collision:
            for (std::int64_t i = 0; i < n; ++i) {
                if (counter[i] == 0)
                    counter[i] = rng.bernoulli(p) ? 0 : 1;
                else if (counter[i] > 0)
                    counter[i] += 1;
            }
            certain_collision = true;
            depth += 1;
            break;
        case Feedback::Success:
            for (std::int64_t i = 0; i < n; ++i) {
                if (counter[i] == 0) {
                    counter[i] = -1;
                    delays.push_back(slot_end - arrivals[i]);
                } else if (counter[i] >= 1) {
                    counter[i] -= 1;
                }
            }
            certain_collision = false;
            depth -= 1;
            break;
        case Feedback::Idle:
            if (mta && certain_collision && depth > 1) {
                for (std::int64_t i = 0; i < n; ++i)
                    if (counter[i] == 1) counter[i] = rng.bernoulli(p) ? 0 : 1;
                // deeper counters stay put: the skipped slot never happened
            } else {
                for (std::int64_t i = 0; i < n; ++i)
                    if (counter[i] >= 1) counter[i] -= 1;
                certain_collision = false;
                depth -= 1;
            }
            break;
        }
    }
    return slot;
}

} // namespace

ArrivalsReport run_arrivals(const ArrivalProcess& process, const ChannelConfig& config) {
    if (!(process.rate > 0.0)) throw ValidationError("arrival rate must be positive");
    if (process.horizon < 10000) throw ValidationError("horizon must be at least 1e4 slots");
    if (process.access == AccessScheme::Windowed && !(process.window > 0.0))
        throw ValidationError("windowed access requires a positive window");

    SplitMix64 rng = SplitMix64::substream(process.seed, 0);
    ArrivalsReport out;
    std::vector<double> delays;

    const std::int64_t horizon = process.horizon;
    std::vector<std::pair<double, double>> lags;

    if (process.access == AccessScheme::Windowed) {
        const double delta = process.window;
        const std::int64_t expected_windows =
            std::max<std::int64_t>(1, std::int64_t(double(horizon) / delta));
        const std::int64_t stride = std::max<std::int64_t>(1, expected_windows / 200000);

        double t_service = 0.0;
        std::int64_t window = 0;
        while (t_service < double(horizon)) {
            const double open = double(window) * delta;
            const double close = open + delta;
            const double start = std::max(t_service, std::ceil(close));

            const std::int64_t n = rng.poisson(process.rate * delta);
            std::vector<double> arrivals(n);
            for (auto& a : arrivals) a = open + delta * rng.uniform01();

            const std::int64_t len = resolve_batch(arrivals, start, config, rng, delays);
            t_service = start + double(len);
            out.packets += n;
            ++out.served_intervals;
            if (window % stride == 0) lags.emplace_back(double(window), start - close);
            ++window;
        }
    } else {
        double t = 0.0;
        std::vector<double> batch;
        std::int64_t batch_index = 0;
        const std::int64_t approx_batches = std::max<std::int64_t>(64, horizon / 4);
        const std::int64_t stride = std::max<std::int64_t>(1, approx_batches / 200000);
        while (t < double(horizon)) {
            const std::int64_t len = resolve_batch(batch, t, config, rng, delays);
            out.packets += static_cast<std::int64_t>(batch.size());
            ++out.served_intervals;
            if (batch_index % stride == 0) lags.emplace_back(double(batch_index), double(batch.size()));
            ++batch_index;
            // arrivals during this CRI gate into the next batch
            const std::int64_t m = rng.poisson(process.rate * double(len));
            batch.assign(m, 0.0);
            for (auto& a : batch) a = t + double(len) * rng.uniform01();
            t += double(len);
        }
    }

    // Instability: positive regression slope (p < 0.01) over the last half,
    // fitted on batch means to tame autocorrelation.
    const std::size_t half = lags.size() / 2;
    std::vector<std::pair<double, double>> tail(lags.begin() + half, lags.end());
    constexpr std::size_t kBatches = 32;
    std::vector<std::pair<double, double>> means;
    if (tail.size() >= kBatches * 2) {
        const std::size_t per = tail.size() / kBatches;
        for (std::size_t b = 0; b < kBatches; ++b) {
            double mx = 0.0, my = 0.0;
            for (std::size_t i = b * per; i < (b + 1) * per; ++i) {
                mx += tail[i].first;
                my += tail[i].second;
            }
            means.emplace_back(mx / double(per), my / double(per));
        }
    } else {
        means = tail;
    }
    const SlopeFit fit = fit_slope(means);
    out.backlog_slope = fit.slope;
    out.slope_t_stat = fit.t_stat;
    out.backlog_explosion = fit.slope > 0.0 && fit.t_stat > 2.457; // one-sided p < 0.01, df ~ 30
    out.backlog_trajectory = std::move(lags);

    // Batch-means CI over arrival order.
    SimulationReport& rep = out.delay;
    rep.seed = process.seed;
    if (!delays.empty()) {
        constexpr std::size_t kDelayBatches = 20;
        const std::size_t per = std::max<std::size_t>(1, delays.size() / kDelayBatches);
        std::vector<double> batch_means;
        double total = 0.0;
        for (std::size_t lo = 0; lo < delays.size(); lo += per) {
            const std::size_t hi = std::min(delays.size(), lo + per);
            double s = 0.0;
            for (std::size_t i = lo; i < hi; ++i) s += delays[i];
            total += s;
            batch_means.push_back(s / double(hi - lo));
        }
        rep.mean = total / double(delays.size());
        rep.replications = static_cast<std::int64_t>(batch_means.size());
        if (batch_means.size() >= 2) {
            double var = 0.0;
            for (const double m : batch_means) var += (m - rep.mean) * (m - rep.mean);
            var /= double(batch_means.size() - 1);
            rep.sample_variance = var;
            rep.ci95_halfwidth = normal_ci95(var, static_cast<std::int64_t>(batch_means.size()));
        }
    }
    return out;
}

void write_trace_csv(std::ostream& out, const CriTrace& trace) {
    out << "slot,occupancy,feedback\n";
    for (std::size_t j = 0; j < trace.slots.size(); ++j)
        out << (j + 1) << ',' << trace.slots[j].occupancy << ','
            << to_string(trace.slots[j].feedback) << '\n';
}

std::string report_json(const SimulationReport& report, const ChannelConfig& config) {
    nlohmann::json j;
    j["config"] = {{"K", config.K()}, {"p", config.p()}, {"variant", to_string(config.variant())}};
    j["seed"] = report.seed;
    j["reps"] = report.replications;
    j["mean"] = report.mean;
    j["ci95"] = report.ci95_halfwidth;
    j["method"] = "mc";
    return j.dump(2);
}

} // namespace mprtree
