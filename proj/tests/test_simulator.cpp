#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "mprtree/exact.hpp"
#include "mprtree/rng.hpp"
#include "mprtree/simulator.hpp"

using namespace mprtree;

namespace {

// Reference implementation: the per-user counter protocol, executed literally
// (one counter per user, updates straight from the feedback cases). Used as
// the structural oracle for the production simulator.
struct UserSimResult {
    CriTrace trace;
    bool every_user_decoded_once = true;
    bool no_resolved_transmissions = true;
};

UserSimResult run_cri_users(std::int64_t n, const ChannelConfig& config, SplitMix64 rng) {
    UserSimResult out;
    const int K = config.K();
    const bool mta = config.variant() == TreeVariant::Mta;
    std::vector<std::int32_t> counter(n, 0);
    std::vector<int> decoded(n, 0);
    std::int64_t depth = 1; // pending groups as the AP sees them; 0 ends the CRI
    bool certain = false;

    while (depth > 0) {
        std::int64_t occ = 0;
        for (std::int64_t i = 0; i < n; ++i) {
            if (counter[i] == 0) {
                ++occ;
                if (decoded[i]) out.no_resolved_transmissions = false;
            }
        }
        const Feedback fb = classify_slot(occ, K);
        out.trace.slots.push_back({occ, fb});
        ++out.trace.length;

        if (fb == Feedback::Collision) {
            auto& rec = out.trace.split_decisions.emplace_back();
            for (std::int64_t i = 0; i < n; ++i) {
                if (counter[i] == 0) {
                    const std::uint8_t b = rng.bernoulli(config.p()) ? 0 : 1;
                    rec.push_back(b);
                    counter[i] = b;
                } else if (counter[i] > 0) {
                    counter[i] += 1;
                }
            }
            certain = true;
            ++depth;
        } else if (fb == Feedback::Success) {
            for (std::int64_t i = 0; i < n; ++i) {
                if (counter[i] == 0) {
                    counter[i] = -1;
                    decoded[i] += 1;
                } else if (counter[i] >= 1) {
                    counter[i] -= 1;
                }
            }
            certain = false;
            --depth;
        } else if (mta && certain && depth > 1) {
            auto& rec = out.trace.split_decisions.emplace_back();
            for (std::int64_t i = 0; i < n; ++i) {
                if (counter[i] == 1) {
                    const std::uint8_t b = rng.bernoulli(config.p()) ? 0 : 1;
                    rec.push_back(b);
                    counter[i] = b;
                }
            }
        } else {
            for (std::int64_t i = 0; i < n; ++i)
                if (counter[i] >= 1) counter[i] -= 1;
            certain = false;
            --depth;
        }
    }

    for (std::int64_t i = 0; i < n; ++i)
        if (decoded[i] != 1) out.every_user_decoded_once = false;
    return out;
}

} // namespace

TEST_CASE("empty batch costs one idle slot") {
    for (auto variant : {TreeVariant::Bta, TreeVariant::Mta}) {
        const auto trace = run_cri(0, ChannelConfig::fair(2, variant), 99);
        CHECK(trace.length == 1);
        REQUIRE(trace.slots.size() == 1);
        CHECK(trace.slots[0].occupancy == 0);
        CHECK(trace.slots[0].feedback == Feedback::Idle);
    }
}

TEST_CASE("worked trace replays to the published feedback sequence") {
    // 5 users on a 2-collision channel; slot-2 split sends users {1,3,4} to
    // group 0, slot-3 split sends users {1,4} to group 0.
    const std::vector<std::vector<std::uint8_t>> splits = {
        {0, 1, 0, 0, 1},
        {0, 1, 0},
    };
    const auto trace = run_cri_replayed(5, ChannelConfig::fair(2), splits);
    CHECK(trace.length == 5);
    REQUIRE(trace.slots.size() == 5);
    const Feedback expected[5] = {Feedback::Collision, Feedback::Collision, Feedback::Success,
                                  Feedback::Success, Feedback::Success};
    const std::int64_t occupancy[5] = {5, 3, 2, 1, 2};
    for (int j = 0; j < 5; ++j) {
        CHECK(trace.slots[j].feedback == expected[j]);
        CHECK(trace.slots[j].occupancy == occupancy[j]);
    }
}

TEST_CASE("replay validation") {
    const std::vector<std::vector<std::uint8_t>> short_script = {{0, 1, 0, 0, 1}};
    CHECK_THROWS_AS(run_cri_replayed(5, ChannelConfig::fair(2), short_script), ValidationError);
    const std::vector<std::vector<std::uint8_t>> bad_size = {{0, 1}};
    CHECK_THROWS_AS(run_cri_replayed(5, ChannelConfig::fair(2), bad_size), ValidationError);
}

TEST_CASE("production simulator matches the literal per-user protocol") {
    SplitMix64 seeder(4242);
    for (int trial = 0; trial < 200; ++trial) {
        const std::int64_t n = std::int64_t(seeder() % 40);
        const int K = 1 << (seeder() % 3);
        const double p = (trial % 2 == 0) ? 0.5 : 0.3;
        const auto variant = (trial % 4 < 2) ? TreeVariant::Bta : TreeVariant::Mta;
        const ChannelConfig cfg(K, p, variant);
        const std::uint64_t seed = seeder();

        const auto fast = run_cri(n, cfg, seed, /*record_splits=*/true);
        const auto ref = run_cri_users(n, cfg, SplitMix64::substream(seed, 0));

        CHECK(ref.every_user_decoded_once);
        CHECK(ref.no_resolved_transmissions);

        REQUIRE(fast.length == ref.trace.length);
        for (std::size_t j = 0; j < fast.slots.size(); ++j) {
            CHECK(fast.slots[j].occupancy == ref.trace.slots[j].occupancy);
            CHECK(fast.slots[j].feedback == ref.trace.slots[j].feedback);
        }
        REQUIRE(fast.split_decisions.size() == ref.trace.split_decisions.size());
        for (std::size_t s = 0; s < fast.split_decisions.size(); ++s)
            CHECK(fast.split_decisions[s] == ref.trace.split_decisions[s]);
    }
}

TEST_CASE("determinism and substream independence") {
    const ChannelConfig cfg(2, 0.4, TreeVariant::Mta);
    const auto a = run_cri(17, cfg, 1234, true);
    const auto b = run_cri(17, cfg, 1234, true);
    CHECK(a.length == b.length);
    CHECK(a.split_decisions == b.split_decisions);

    const auto r1 = estimate_L_n(9, cfg, 5000, 77, 4);
    const auto r2 = estimate_L_n(9, cfg, 5000, 77, 1);
    CHECK(r1.mean == r2.mean); // fixed reduction order, thread count irrelevant
    CHECK(r1.ci95_halfwidth == r2.ci95_halfwidth);

    const auto r3 = estimate_L_n(9, cfg, 5000, 78, 4);
    CHECK(r1.mean != r3.mean);
}

TEST_CASE("deterministic batches below the MPR capability") {
    const auto rep = estimate_L_n(3, ChannelConfig::fair(4), 500, 5);
    CHECK(rep.mean == 1.0);
    CHECK(rep.ci95_halfwidth == 0.0);
}

TEST_CASE("Monte Carlo agrees with the exact values") {
    SUBCASE("BTA L_2 = 5") {
        const auto rep = estimate_L_n(2, ChannelConfig::fair(1), 1000000, 11);
        CHECK(std::abs(rep.mean - 5.0) < 3.0 * rep.ci95_halfwidth);
    }
    SUBCASE("BTA L_3 = 23/3") {
        const auto rep = estimate_L_n(3, ChannelConfig::fair(1), 1000000, 12);
        CHECK(std::abs(rep.mean - 23.0 / 3.0) < 3.0 * rep.ci95_halfwidth);
    }
    SUBCASE("MTA L_2 = 4.5") {
        const auto rep =
            estimate_L_n(2, ChannelConfig::fair(1, TreeVariant::Mta), 1000000, 13);
        CHECK(std::abs(rep.mean - 4.5) < 3.0 * rep.ci95_halfwidth);
    }
}

TEST_CASE("recorded splits pass a chi-square uniformity test") {
    for (double p : {0.5, 0.3}) {
        const ChannelConfig cfg(1, p);
        std::int64_t zeros = 0, total = 0;
        std::uint64_t seed = 0;
        while (total < 1000000) {
            const auto trace = run_cri(25, cfg, seed++, true);
            for (const auto& split : trace.split_decisions) {
                for (const auto b : split) {
                    zeros += (b == 0);
                    ++total;
                }
            }
        }
        const double e0 = double(total) * p;
        const double e1 = double(total) * (1.0 - p);
        const double o0 = double(zeros);
        const double o1 = double(total - zeros);
        const double chi2 = (o0 - e0) * (o0 - e0) / e0 + (o1 - e1) * (o1 - e1) / e1;
        CHECK(chi2 < 10.828); // chi^2_{1, 0.001}
    }
}

TEST_CASE("report JSON carries the simulation contract") {
    const auto cfg = ChannelConfig::fair(2);
    const auto rep = estimate_L_n(4, cfg, 100, 3);
    const std::string json = report_json(rep, cfg);
    CHECK(json.find("\"method\": \"mc\"") != std::string::npos);
    CHECK(json.find("\"K\": 2") != std::string::npos);
    CHECK(json.find("\"seed\": 3") != std::string::npos);
    CHECK(json.find("\"reps\": 100") != std::string::npos);
}

TEST_CASE("trace CSV dump") {
    const auto trace = run_cri_replayed(5, ChannelConfig::fair(2),
                                        {{0, 1, 0, 0, 1}, {0, 1, 0}});
    std::ostringstream out;
    write_trace_csv(out, trace);
    CHECK(out.str() == "slot,occupancy,feedback\n"
                       "1,5,e\n2,3,e\n3,2,1\n4,1,1\n5,2,1\n");
}

TEST_CASE("windowed arrivals at light load resolve within one window") {
    ArrivalProcess process;
    process.rate = 0.01;
    process.access = AccessScheme::Windowed;
    process.window = 2.675;
    process.horizon = 200000;
    process.seed = 21;
    const auto rep = run_arrivals(process, ChannelConfig::fair(1));
    CHECK(rep.packets > 1000);
    CHECK_FALSE(rep.backlog_explosion);
    CHECK(rep.delay.mean <= process.window + 1.0 + 0.01);
}

TEST_CASE("windowed arrivals: stable below lambda_S, unstable above lambda_U") {
    const double lambda_s = 0.42951, delta_s = 2.675;
    ArrivalProcess process;
    process.access = AccessScheme::Windowed;
    process.window = delta_s;
    process.horizon = 400000; // short horizons here; the acceptance suite runs 1e7
    process.seed = 5;

    process.rate = 0.80 * lambda_s;
    const auto stable = run_arrivals(process, ChannelConfig::fair(1));
    CHECK_FALSE(stable.backlog_explosion);

    process.rate = 1.25 * lambda_s;
    const auto unstable = run_arrivals(process, ChannelConfig::fair(1));
    CHECK(unstable.backlog_explosion);
    CHECK(unstable.backlog_slope > 0.0);
}

TEST_CASE("gated arrivals stay stable well below the gated bound") {
    ArrivalProcess process;
    process.rate = 0.25; // gated BTA bound is ~0.346
    process.access = AccessScheme::Gated;
    process.horizon = 200000;
    process.seed = 8;
    const auto rep = run_arrivals(process, ChannelConfig::fair(1));
    CHECK_FALSE(rep.backlog_explosion);
    CHECK(rep.delay.mean > 0.0);
}

TEST_CASE("arrival process validation") {
    ArrivalProcess p;
    p.rate = 0.0;
    CHECK_THROWS_AS(run_arrivals(p, ChannelConfig::fair(1)), ValidationError);
    p.rate = 0.1;
    p.horizon = 100;
    CHECK_THROWS_AS(run_arrivals(p, ChannelConfig::fair(1)), ValidationError);
    p.horizon = 100000;
    p.access = AccessScheme::Windowed;
    p.window = 0.0;
    CHECK_THROWS_AS(run_arrivals(p, ChannelConfig::fair(1)), ValidationError);
}

TEST_CASE("poisson sampler moments") {
    SplitMix64 rng(31337);
    for (double mean : {0.8, 7.5, 90.0}) {
        double sum = 0.0, sum_sq = 0.0;
        const int draws = 200000;
        for (int i = 0; i < draws; ++i) {
            const double v = double(rng.poisson(mean));
            sum += v;
            sum_sq += v * v;
        }
        const double m = sum / draws;
        const double var = sum_sq / draws - m * m;
        CHECK(m == doctest::Approx(mean).epsilon(0.02));
        CHECK(var == doctest::Approx(mean).epsilon(0.05));
    }
}
