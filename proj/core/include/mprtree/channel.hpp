#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace mprtree {

// Thrown on invalid configuration or argument values (CLI exit code 2).
struct ValidationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Thrown when a numerical guard trips: cancellation, non-convergence,
// optimizer failure (CLI exit code 3).
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Which collision-resolution tree is run on the channel. The modified tree
// algorithm (Mta) skips the certain-collision slot that follows an idle
// group-0 slot of a split.
enum class TreeVariant { Bta, Mta };

// Access-point feedback alphabet {0, 1, e}.
enum class Feedback : std::uint8_t { Idle = 0, Success = 1, Collision = 2 };

const char* to_string(TreeVariant v);
const char* to_string(Feedback f);

TreeVariant parse_variant(const std::string& name);

// One experiment family: K-collision channel capability plus the splitting
// rule. Immutable value type, safe to copy and share across threads.
class ChannelConfig {
public:
    // Largest K accepted by validation. All experiments of interest use
    // K <= 16; beyond 2^16 the analysis only stresses numerics.
    static constexpr int kMaxMprCapability = 1 << 16;

    ChannelConfig(int mpr_capability, double split_bias,
                  TreeVariant variant = TreeVariant::Bta);

    // Fair splitting with p == 1/2 held exactly, so is_fair() comparisons
    // never depend on parsing or arithmetic round-off.
    static ChannelConfig fair(int mpr_capability,
                              TreeVariant variant = TreeVariant::Bta);

    int K() const { return mpr_capability_; }
    double p() const { return split_bias_; }
    TreeVariant variant() const { return variant_; }
    bool is_fair() const { return split_bias_ == 0.5; }

    ChannelConfig with_variant(TreeVariant v) const {
        return ChannelConfig(mpr_capability_, split_bias_, v);
    }

    friend bool operator==(const ChannelConfig&, const ChannelConfig&) = default;

private:
    int mpr_capability_;
    double split_bias_;
    TreeVariant variant_;
};

// Slot outcome on the K-collision channel:
//   occupancy == 0      -> Idle
//   1 <= occupancy <= K -> Success (all packets decoded)
//   occupancy > K       -> Collision (nothing decoded)
Feedback classify_slot(std::int64_t occupancy, int mpr_capability);

// Exact/estimated conditional CRI statistic for one batch size.
struct CriStatistic {
    std::int64_t n = 0;  // batch size, packets
    double length = 1.0; // L_n, expected CRI length in slots
    double throughput = 0.0; // T_n = n / (K * L_n)
};

} // namespace mprtree
