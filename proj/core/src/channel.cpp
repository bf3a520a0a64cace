#include "mprtree/channel.hpp"

namespace mprtree {

const char* to_string(TreeVariant v) {
    return v == TreeVariant::Bta ? "bta" : "mta";
}

const char* to_string(Feedback f) {
    switch (f) {
    case Feedback::Idle: return "0";
    case Feedback::Success: return "1";
    case Feedback::Collision: return "e";
    }
    return "?";
}

TreeVariant parse_variant(const std::string& name) {
    if (name == "bta" || name == "BTA") return TreeVariant::Bta;
    if (name == "mta" || name == "MTA") return TreeVariant::Mta;
    throw ValidationError("unknown tree variant: " + name);
}

ChannelConfig::ChannelConfig(int mpr_capability, double split_bias, TreeVariant variant)
    : mpr_capability_(mpr_capability), split_bias_(split_bias), variant_(variant) {
    if (mpr_capability < 1 || mpr_capability > kMaxMprCapability)
        throw ValidationError("K must be in [1, " + std::to_string(kMaxMprCapability) +
                              "], got " + std::to_string(mpr_capability));
    if (!(split_bias > 0.0) || !(split_bias < 1.0))
        throw ValidationError("split bias p must lie strictly inside (0, 1), got " +
                              std::to_string(split_bias));
}

ChannelConfig ChannelConfig::fair(int mpr_capability, TreeVariant variant) {
    return ChannelConfig(mpr_capability, 0.5, variant);
}

Feedback classify_slot(std::int64_t occupancy, int mpr_capability) {
    if (occupancy < 0)
        throw ValidationError("slot occupancy cannot be negative");
    if (mpr_capability < 1)
        throw ValidationError("K must be positive");
    if (occupancy == 0) return Feedback::Idle;
    return occupancy <= mpr_capability ? Feedback::Success : Feedback::Collision;
}

} // namespace mprtree
