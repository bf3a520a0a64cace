#pragma once

#include <cstdint>
#include <vector>

#include "mprtree/channel.hpp"

namespace mprtree {

// Which evaluation path produced a set of L_n values.
enum class CriMethod { Recursion, ClosedForm, CoefficientPath, Simulation };

const char* to_string(CriMethod m);

// Splitting weight g(n,i,p) = C(n,i) * (p^i (1-p)^(n-i) + p^(n-i) (1-p)^i).
// Symmetric in i <-> n-i; rejects i outside [0, n].
double g_weight(std::int64_t n, std::int64_t i, double p);

// Memoized expected conditional CRI lengths L_n for one channel config.
//
// The table is the production evaluation path: the three-case recursion for
// BTA, and for MTA the split-resolution system
//   A_n = 1 (n <= K),   A_n = 1 + B_n (n > K)
//   B_n = Pr(i=0)(1 + B_n) + sum_{i>=1} Pr(i)(A_i + A_{n-i})
// where i ~ Binomial(n, p) is the group-0 size and the Pr(i=0) term encodes
// the immediate re-split after an idle group-0 slot. Binomial weights are
// evaluated through log-factorials over a window around the mass of the
// distribution, so the table extends to n of order 10^5 and beyond.
//
// Not synchronized: confine one table to one thread, or guard it externally.
class CriTable {
public:
    explicit CriTable(ChannelConfig config);

    const ChannelConfig& config() const { return config_; }

    // L_n; grows the memo table on demand.
    double length(std::int64_t n);

    // T_n = n / (K * L_n), n >= 1.
    double throughput(std::int64_t n);

    // (n, L_n, T_n) row; T is reported as 0 for the empty batch.
    CriStatistic statistic(std::int64_t n);

    void ensure(std::int64_t n_max);
    std::int64_t computed_up_to() const {
        return static_cast<std::int64_t>(values_.size()) - 1;
    }

private:
    double compute_bta(std::int64_t n) const;
    double compute_mta(std::int64_t n) const;
    double log_pmf(std::int64_t n, std::int64_t i) const;

    ChannelConfig config_;
    double log_p_;
    double log_q_;
    std::vector<double> values_;    // values_[n] = L_n (A_n for MTA)
    std::vector<double> log_fact_;  // log_fact_[k] = lgamma(k+1)
};

// Expected CRI length via the BTA recursion. Convenience wrapper that builds
// a throwaway table; use CriTable directly for repeated queries.
double expected_cri_recursive(std::int64_t n, const ChannelConfig& config);

// Expected CRI length via the non-recursive alternating sum
//   L_n = 1 - C(n,K) sum_{j=1}^{n-K} 2j(-1)^j C(n-K,j)
//                       / ((j+K)(1 - p^(j+K) - (1-p)^(j+K))).
// BTA only. The sum cancels catastrophically as n grows, so evaluation
// switches from compensated double summation to arbitrary-precision floats
// once the predicted precision loss gets near the double mantissa; throws
// NumericalError if fewer than 6 significant decimal digits would survive.
double expected_cri_closed_form(std::int64_t n, const ChannelConfig& config);

// Force the compensated-double path regardless of the predicted loss.
// Verification hook for the cancellation guard.
double expected_cri_closed_form_double(std::int64_t n, const ChannelConfig& config);

// Power-series coefficients a_0..a_n_max of L(x) = sum a_n x^n:
//   a_0 = 1, a_j = 0 for 1 <= j <= K,
//   a_n = 2 (sum_{k=0}^{K} (-1)^(n-k+1) / (k!(n-k)!)) / (1 - p^n - (1-p)^n).
struct SeriesCoefficients {
    std::vector<double> a;
};
SeriesCoefficients series_coefficients(std::int64_t n_max, const ChannelConfig& config);

// Expected CRI length reconstructed from the power-series coefficients,
// L_n = sum_{j=0}^{n} n!/(n-j)! a_j, evaluated in arbitrary precision.
// BTA only; independent verification path for the other two.
double expected_cri_from_series(std::int64_t n, const ChannelConfig& config);

// Expected CRI length for the modified tree algorithm (MTA variant of the
// config is implied; the variant field is ignored).
double expected_cri_mta(std::int64_t n, const ChannelConfig& config);

// T_n = n / (K * L_n), with L_n from the variant-appropriate recursion.
double conditional_throughput(std::int64_t n, const ChannelConfig& config);

} // namespace mprtree
