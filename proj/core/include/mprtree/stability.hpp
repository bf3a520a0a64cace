#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "mprtree/exact.hpp"

namespace mprtree {

// Poisson mixture L(x) = sum_n L_n x^n/n! e^{-x}, truncated where the
// remaining mass is provably negligible.
struct PoissonMixture {
    double x = 0.0;
    double value = 1.0;
    std::int64_t truncation_n = 0;
    double tail_bound = 0.0; // absolute bound on the discarded tail
};

struct StabilityOptions {
    int m = 50;                       // bound order
    std::int64_t n_scan_max = 200000; // inf/sup scan range for alpha/beta
    double poisson_tail_rel = 1e-12;  // relative tail target for L(x)
    double poisson_margin = 12.0;     // extra sigmas beyond the mean
    double bracket_factor = 4.0;      // optimizer bracket (0, factor*K]
    double golden_tol = 1e-10;        // relative tolerance of the 1-D search
};

// Linear envelope alpha_m n - 1 <= L_n <= beta_m n - 1 (valid for n > m when
// m > K), obtained as inf/sup over n in (m, n_scan_max] of
//   r(n) = sum_{i<m} C(n,i)(L_i+1) / sum_{i<m} C(n,i) i.
struct LinearBounds {
    double alpha = 0.0;
    double beta = 0.0;
    std::int64_t alpha_at = 0; // scan argmin / argmax
    std::int64_t beta_at = 0;
    std::int64_t n_scan_max = 0;
};

// Stable/unstable throughput bounds with the optimal window for one (K, m).
struct StabilityReport {
    int K = 0;
    int m = 0; // effective bound order used
    double alpha_m = 0.0;
    double beta_m = 0.0;
    double lambda_S = 0.0; // packets per slot
    double lambda_U = 0.0;
    double delta_S = 0.0;   // optimal window, slots
    double load_at_opt = 0.0; // z* = lambda_S * delta_S
    std::int64_t n_scan_max = 0;
};

PoissonMixture poisson_mixture_L(double x, CriTable& table,
                                 const StabilityOptions& opts = {});

// Throws NumericalError if the extremum is still drifting at n_scan_max.
LinearBounds linear_bounds(int m, CriTable& table, std::int64_t n_scan_max = 200000);

// f(x, k, z) = x z - 1 + sum_{i=0}^{k} (L_i - x i + 1) z^i/i! e^{-z}.
double bounding_f(double x, int k, double z, CriTable& table);

// lambda_S = sup_z z / f(beta_m, m, z), lambda_U = sup_z z / f(alpha_m, m, z);
// delta_S = f(beta_m, m, z*) at the maximizer.
StabilityReport stable_throughput_bounds(CriTable& table, const StabilityOptions& opts = {});

// Per-K reports for a sweep over MPR capabilities. The bound order is raised
// to K + 16 whenever 1 < m <= K, since the linear envelope is only valid for
// m > K (m = 1 yields the vacuous bound by itself).
std::vector<StabilityReport> sweep_stability(const std::vector<int>& K_list,
                                             const StabilityOptions& opts = {},
                                             double p = 0.5,
                                             TreeVariant variant = TreeVariant::Bta);

// CSV schema: K,m,alpha_m,beta_m,lambda_S_over_K,lambda_U_over_K,load_opt,delta_S
// with 6 significant digits. `comment` (if nonempty) is emitted first as a
// '#' line; the header row always follows.
void write_stability_csv(std::ostream& out, const std::vector<StabilityReport>& rows,
                         const std::string& comment = {});

} // namespace mprtree
