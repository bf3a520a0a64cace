#include "mprtree/stability.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <future>
#include <limits>
#include <ostream>

namespace mprtree {
namespace {

// Upper bound on Pr(Poisson(x) >= n) for n > x, via the geometric-ratio tail
// of the pmf.
double poisson_upper_tail(double x, std::int64_t n, double log_pmf_n) {
    const double ratio = x / double(n + 1);
    if (ratio >= 1.0) return 1.0;
    return std::exp(log_pmf_n) / (1.0 - ratio);
}

double maximize_on_bracket(const std::function<double(double)>& h, double lo, double hi,
                           double rel_tol, double& arg_out) {
    // Coarse grid to localize the maximum, then golden-section refinement.
    constexpr int kGrid = 512;
    int best = 0;
    double best_val = -std::numeric_limits<double>::infinity();
    std::vector<double> zs(kGrid);
    for (int i = 0; i < kGrid; ++i) {
        const double z = lo + (hi - lo) * (double(i) + 0.5) / double(kGrid);
        zs[i] = z;
        const double v = h(z);
        if (v > best_val) {
            best_val = v;
            best = i;
        }
    }
    if (!std::isfinite(best_val))
        throw NumericalError("stable_throughput_bounds: objective not finite on bracket");

    double a = best > 0 ? zs[best - 1] : lo;
    double b = best + 1 < kGrid ? zs[best + 1] : hi;
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - invphi * (b - a);
    double d = a + invphi * (b - a);
    double fc = h(c), fd = h(d);
    while ((b - a) > rel_tol * std::max(1.0, std::abs(a) + std::abs(b))) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = h(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = h(d);
        }
    }
    arg_out = (a + b) / 2.0;
    return h(arg_out);
}

} // namespace

PoissonMixture poisson_mixture_L(double x, CriTable& table, const StabilityOptions& opts) {
    if (x < 0.0) throw ValidationError("poisson mean x must be nonnegative");
    PoissonMixture out;
    out.x = x;
    if (x == 0.0) {
        out.value = table.length(0);
        return out;
    }

    const std::int64_t n_trunc =
        static_cast<std::int64_t>(std::ceil(x + opts.poisson_margin * std::sqrt(x) + 50.0));
    table.ensure(n_trunc);

    double sum = 0.0;
    double log_term = -x; // log of x^n/n! e^{-x} at n = 0
    double term = std::exp(log_term);
    for (std::int64_t n = 0; n <= n_trunc; ++n) {
        sum += term * table.length(n);
        log_term += std::log(x) - std::log(double(n + 1));
        term = std::exp(log_term);
    }

    // Tail majorant: L_n <= b*n for n past the truncation point, with b read
    // off the computed table (slopes settle well before n_trunc).
    double slope = 0.0;
    for (std::int64_t n = std::max<std::int64_t>(1, n_trunc / 2); n <= n_trunc; ++n)
        slope = std::max(slope, (table.length(n) + 1.0) / double(n));
    const double tail_prob = poisson_upper_tail(x, n_trunc + 1, log_term);
    out.tail_bound = 2.0 * slope * (x + double(n_trunc)) * tail_prob;
    out.truncation_n = n_trunc;
    out.value = sum;
    return out;
}

LinearBounds linear_bounds(int m, CriTable& table, std::int64_t n_scan_max) {
    if (m < 1) throw ValidationError("linear_bounds requires m >= 1");
    if (n_scan_max <= m) throw ValidationError("n_scan_max must exceed m");
    table.ensure(m);

    std::vector<double> l_plus_1(m);
    for (int i = 0; i < m; ++i) l_plus_1[i] = table.length(i) + 1.0;

    std::vector<double> log_fact(n_scan_max + 2);
    for (std::size_t k = 0; k < log_fact.size(); ++k) log_fact[k] = std::lgamma(double(k + 1));

    LinearBounds out;
    out.n_scan_max = n_scan_max;
    out.alpha = std::numeric_limits<double>::infinity();
    out.beta = -std::numeric_limits<double>::infinity();

    // Running extrema up to the start of the last decade of n; used for the
    // convergence check below.
    const std::int64_t check_n = n_scan_max / 10;
    if (check_n <= m + 1)
        throw NumericalError("linear_bounds: scan range too short to assess convergence");
    double alpha_early = out.alpha, beta_early = out.beta;

    for (std::int64_t n = m + 1; n <= n_scan_max; ++n) {
        double max_log = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < m; ++i) {
            const double lc = log_fact[n] - log_fact[i] - log_fact[n - i];
            if (lc > max_log) max_log = lc;
        }
        double num = 0.0, den = 0.0;
        for (int i = 0; i < m; ++i) {
            const double w = std::exp(log_fact[n] - log_fact[i] - log_fact[n - i] - max_log);
            num += w * l_plus_1[i];
            den += w * double(i);
        }
        const double r = den > 0.0 ? num / den : std::numeric_limits<double>::infinity();
        if (r < out.alpha) {
            out.alpha = r;
            out.alpha_at = n;
        }
        if (r > out.beta) {
            out.beta = r;
            out.beta_at = n;
        }
        if (n == check_n) {
            alpha_early = out.alpha;
            beta_early = out.beta;
        }
    }

    if (std::isfinite(out.alpha)) {
        const double drift = std::max(std::abs(out.alpha - alpha_early) / out.alpha,
                                      std::abs(out.beta - beta_early) / out.beta);
        if (drift >= 1e-6)
            throw NumericalError(
                "linear_bounds: extremum still drifting at n_scan_max; raise the scan range");
    }
    return out;
}

double bounding_f(double x, int k, double z, CriTable& table) {
    if (z < 0.0) throw ValidationError("bounding_f requires z >= 0");
    table.ensure(k);
    double term = std::exp(-z); // z^i/i! e^{-z} at i = 0
    double sum = 0.0;
    for (int i = 0; i <= k; ++i) {
        sum += (table.length(i) - x * double(i) + 1.0) * term;
        term *= z / double(i + 1);
    }
    return x * z - 1.0 + sum;
}

StabilityReport stable_throughput_bounds(CriTable& table, const StabilityOptions& opts) {
    const auto bounds = linear_bounds(opts.m, table, opts.n_scan_max);

    StabilityReport rep;
    rep.K = table.config().K();
    rep.m = opts.m;
    rep.alpha_m = bounds.alpha;
    rep.beta_m = bounds.beta;
    rep.n_scan_max = bounds.n_scan_max;

    if (!std::isfinite(bounds.beta)) {
        // Degenerate order (the i-weighted denominator vanishes); the bound
        // exists but is vacuous.
        rep.lambda_S = 0.0;
        rep.lambda_U = 0.0;
        rep.delta_S = std::numeric_limits<double>::infinity();
        rep.load_at_opt = 0.0;
        return rep;
    }

    const double hi = opts.bracket_factor * double(rep.K);
    double z_star = 0.0;
    rep.lambda_S = maximize_on_bracket(
        [&](double z) { return z / bounding_f(bounds.beta, opts.m, z, table); }, 1e-9, hi,
        opts.golden_tol, z_star);
    rep.load_at_opt = z_star;
    rep.delta_S = bounding_f(bounds.beta, opts.m, z_star, table);

    double z_u = 0.0;
    rep.lambda_U = maximize_on_bracket(
        [&](double z) { return z / bounding_f(bounds.alpha, opts.m, z, table); }, 1e-9, hi,
        opts.golden_tol, z_u);
    return rep;
}

std::vector<StabilityReport> sweep_stability(const std::vector<int>& K_list,
                                             const StabilityOptions& opts, double p,
                                             TreeVariant variant) {
    std::vector<std::future<StabilityReport>> futures;
    futures.reserve(K_list.size());
    for (int K : K_list) {
        StabilityOptions per_k = opts;
        // The envelope is valid for m > K only; m = 1 already degenerates to
        // the vacuous bound on its own.
        if (per_k.m > 1 && per_k.m <= K) per_k.m = K + 16;
        futures.push_back(std::async(std::launch::async, [K, p, variant, per_k] {
            CriTable table(ChannelConfig(K, p, variant));
            return stable_throughput_bounds(table, per_k);
        }));
    }
    std::vector<StabilityReport> out;
    out.reserve(K_list.size());
    for (auto& f : futures) out.push_back(f.get());
    return out;
}

void write_stability_csv(std::ostream& out, const std::vector<StabilityReport>& rows,
                         const std::string& comment) {
    if (!comment.empty()) out << "# " << comment << "\n";
    out << "K,m,alpha_m,beta_m,lambda_S_over_K,lambda_U_over_K,load_opt,delta_S\n";
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%d,%d,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g\n", r.K, r.m,
                      r.alpha_m, r.beta_m, r.lambda_S / double(r.K), r.lambda_U / double(r.K),
                      r.load_at_opt, r.delta_S);
        out << buf;
    }
}

} // namespace mprtree
