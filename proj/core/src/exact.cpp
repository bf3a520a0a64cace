#include "mprtree/exact.hpp"

#include <boost/multiprecision/mpfr.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace mprtree {
namespace {

namespace mp = boost::multiprecision;
using BigFloat = mp::mpfr_float;

// Scoped override of the mpfr working precision (decimal digits).
struct PrecisionGuard {
    unsigned saved;
    explicit PrecisionGuard(unsigned digits10) : saved(BigFloat::default_precision()) {
        BigFloat::default_precision(digits10);
    }
    ~PrecisionGuard() { BigFloat::default_precision(saved); }
};

// Binomial pmf windows are cut where the Gaussian tail is ~exp(-112),
// far below every tolerance in use.
constexpr double kWindowSigmas = 15.0;
constexpr std::int64_t kWindowPad = 8;

template <typename Real>
struct NeumaierSum {
    Real sum{0};
    Real comp{0};
    void add(const Real& v) {
        Real t = sum + v;
        if (abs_val(sum) >= abs_val(v))
            comp += (sum - t) + v;
        else
            comp += (v - t) + sum;
        sum = t;
    }
    Real value() const { return sum + comp; }
    static Real abs_val(const Real& v) {
        using std::abs;
        return abs(v);
    }
};

void check_batch_size(std::int64_t n) {
    if (n < 0) throw ValidationError("batch size n cannot be negative");
}

} // namespace

const char* to_string(CriMethod m) {
    switch (m) {
    case CriMethod::Recursion: return "recursion";
    case CriMethod::ClosedForm: return "closed-form";
    case CriMethod::CoefficientPath: return "coefficients";
    case CriMethod::Simulation: return "simulation";
    }
    return "?";
}

double g_weight(std::int64_t n, std::int64_t i, double p) {
    if (i < 0 || i > n) throw ValidationError("g_weight requires 0 <= i <= n");
    if (!(p > 0.0) || !(p < 1.0)) throw ValidationError("g_weight requires p in (0, 1)");
    const double log_binom = std::lgamma(double(n + 1)) - std::lgamma(double(i + 1)) -
                             std::lgamma(double(n - i + 1));
    const double lp = std::log(p);
    const double lq = std::log1p(-p);
    const double a = double(i) * lp + double(n - i) * lq;
    const double b = double(n - i) * lp + double(i) * lq;
    return std::exp(log_binom + a) + std::exp(log_binom + b);
}

CriTable::CriTable(ChannelConfig config)
    : config_(config), log_p_(std::log(config.p())), log_q_(std::log1p(-config.p())) {
    values_.reserve(10000);
    values_.push_back(1.0); // L_0: an idle slot still costs one slot
    log_fact_ = {0.0, 0.0};
}

double CriTable::log_pmf(std::int64_t n, std::int64_t i) const {
    return log_fact_[n] - log_fact_[i] - log_fact_[n - i] +
           double(i) * log_p_ + double(n - i) * log_q_;
}

void CriTable::ensure(std::int64_t n_max) {
    if (n_max < 0) throw ValidationError("batch size n cannot be negative");
    while (static_cast<std::int64_t>(log_fact_.size()) <= n_max + 1) {
        const auto k = log_fact_.size();
        log_fact_.push_back(std::lgamma(double(k + 1)));
    }
    while (computed_up_to() < n_max) {
        const std::int64_t n = computed_up_to() + 1;
        values_.push_back(config_.variant() == TreeVariant::Bta ? compute_bta(n)
                                                                : compute_mta(n));
    }
}

double CriTable::length(std::int64_t n) {
    check_batch_size(n);
    ensure(n);
    return values_[n];
}

double CriTable::throughput(std::int64_t n) {
    if (n < 1) throw ValidationError("throughput requires n >= 1");
    return double(n) / (double(config_.K()) * length(n));
}

CriStatistic CriTable::statistic(std::int64_t n) {
    const double L = length(n);
    return CriStatistic{n, L, n == 0 ? 0.0 : double(n) / (double(config_.K()) * L)};
}

double CriTable::compute_bta(std::int64_t n) const {
    const int K = config_.K();
    if (n <= K) return 1.0;

    const double p = config_.p();
    const double g0 = std::exp(double(n) * log_p_) + std::exp(double(n) * log_q_);
    const double denom = 1.0 - g0;
    if (!(denom > 1e-300))
        throw NumericalError("expected_cri_recursive: degenerate denominator 1 - g(n,0,p)");

    NeumaierSum<double> small;
    for (std::int64_t i = 0; i <= K; ++i) {
        small.add(std::exp(log_pmf(n, i)));
        small.add(std::exp(log_pmf(n, n - i)));
    }

    if (n == K + 1) return (1.0 + small.value()) / denom;

    // sum_{i=K+1}^{n-1} g(n,i,p) L_i, folded so one pass over the binomial
    // mass window around n*p picks up both orientations of g.
    const double sigma = std::sqrt(double(n) * p * (1.0 - p));
    const std::int64_t center = std::llround(double(n) * p);
    const std::int64_t w = std::int64_t(kWindowSigmas * sigma) + kWindowPad;
    const std::int64_t lo = std::max<std::int64_t>(0, center - w);
    const std::int64_t hi = std::min<std::int64_t>(n, center + w);
    const std::int64_t c = std::clamp(center, lo, hi);

    const double ratio_up = p / (1.0 - p);
    NeumaierSum<double> acc;
    auto contribute = [&](std::int64_t j, double pmf) {
        if (pmf <= 0.0) return;
        double term = 0.0;
        if (j >= K + 1 && j <= n - 1) term += values_[j];
        const std::int64_t mirror = n - j;
        if (mirror >= K + 1 && mirror <= n - 1) term += values_[mirror];
        if (term != 0.0) acc.add(pmf * term);
    };

    const double pmf_c = std::exp(log_pmf(n, c));
    contribute(c, pmf_c);
    double pmf = pmf_c;
    for (std::int64_t j = c; j < hi; ++j) {
        pmf *= ratio_up * double(n - j) / double(j + 1);
        contribute(j + 1, pmf);
    }
    pmf = pmf_c;
    for (std::int64_t j = c; j > lo; --j) {
        pmf *= double(j) / (ratio_up * double(n - j + 1));
        contribute(j - 1, pmf);
    }

    return (1.0 + small.value() + acc.value()) / denom;
}

double CriTable::compute_mta(std::int64_t n) const {
    const int K = config_.K();
    if (n <= K) return 1.0;

    const double p = config_.p();
    const double p0 = std::exp(double(n) * log_q_); // empty group 0
    const double pn = std::exp(double(n) * log_p_); // everyone in group 0
    const double denom = 1.0 - p0 - pn;
    if (!(denom > 1e-300))
        throw NumericalError("expected_cri_mta: degenerate denominator 1 - P_0 - P_n");

    const double sigma = std::sqrt(double(n) * p * (1.0 - p));
    const std::int64_t center = std::llround(double(n) * p);
    const std::int64_t w = std::int64_t(kWindowSigmas * sigma) + kWindowPad;
    const std::int64_t lo = std::max<std::int64_t>(0, center - w);
    const std::int64_t hi = std::min<std::int64_t>(n, center + w);
    const std::int64_t c = std::clamp(center, lo, hi);

    const double ratio_up = p / (1.0 - p);
    NeumaierSum<double> acc;
    auto contribute = [&](std::int64_t j, double pmf) {
        if (pmf <= 0.0 || j < 1 || j > n - 1) return;
        acc.add(pmf * (values_[j] + values_[n - j]));
    };

    const double pmf_c = std::exp(log_pmf(n, c));
    contribute(c, pmf_c);
    double pmf = pmf_c;
    for (std::int64_t j = c; j < hi; ++j) {
        pmf *= ratio_up * double(n - j) / double(j + 1);
        contribute(j + 1, pmf);
    }
    pmf = pmf_c;
    for (std::int64_t j = c; j > lo; --j) {
        pmf *= double(j) / (ratio_up * double(n - j + 1));
        contribute(j - 1, pmf);
    }

    const double post_split = (p0 + 2.0 * pn + acc.value()) / denom;
    return 1.0 + post_split;
}

double expected_cri_recursive(std::int64_t n, const ChannelConfig& config) {
    CriTable table(config.with_variant(TreeVariant::Bta));
    return table.length(n);
}

double expected_cri_mta(std::int64_t n, const ChannelConfig& config) {
    CriTable table(config.with_variant(TreeVariant::Mta));
    return table.length(n);
}

double conditional_throughput(std::int64_t n, const ChannelConfig& config) {
    CriTable table(config);
    return table.throughput(n);
}

namespace {

// Core of the non-recursive evaluation, shared by the double and the
// arbitrary-precision paths. Returns L_n and reports the largest term
// magnitude so callers can judge how many digits the cancellation ate.
template <typename Real>
Real closed_form_eval(std::int64_t n, int K, double p, Real& max_abs_term) {
    using std::pow;
    const Real one(1);
    const Real rp(p);
    const Real rq = one - rp;

    // C(n, K)
    Real binom_nK = one;
    for (std::int64_t t = 0; t < K; ++t)
        binom_nK = binom_nK * Real(double(n - t)) / Real(double(t + 1));

    Real pk = pow(rp, K + 1);
    Real qk = pow(rq, K + 1);
    Real binom_j = one; // C(n-K, j), updated incrementally
    NeumaierSum<Real> sum;
    max_abs_term = Real(0);

    const std::int64_t jmax = n - K;
    for (std::int64_t j = 1; j <= jmax; ++j) {
        binom_j = binom_j * Real(double(jmax - j + 1)) / Real(double(j));
        const Real denom = one - pk - qk;
        Real term = binom_nK * binom_j * Real(2.0 * double(j)) /
                    (Real(double(j + K)) * denom);
        if (j % 2 != 0) term = -term;
        sum.add(term);
        const Real mag = NeumaierSum<Real>::abs_val(term);
        if (mag > max_abs_term) max_abs_term = mag;
        pk = pk * rp;
        qk = qk * rq;
    }
    return one - sum.value();
}

// Natural log of the largest closed-form term, estimated a priori: the
// product C(n,K) C(n-K,j) peaks near j = (n-K)/2.
double closed_form_peak_log(std::int64_t n, int K) {
    const double half = double(n - K) / 2.0;
    return std::lgamma(double(n + 1)) - std::lgamma(double(K + 1)) -
           2.0 * std::lgamma(half + 1.0) + std::log(2.0 * double(n) + 2.0);
}

void require_bta(const ChannelConfig& config, const char* what) {
    if (config.variant() != TreeVariant::Bta)
        throw ValidationError(std::string(what) + " is defined for the BTA variant only");
}

} // namespace

double expected_cri_closed_form_double(std::int64_t n, const ChannelConfig& config) {
    require_bta(config, "expected_cri_closed_form");
    check_batch_size(n);
    if (n <= config.K()) return 1.0;

    double max_term = 0.0;
    const double value = closed_form_eval<double>(n, config.K(), config.p(), max_term);
    const double surviving =
        15.95 - std::log10(std::max(max_term, 1.0) / std::max(std::abs(value), 1e-300));
    if (!(surviving >= 6.0) || !std::isfinite(value))
        throw NumericalError(
            "expected_cri_closed_form: alternating sum cancellation left fewer than 6 "
            "significant digits at n = " + std::to_string(n));
    return value;
}

double expected_cri_closed_form(std::int64_t n, const ChannelConfig& config) {
    require_bta(config, "expected_cri_closed_form");
    check_batch_size(n);
    if (n <= config.K()) return 1.0;

    const double predicted_loss = closed_form_peak_log(n, config.K()) / std::log(10.0);
    if (predicted_loss <= 7.0) return expected_cri_closed_form_double(n, config);

    const unsigned digits = static_cast<unsigned>(predicted_loss) + 30;
    if (digits > 100000)
        throw NumericalError("expected_cri_closed_form: n too large for verification path");
    PrecisionGuard guard(digits);
    BigFloat max_term = 0;
    const BigFloat value = closed_form_eval<BigFloat>(n, config.K(), config.p(), max_term);
    const double surviving =
        double(digits) -
        static_cast<double>(log10(max_term / abs(value)));
    if (!(surviving >= 6.0))
        throw NumericalError(
            "expected_cri_closed_form: precision loss exceeded the working precision at n = " +
            std::to_string(n));
    return static_cast<double>(value);
}

SeriesCoefficients series_coefficients(std::int64_t n_max, const ChannelConfig& config) {
    require_bta(config, "series_coefficients");
    if (n_max < 0) throw ValidationError("n_max cannot be negative");
    const int K = config.K();
    const double lp = std::log(config.p());
    const double lq = std::log1p(-config.p());

    SeriesCoefficients out;
    out.a.resize(n_max + 1, 0.0);
    out.a[0] = 1.0;
    for (std::int64_t j = K + 1; j <= n_max; ++j) {
        NeumaierSum<double> inner;
        for (int k = 0; k <= K; ++k) {
            const double mag =
                std::exp(-std::lgamma(double(k + 1)) - std::lgamma(double(j - k + 1)));
            inner.add(((j - k + 1) % 2 == 0) ? mag : -mag);
        }
        const double denom = 1.0 - std::exp(double(j) * lp) - std::exp(double(j) * lq);
        out.a[j] = 2.0 * inner.value() / denom;
    }
    return out;
}

double expected_cri_from_series(std::int64_t n, const ChannelConfig& config) {
    require_bta(config, "expected_cri_from_series");
    check_batch_size(n);
    const int K = config.K();
    if (n <= K) return 1.0;

    // Peak magnitude of n!/(n-j)! * a_j over j, for the precision choice.
    double peak = 0.0;
    for (std::int64_t j = K + 1; j <= n; ++j) {
        const double lmag = std::lgamma(double(n + 1)) - std::lgamma(double(n - j + 1)) +
                            std::log(2.0 * double(K + 1)) - std::lgamma(double(K + 1)) -
                            std::lgamma(double(j - K + 1));
        peak = std::max(peak, lmag);
    }
    const unsigned digits = static_cast<unsigned>(peak / std::log(10.0)) + 30;
    if (digits > 100000)
        throw NumericalError("expected_cri_from_series: n too large for verification path");

    PrecisionGuard guard(digits);
    const BigFloat one(1);
    const BigFloat rp(config.p());
    const BigFloat rq = one - rp;

    std::vector<BigFloat> inv_fact(n + 1);
    inv_fact[0] = one;
    for (std::int64_t k = 1; k <= n; ++k) inv_fact[k] = inv_fact[k - 1] / BigFloat(double(k));

    BigFloat pj = pow(rp, K + 1);
    BigFloat qj = pow(rq, K + 1);
    BigFloat falling = one; // n!/(n-j)!
    for (std::int64_t t = 0; t <= K; ++t) falling = falling * BigFloat(double(n - t));

    NeumaierSum<BigFloat> total;
    total.add(one); // j = 0 term; a_1..a_K vanish
    for (std::int64_t j = K + 1; j <= n; ++j) {
        NeumaierSum<BigFloat> inner;
        for (int k = 0; k <= K; ++k) {
            BigFloat mag = inv_fact[k] * inv_fact[j - k];
            inner.add(((j - k + 1) % 2 == 0) ? mag : -mag);
        }
        const BigFloat a_j = BigFloat(2) * inner.value() / (one - pj - qj);
        total.add(falling * a_j);
        pj = pj * rp;
        qj = qj * rq;
        if (j < n) falling = falling * BigFloat(double(n - j));
    }
    return static_cast<double>(total.value());
}

} // namespace mprtree
