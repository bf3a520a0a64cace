#include "mprtree/asymptotics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>

#include "mprtree/gamma.hpp"

namespace mprtree {
namespace {

using std::numbers::ln2;
using std::numbers::pi;

// 1 - e^{-t} sum_{k=0}^{K} t^k/k!, evaluated without cancellation for small t
// through the complementary series e^{-t} sum_{k>K} t^k/k!.
double poisson_tail(int K, double t) {
    if (t <= 0.0) return 0.0;
    double term = std::exp(-t);
    double head = term;
    for (int k = 1; k <= K; ++k) {
        term *= t / double(k);
        head += term;
    }
    if (head < 0.5) return 1.0 - head;
    double sum = 0.0;
    double tk = term; // k = K term, e^{-t} t^K/K!
    for (int k = K + 1; k < K + 4096; ++k) {
        tk *= t / double(k);
        sum += tk;
        if (double(k) > t && tk < sum * 1e-18) break;
    }
    return sum;
}

double l_series_term(LSeriesVariant v, int K, double scale_2m, double t) {
    switch (v) {
    case LSeriesVariant::GammaTail:
        return scale_2m * poisson_tail(K, t);
    case LSeriesVariant::BracketFullSum: {
        double term = 1.0, sum = 1.0;
        for (int k = 1; k <= K; ++k) {
            term *= t / double(k);
            sum += term;
        }
        return scale_2m * std::exp(-t) * (1.0 - sum);
    }
    case LSeriesVariant::BracketPartial: {
        double term = 1.0, sum = 0.0;
        for (int k = 1; k <= K; ++k) {
            term *= t / double(k);
            sum += term;
        }
        return scale_2m * std::exp(-t) * sum;
    }
    }
    return 0.0;
}

double eval_l_series(LSeriesVariant v, int sign, int K, int m_terms, double x) {
    double sum = 0.0;
    double scale = 1.0; // 2^m
    double t = x;       // x 2^{-m}
    for (int m = 0; m < m_terms; ++m) {
        sum += l_series_term(v, K, scale, t);
        scale *= 2.0;
        t *= 0.5;
    }
    return 1.0 + double(sign) * 2.0 * sum;
}

} // namespace

const char* to_string(LSeriesVariant v) {
    switch (v) {
    case LSeriesVariant::GammaTail: return "gamma-tail";
    case LSeriesVariant::BracketFullSum: return "bracket-full";
    case LSeriesVariant::BracketPartial: return "bracket-partial";
    }
    return "?";
}

const char* to_string(SpectrumVariant v) {
    switch (v) {
    case SpectrumVariant::MellinResidue: return "mellin-residue";
    case SpectrumVariant::DraftSkPolynomial: return "draft-sk-poly";
    case SpectrumVariant::DraftPrintedPolynomial: return "draft-printed-poly";
    }
    return "?";
}

SeriesEval solve_functional_equation(const FunctionalEquationSpec& spec, double x, int terms,
                                     double tail_tolerance) {
    if (!(std::abs(spec.gamma) < 1.0) || !(std::abs(spec.p_scale) < 1.0))
        throw ValidationError("functional equation requires |gamma| < 1 and |p| < 1");
    if (terms < 1) throw ValidationError("functional equation requires terms >= 1");
    if (!spec.g) throw ValidationError("functional equation requires a g callback");

    double sum = 0.0;
    double weight = 1.0;
    double arg = x; // sigma_{m+1}(x) = lambda + p * sigma_m(x)
    double sup_g = 0.0;
    for (int m = 0; m < terms; ++m) {
        const double gv = spec.g(arg);
        sup_g = std::max(sup_g, std::abs(gv));
        sum += weight * gv;
        weight *= spec.gamma;
        arg = spec.lambda_shift + spec.p_scale * arg;
    }
    SeriesEval out;
    out.value = sum;
    out.tail_bound = std::pow(std::abs(spec.gamma), terms) * sup_g;
    if (out.tail_bound > tail_tolerance)
        throw NumericalError("solve_functional_equation: geometric tail bound above tolerance");
    return out;
}

AsymptoticLSeries AsymptoticLSeries::resolve(int K, CriTable& table, int m_terms) {
    if (K < 1) throw ValidationError("asymptotic series requires K >= 1");
    if (!(table.config().K() == K) || !table.config().is_fair() ||
        table.config().variant() != TreeVariant::Bta)
        throw ValidationError("asymptotic series needs a fair BTA table for the same K");

    // Log-spaced probes across the fitted range x in [1, 100].
    const double xs[] = {1.0, 2.1544, 4.6416, 10.0, 21.544, 46.416, 100.0};
    double mix[std::size(xs)];
    StabilityOptions opts;
    for (std::size_t i = 0; i < std::size(xs); ++i)
        mix[i] = poisson_mixture_L(xs[i], table, opts).value;

    AsymptoticLSeries best;
    best.K_ = K;
    best.m_terms_ = m_terms;
    double best_err = std::numeric_limits<double>::infinity();
    for (LSeriesVariant v : {LSeriesVariant::GammaTail, LSeriesVariant::BracketFullSum,
                             LSeriesVariant::BracketPartial}) {
        for (int sign : {+1, -1}) {
            double err = 0.0;
            for (std::size_t i = 0; i < std::size(xs); ++i) {
                const double got = eval_l_series(v, sign, K, m_terms, xs[i]);
                err = std::max(err, std::abs(got - mix[i]) / std::abs(mix[i]));
            }
            if (err < best_err) {
                best_err = err;
                best.variant_ = v;
                best.sign_ = sign;
            }
        }
    }
    best.resolution_rel_err_ = best_err;
    if (!(best_err < 0.01))
        throw NumericalError(
            "asymptotic_L: no sign/shape of the series reproduces the exact mixture within 1%");
    return best;
}

double AsymptoticLSeries::evaluate(double x) const {
    if (x < 0.0) throw ValidationError("asymptotic series requires x >= 0");
    return eval_l_series(variant_, sign_, K_, m_terms_, x);
}

AsymptoticL AsymptoticLSeries::evaluate_reported(double x) const {
    return AsymptoticL{evaluate(x), variant_, sign_, resolution_rel_err_};
}

AsymptoticL asymptotic_L(double x, int K, int m_terms) {
    CriTable table(ChannelConfig::fair(K));
    const auto series = AsymptoticLSeries::resolve(K, table, m_terms);
    return series.evaluate_reported(x);
}

std::complex<double> OscillationSpectrum::coefficient(int k) const {
    for (const auto& [kk, c] : coefficients)
        if (kk == k) return c;
    throw ValidationError("spectrum holds no coefficient for k = " + std::to_string(k));
}

OscillationSpectrum oscillation_spectrum(int K, int k_max, SpectrumVariant variant) {
    if (K < 1 || k_max < 1) throw ValidationError("oscillation_spectrum requires K, k_max >= 1");

    OscillationSpectrum out;
    out.K = K;
    out.fundamental_period = 1.0;
    for (int k = 1; k <= k_max; ++k) {
        const double omega = 2.0 * pi * double(k) / ln2;
        const std::complex<double> s_k(-1.0, omega);

        std::complex<double> inner;
        switch (variant) {
        case SpectrumVariant::MellinResidue: {
            inner = 1.0; // C(s_k + K, K)
            for (int i = 1; i <= K; ++i) inner *= (s_k + double(i)) / double(i);
            break;
        }
        case SpectrumVariant::DraftSkPolynomial: {
            std::complex<double> term = 1.0;
            inner = 1.0;
            for (int j = 1; j <= K; ++j) {
                term *= s_k / double(j);
                inner += term;
            }
            break;
        }
        case SpectrumVariant::DraftPrintedPolynomial: {
            const std::complex<double> w(-1.0, 2.0 * pi * double(k));
            std::complex<double> term = 1.0;
            inner = 1.0;
            for (int j = 1; j <= K; ++j) {
                term *= w / double(j);
                inner += term;
            }
            break;
        }
        }

        const std::complex<double> c_k = -(2.0 / ln2) * complex_gamma(s_k) * inner;
        out.coefficients.emplace_back(k, c_k);
        out.coefficients.emplace_back(-k, std::conj(c_k));
    }
    return out;
}

EmpiricalOscillation extract_empirical_oscillation(int K, std::int64_t n_lo, std::int64_t n_hi,
                                                   CriTable* table, int k_max) {
    if (K < 1 || k_max < 1) throw ValidationError("extraction requires K, k_max >= 1");
    if (n_lo < 1 || n_hi <= n_lo) throw ValidationError("empty n range");
    if (n_hi > 100000)
        throw ValidationError("n range beyond exact-analysis capability (n <= 1e5)");
    const double span = std::log2(double(n_hi) / double(n_lo));
    if (span < 4.0)
        throw NumericalError("extract_empirical_oscillation: range spans fewer than 4 periods");

    CriTable local(ChannelConfig::fair(K));
    CriTable* tbl = table ? table : &local;
    if (table && (table->config().K() != K || !table->config().is_fair() ||
                  table->config().variant() != TreeVariant::Bta))
        throw ValidationError("extraction needs a fair BTA table for the same K");
    tbl->ensure(n_hi);

    const std::size_t count = static_cast<std::size_t>(n_hi - n_lo + 1);
    std::vector<double> u(count), du(count), y(count);
    double weight = 0.0, mean_y = 0.0, mean_t = 0.0;
    for (std::size_t idx = 0; idx < count; ++idx) {
        const std::int64_t n = n_lo + std::int64_t(idx);
        u[idx] = std::log2(double(n));
        du[idx] = std::log2((double(n) + 0.5) / (double(n) - 0.5));
        y[idx] = (tbl->length(n) + 1.0) / double(n);
        weight += du[idx];
        mean_y += du[idx] * y[idx];
        mean_t += du[idx] * tbl->throughput(n);
    }
    mean_y /= weight;
    mean_t /= weight;

    auto project = [&](double f) {
        std::complex<double> acc{0.0, 0.0};
        for (std::size_t idx = 0; idx < count; ++idx) {
            const double phase = 2.0 * pi * f * u[idx];
            acc += (y[idx] - mean_y) * du[idx] *
                   std::complex<double>(std::cos(phase), std::sin(phase));
        }
        return acc / weight;
    };

    // Locate the fundamental: coarse scan, then a finer pass around the peak.
    double best_f = 1.0, best_a = -1.0;
    for (double f = 0.3; f <= 2.5; f += 0.02) {
        const double a = std::abs(project(f));
        if (a > best_a) {
            best_a = a;
            best_f = f;
        }
    }
    double refined_f = best_f, refined_a = best_a;
    for (double f = best_f - 0.02; f <= best_f + 0.02; f += 0.001) {
        const double a = std::abs(project(f));
        if (a > refined_a) {
            refined_a = a;
            refined_f = f;
        }
    }

    EmpiricalOscillation out;
    out.spectrum.K = K;
    out.spectrum.fundamental_period = 1.0 / refined_f;
    for (int k = 1; k <= k_max; ++k) {
        const auto c = project(double(k));
        out.spectrum.coefficients.emplace_back(k, c);
        out.spectrum.coefficients.emplace_back(-k, std::conj(c));
    }
    out.mean_throughput = mean_t;
    out.mean_signal = mean_y;
    return out;
}

void write_spectrum_csv(std::ostream& out, const OscillationSpectrum& spectrum,
                        const std::string& source, bool header) {
    if (header) out << "K,k,re_c_k,im_c_k,abs_c_k,source\n";
    char buf[256];
    for (const auto& [k, c] : spectrum.coefficients) {
        std::snprintf(buf, sizeof(buf), "%d,%d,%.9g,%.9g,%.9g,%s\n", spectrum.K, k, c.real(),
                      c.imag(), std::abs(c), source.c_str());
        out << buf;
    }
}

} // namespace mprtree
