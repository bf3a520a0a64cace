#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <utility>
#include <vector>

#include "mprtree/stability.hpp"

namespace mprtree {

// Functional equation f(x) - gamma f(lambda + p x) = g(x), solved by the
// geometric series f(x) = sum_m gamma^m g(lambda (1-p^m)/(1-p) + p^m x),
// unique when |gamma| < 1 and |p| < 1.
struct FunctionalEquationSpec {
    double gamma = 0.5;
    double lambda_shift = 0.0;
    double p_scale = 0.5;
    std::function<double(double)> g;
};

struct SeriesEval {
    double value = 0.0;
    double tail_bound = 0.0; // |gamma|^terms * observed sup|g|
};

// Throws NumericalError if the geometric tail bound exceeds tail_tolerance.
SeriesEval solve_functional_equation(const FunctionalEquationSpec& spec, double x, int terms,
                                     double tail_tolerance = std::numeric_limits<double>::infinity());

// Candidate shapes of the fair-splitting series for L(x); the published
// derivation prints mutually inconsistent versions, so the shape and overall
// sign are resolved against the exact Poisson mixture.
enum class LSeriesVariant {
    GammaTail,      // terms 2^m (1 - e^{-t} sum_{k<=K} t^k/k!),  t = x 2^{-m}
    BracketFullSum, // terms 2^m e^{-t} (1 - sum_{k<=K} t^k/k!)
    BracketPartial, // terms 2^m e^{-t} sum_{1<=k<=K} t^k/k!
};

const char* to_string(LSeriesVariant v);

struct AsymptoticL {
    double value = 0.0;
    LSeriesVariant variant = LSeriesVariant::GammaTail;
    int sign = +1;
    double resolution_rel_err = 0.0; // worst observed mismatch vs the mixture
};

// Series for L(x) under fair splitting with the variant/sign fixed once per K
// against the exact mixture; evaluate() is then pure.
class AsymptoticLSeries {
public:
    // `table` must be a fair BTA table with the same K. Throws NumericalError
    // if no candidate agrees with the mixture to 1% over x in [1, 100].
    static AsymptoticLSeries resolve(int K, CriTable& table, int m_terms = 64);

    double evaluate(double x) const;
    AsymptoticL evaluate_reported(double x) const;

    LSeriesVariant variant() const { return variant_; }
    int sign() const { return sign_; }
    double resolution_rel_err() const { return resolution_rel_err_; }

private:
    int K_ = 1;
    int m_terms_ = 64;
    LSeriesVariant variant_ = LSeriesVariant::GammaTail;
    int sign_ = +1;
    double resolution_rel_err_ = 0.0;
};

// Convenience one-shot evaluation (builds and resolves a local series).
AsymptoticL asymptotic_L(double x, int K, int m_terms = 64);

// Inner-factor choices for the residue sum at the poles s_k = 2 pi i k/ln2 - 1.
enum class SpectrumVariant {
    MellinResidue,          // binomial polynomial C(s_k + K, K)
    DraftSkPolynomial,      // sum_{j<=K} s_k^j / j!
    DraftPrintedPolynomial, // sum_{j<=K} (2 pi i k - 1)^j / j!
};

const char* to_string(SpectrumVariant v);

// Fourier description of the periodic fluctuation of L_n/n around its mean,
// with period 1 in log2 n. coefficients holds (k, c_k) for k = ±1..±k_max
// with c_{-k} = conj(c_k).
struct OscillationSpectrum {
    int K = 0;
    std::vector<std::pair<int, std::complex<double>>> coefficients;
    double fundamental_period = 1.0; // in log2 n

    std::complex<double> coefficient(int k) const;
};

// Analytic spectrum c_k = -(2/ln2) Gamma(s_k) * inner(K, k).
OscillationSpectrum oscillation_spectrum(int K, int k_max,
                                         SpectrumVariant variant = SpectrumVariant::MellinResidue);

struct EmpiricalOscillation {
    OscillationSpectrum spectrum;
    double mean_throughput = 0.0; // mean T_n over the log2 window
    double mean_signal = 0.0;     // mean (L_n + 1)/n over the log2 window
};

// Projects the exact (L_n + 1)/n signal onto integer frequencies in log2 n
// over [n_lo, n_hi] and locates the fundamental period by a frequency scan.
// Throws NumericalError when the range spans fewer than 4 periods and
// ValidationError when it exceeds the exact-analysis capability (n > 1e5).
// `table` may supply an existing fair BTA table for this K.
EmpiricalOscillation extract_empirical_oscillation(int K, std::int64_t n_lo, std::int64_t n_hi,
                                                   CriTable* table = nullptr, int k_max = 5);

// CSV schema: K,k,re_c_k,im_c_k,abs_c_k,source with source one of
// analytic|empirical.
void write_spectrum_csv(std::ostream& out, const OscillationSpectrum& spectrum,
                        const std::string& source, bool header = true);

} // namespace mprtree
