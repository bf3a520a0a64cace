#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "mprtree/asymptotics.hpp"
#include "mprtree/gamma.hpp"
#include "mprtree/rng.hpp"

using namespace mprtree;
using std::numbers::ln2;
using std::numbers::pi;

TEST_CASE("complex gamma against exact identities") {
    CHECK(std::abs(complex_gamma({1.0, 0.0}) - std::complex<double>(1.0, 0.0)) < 1e-14);
    CHECK(std::abs(complex_gamma({5.0, 0.0}).real() - 24.0) < 24.0 * 1e-14);
    CHECK(std::abs(complex_gamma({0.5, 0.0}).real() - std::sqrt(pi)) < 1e-14);

    // |Gamma(-1 + it)| = sqrt(pi t / sinh(pi t)) / (t sqrt(1 + t^2)), the
    // vertical line the oscillation poles live on.
    for (int k = 1; k <= 5; ++k) {
        const double t = 2.0 * pi * double(k) / ln2;
        const double expected =
            std::sqrt(pi * t / std::sinh(pi * t)) / (t * std::sqrt(1.0 + t * t));
        const double got = std::abs(complex_gamma({-1.0, t}));
        CHECK(std::abs(got - expected) / expected < 1e-13);
    }

    // Recurrence and conjugation.
    const std::complex<double> z(-0.7, 2.3);
    CHECK(std::abs(complex_gamma(z + 1.0) - z * complex_gamma(z)) /
              std::abs(complex_gamma(z + 1.0)) <
          1e-12);
    CHECK(std::abs(complex_gamma(std::conj(z)) - std::conj(complex_gamma(z))) < 1e-12);
}

TEST_CASE("functional equation solver: geometric example") {
    FunctionalEquationSpec spec;
    spec.gamma = 0.5;
    spec.lambda_shift = 0.0;
    spec.p_scale = 0.5;
    spec.g = [](double x) { return x; };
    for (double x : {0.0, 0.5, 1.0, 3.0}) {
        const auto r = solve_functional_equation(spec, x, 80);
        CHECK(r.value == doctest::Approx(4.0 / 3.0 * x).epsilon(1e-12));
    }
}

TEST_CASE("functional equation solver: defining identity") {
    SplitMix64 rng(2024);
    FunctionalEquationSpec spec;
    spec.gamma = 0.5;
    spec.lambda_shift = 0.7;
    spec.p_scale = 0.4;
    spec.g = [](double x) { return std::cos(x) + 0.1 * x; };
    for (int trial = 0; trial < 50; ++trial) {
        const double x = 10.0 * rng.uniform01();
        const double fx = solve_functional_equation(spec, x, 80).value;
        const double f_shift =
            solve_functional_equation(spec, spec.lambda_shift + spec.p_scale * x, 80).value;
        CHECK(std::abs(fx - spec.gamma * f_shift - spec.g(x)) < 1e-10);
    }
}

TEST_CASE("functional equation solver: linearity in g") {
    SplitMix64 rng(7);
    FunctionalEquationSpec a, b, combo;
    a.g = [](double x) { return std::sin(x); };
    b.g = [](double x) { return std::exp(-x); };
    const double ca = 1.7, cb = -0.4;
    combo.g = [&](double x) { return ca * std::sin(x) + cb * std::exp(-x); };
    for (int trial = 0; trial < 20; ++trial) {
        const double x = 5.0 * rng.uniform01();
        const double lhs = solve_functional_equation(combo, x, 64).value;
        const double rhs = ca * solve_functional_equation(a, x, 64).value +
                           cb * solve_functional_equation(b, x, 64).value;
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
}

TEST_CASE("functional equation solver: guards") {
    FunctionalEquationSpec bad;
    bad.gamma = 1.0;
    bad.g = [](double x) { return x; };
    CHECK_THROWS_AS(solve_functional_equation(bad, 1.0, 8), ValidationError);

    FunctionalEquationSpec ok;
    ok.g = [](double x) { return x; };
    CHECK_THROWS_AS(solve_functional_equation(ok, 1.0, 4, 1e-10), NumericalError);
}

TEST_CASE("solver matches the second derivative of the exact mixture") {
    const int K = 1;
    CriTable table(ChannelConfig::fair(K));
    FunctionalEquationSpec spec;
    spec.gamma = 0.5;
    spec.lambda_shift = 0.0;
    spec.p_scale = 0.5;
    spec.g = [&](double x) {
        double fact = 1.0;
        for (int i = 2; i <= K - 1; ++i) fact *= double(i);
        const double a = K >= 1 ? std::pow(x, K - 1) / fact : 0.0;
        double factK = fact * (K >= 1 ? double(K) : 1.0);
        return 2.0 * std::exp(-x) * (a - std::pow(x, K) / factK);
    };
    const double x = 1.0;
    const double solved = solve_functional_equation(spec, x, 72).value;
    const double h = 1e-3;
    const double numeric = (poisson_mixture_L(x + h, table).value -
                            2.0 * poisson_mixture_L(x, table).value +
                            poisson_mixture_L(x - h, table).value) /
                           (h * h);
    CHECK(std::abs(solved - numeric) < 1e-4);
}

TEST_CASE("asymptotic L resolves against the exact mixture") {
    for (int K : {1, 2, 4}) {
        CriTable table(ChannelConfig::fair(K));
        const auto series = AsymptoticLSeries::resolve(K, table);
        CHECK(series.variant() == LSeriesVariant::GammaTail);
        CHECK(series.sign() == +1);
        CHECK(series.resolution_rel_err() < 0.01);

        CHECK(series.evaluate(1e-9) == doctest::Approx(1.0).epsilon(1e-9));
        for (double x : {1.0, 7.0, 50.0, 100.0}) {
            const double mix = poisson_mixture_L(x, table).value;
            CHECK(std::abs(series.evaluate(x) - mix) / mix < 0.01);
        }
    }

    // Slope at large x approaches the alpha_50 limit for K=1.
    const auto r = asymptotic_L(1e4, 1);
    CHECK(r.value / 1e4 == doctest::Approx(2.886).epsilon(0.01 / 2.886));
}

TEST_CASE("asymptotic L tail truncation is converged at defaults") {
    for (int K : {1, 4}) {
        CriTable table(ChannelConfig::fair(K));
        const auto base = AsymptoticLSeries::resolve(K, table, 64);
        const auto fine = AsymptoticLSeries::resolve(K, table, 128);
        for (double x : {2.0, 30.0, 100.0})
            CHECK(std::abs(base.evaluate(x) - fine.evaluate(x)) / fine.evaluate(x) < 1e-3);
    }
}

TEST_CASE("analytic spectrum structure") {
    const auto s = oscillation_spectrum(2, 6);
    CHECK(s.fundamental_period == 1.0);

    // Conjugate symmetry.
    for (int k = 1; k <= 6; ++k) {
        const auto c = s.coefficient(k);
        const auto cm = s.coefficient(-k);
        CHECK(cm.real() == doctest::Approx(c.real()));
        CHECK(cm.imag() == doctest::Approx(-c.imag()));
    }

    // |c_k| decays fast in k.
    for (int k = 2; k <= 6; ++k)
        CHECK(std::abs(s.coefficient(k)) < std::abs(s.coefficient(k - 1)));

    // |c_1| grows with K.
    double prev = 0.0;
    for (int K : {1, 2, 4, 8}) {
        const double c1 = std::abs(oscillation_spectrum(K, 1).coefficient(1));
        CHECK(c1 > prev);
        prev = c1;
    }
}

TEST_CASE("empirical oscillation extraction") {
    // Smaller window in unit tests; the acceptance suite runs 2^8..2^16.
    const auto e1 = extract_empirical_oscillation(1, 256, 16384);
    CHECK(e1.spectrum.fundamental_period == doctest::Approx(1.0).epsilon(0.05));
    CHECK(e1.mean_throughput == doctest::Approx(0.346).epsilon(0.003 / 0.346));

    const auto e4 = extract_empirical_oscillation(4, 256, 16384);
    CHECK(std::abs(e4.spectrum.coefficient(1)) > std::abs(e1.spectrum.coefficient(1)));

    CHECK_THROWS_AS(extract_empirical_oscillation(1, 1024, 8192), NumericalError);
    CHECK_THROWS_AS(extract_empirical_oscillation(1, 256, 200000), ValidationError);
}

TEST_CASE("empirical vs analytic amplitude ratios within 25%") {
    const auto base = extract_empirical_oscillation(1, 256, 65536);
    const double emp1 = std::abs(base.spectrum.coefficient(1));
    const double ana1 = std::abs(oscillation_spectrum(1, 1).coefficient(1));
    for (int K : {2, 4}) {
        const auto emp = extract_empirical_oscillation(K, 256, 65536);
        const double emp_ratio = std::abs(emp.spectrum.coefficient(1)) / emp1;
        const double ana_ratio = std::abs(oscillation_spectrum(K, 1).coefficient(1)) / ana1;
        CHECK(std::abs(ana_ratio / emp_ratio - 1.0) < 0.25);

        // Period stays at one doubling of n regardless of K.
        CHECK(emp.spectrum.fundamental_period == doctest::Approx(1.0).epsilon(0.05));
    }
}

TEST_CASE("spectrum csv schema") {
    std::ostringstream out;
    write_spectrum_csv(out, oscillation_spectrum(1, 2), "analytic");
    const std::string text = out.str();
    CHECK(text.find("K,k,re_c_k,im_c_k,abs_c_k,source\n") == 0);
    CHECK(text.find(",analytic") != std::string::npos);
}
