#include "mprtree/gamma.hpp"

#include <cmath>
#include <numbers>

namespace mprtree {

namespace {
// Godfrey's coefficients for g = 607/128, n = 15.
constexpr double kLanczosG = 607.0 / 128.0;
constexpr double kCoef[15] = {
    0.99999999999999709182,
    57.156235665862923517,
    -59.597960355475491248,
    14.136097974741747174,
    -0.49191381609762019978,
    0.33994649984811888699e-4,
    0.46523628927048575665e-4,
    -0.98374475304879564677e-4,
    0.15808870322491248884e-3,
    -0.21026444172410488319e-3,
    0.21743961811521264320e-3,
    -0.16431810653676389022e-3,
    0.84418223983852743293e-4,
    -0.26190838401581408670e-4,
    0.36899182659531622704e-5,
};
} // namespace

std::complex<double> complex_gamma(std::complex<double> z) {
    using std::numbers::pi;
    if (z.real() < 0.5) {
        if (std::abs(z.imag()) * pi > 700.0) return {0.0, 0.0}; // sin overflows, Gamma underflows
        return pi / (std::sin(pi * z) * complex_gamma(1.0 - z));
    }
    z -= 1.0;
    std::complex<double> x = kCoef[0];
    for (int i = 1; i < 15; ++i) x += kCoef[i] / (z + double(i));
    const std::complex<double> t = z + kLanczosG + 0.5;
    return std::sqrt(2.0 * pi) * std::pow(t, z + 0.5) * std::exp(-t) * x;
}

} // namespace mprtree
