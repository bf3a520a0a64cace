#pragma once

#include <complex>

namespace mprtree {

// Complex gamma function, Lanczos approximation (Godfrey g = 607/128, 15
// coefficients) with reflection for Re z < 1/2. Relative error below 1e-13
// away from the poles;
// returns 0 where the reflection sine would overflow (|Im z| ~ 220+), which
// is where Gamma itself underflows.
std::complex<double> complex_gamma(std::complex<double> z);

} // namespace mprtree
