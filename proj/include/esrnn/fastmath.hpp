#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>

namespace esrnn::fastmath {

// Rational-polynomial exp and tanh (Cephes coefficients), accurate to a few
// ulp. Branch-free after input clamping, so the compiler can vectorize the
// elementwise loops that dominate the batched forward/backward passes, and
// bit-identical across platforms for a given build.

/// exp(x), clamped to [-708, 709.4]: inputs below the clamp return the
/// smallest normal-range result instead of a subnormal/zero.
inline double exp(double x) {
    constexpr double kLog2E = 1.4426950408889634073599;
    constexpr double kC1 = 6.93145751953125e-1;
    constexpr double kC2 = 1.42860682030941723212e-6;
    constexpr double kP0 = 1.26177193074810590878e-4;
    constexpr double kP1 = 3.02994407707441961300e-2;
    constexpr double kP2 = 9.99999999999999999910e-1;
    constexpr double kQ0 = 3.00198505138664455042e-6;
    constexpr double kQ1 = 2.52448340349684104192e-3;
    constexpr double kQ2 = 2.27265548208155028766e-1;
    constexpr double kQ3 = 2.00000000000000000005e0;

    x = x > 709.4 ? 709.4 : x;
    x = x < -708.0 ? -708.0 : x;
    const double pn = std::floor(kLog2E * x + 0.5);
    const auto n = static_cast<std::int64_t>(pn);
    x -= pn * kC1;
    x -= pn * kC2;
    const double xx = x * x;
    const double px = x * (kP2 + xx * (kP1 + xx * kP0));
    const double qx = kQ3 + xx * (kQ2 + xx * (kQ1 + xx * kQ0));
    const double e = 1.0 + 2.0 * (px / (qx - px));
    const double scale = std::bit_cast<double>(static_cast<std::uint64_t>(n + 1023) << 52);
    return e * scale;
}

/// tanh(x): rational approximation below 0.625, exp-based above, saturating
/// at |x| >= 19.
inline double tanh(double x) {
    constexpr double kP0 = -9.64399179425052238628e-1;
    constexpr double kP1 = -9.92877231001918586564e1;
    constexpr double kP2 = -1.61468768441708447952e3;
    constexpr double kQ0 = 1.12811678491632931402e2;
    constexpr double kQ1 = 2.23548839060100448583e3;
    constexpr double kQ2 = 4.84406305325125486048e3;

    const double ax = std::abs(x);
    double r;
    if (ax < 0.625) {
        const double z = x * x;
        const double p = kP2 + z * (kP1 + z * kP0);
        const double q = kQ2 + z * (kQ1 + z * (kQ0 + z));
        r = x + x * z * (p / q);
    } else if (ax < 19.0) {
        const double s = 1.0 - 2.0 / (exp(2.0 * ax) + 1.0);
        r = x < 0.0 ? -s : s;
    } else {
        r = x < 0.0 ? -1.0 : 1.0;
    }
    return r;
}

/// 1 / (1 + exp(-x)), nudged one representable step inside (0, 1).
inline double logistic(double x) {
    const double y = 1.0 / (1.0 + exp(-x));
    const double lo = std::numeric_limits<double>::min();
    const double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
    return y < lo ? lo : (y > hi ? hi : y);
}

} // namespace esrnn::fastmath
