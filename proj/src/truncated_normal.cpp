#include "crmort/truncated_normal.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/special_functions/erf.hpp>

#include "crmort/error.hpp"

namespace crmort {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const double kSqrt2 = std::numbers::sqrt2;
const double kLogSqrt2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

// Upper-tail probability Q(x) = 1 - Phi(x).
double upper_tail(double x) {
    if (x == kInf) return 0.0;
    if (x == -kInf) return 1.0;
    return 0.5 * std::erfc(x / kSqrt2);
}

double log_upper_tail(double x) {
    if (x == kInf) return -kInf;
    if (x < 30.0) return std::log(upper_tail(x));
    const double x2 = x * x;
    return -0.5 * x2 - std::log(x) - kLogSqrt2Pi + std::log1p(-1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2));
}

// ln(Q(a) - Q(b)) for 0 <= a < b.
double log_upper_mass(double a, double b) {
    const double la = log_upper_tail(a);
    const double lb = log_upper_tail(b);
    if (lb == -kInf) return la;
    return la + std::log1p(-std::exp(lb - la));
}

// ln(Phi(b) - Phi(a)) for any a < b.
double log_mass(double a, double b) {
    if (a >= 0.0) return log_upper_mass(a, b);
    if (b <= 0.0) return log_upper_mass(-b, -a);
    return std::log1p(-upper_tail(b) - upper_tail(-a));
}

// Robert (1995) exponential rejection for far tails where Q(a) underflows.
double far_tail_sample(double a, double b, Rng& rng) {
    const double rate = 0.5 * (a + std::sqrt(a * a + 4.0));
    for (;;) {
        const double z = a - std::log(uniform_open(rng)) / rate;
        if (z >= b) continue;
        if (uniform_open(rng) <= std::exp(-0.5 * (z - rate) * (z - rate))) return z;
    }
}

// Standard normal restricted to (a, b) with a >= 0.
double upper_sample(double a, double b, Rng& rng) {
    const double qa = upper_tail(a);
    const double qb = upper_tail(b);
    if (qa < 1e-300) return far_tail_sample(a, b, rng);
    const double p = qb + uniform_open(rng) * (qa - qb);
    return kSqrt2 * boost::math::erfc_inv(2.0 * p);
}

} // namespace

Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return Rng(seq);
}

double uniform_open(Rng& rng) {
    // 53 random bits mapped to the midpoints of a 2^-53 grid.
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

double truncated_normal_sample(double mean, double sd, double lo, double hi, Rng& rng) {
    if (!(lo < hi)) throw ConfigError("truncated normal requires lo < hi");
    if (!(sd > 0.0)) throw ConfigError("truncated normal requires sd > 0");
    const double a = (lo - mean) / sd;
    const double b = (hi - mean) / sd;
    double z;
    if (a >= 0.0) {
        z = upper_sample(a, b, rng);
    } else if (b <= 0.0) {
        z = -upper_sample(-b, -a, rng);
    } else {
        const double pa = upper_tail(-a); // Phi(a)
        const double pb = 1.0 - upper_tail(b);
        const double p = pa + uniform_open(rng) * (pb - pa);
        z = -kSqrt2 * boost::math::erfc_inv(2.0 * p);
    }
    double x = mean + sd * z;
    if (x <= lo) x = std::nextafter(lo, kInf);
    if (x >= hi) x = std::nextafter(hi, -kInf);
    return x;
}

double truncated_normal_log_density(double x, double mean, double sd, double lo, double hi) {
    if (!(lo < hi) || !(sd > 0.0)) throw ConfigError("truncated normal requires lo < hi and sd > 0");
    if (!(x > lo && x < hi)) return -kInf;
    const double z = (x - mean) / sd;
    return -0.5 * z * z - kLogSqrt2Pi - std::log(sd) - log_mass((lo - mean) / sd, (hi - mean) / sd);
}

} // namespace crmort
