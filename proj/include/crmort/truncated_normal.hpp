#pragma once

#include <cstdint>
#include <random>

namespace crmort {

using Rng = std::mt19937_64;

// Independent stream for (seed, stream index).
Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0);

// Uniform on the open interval (0,1).
double uniform_open(Rng& rng);

// Normal(mean, sd) conditioned on (lo, hi), by inversion of the truncated CDF.
// Infinite bounds are allowed.
double truncated_normal_sample(double mean, double sd, double lo, double hi, Rng& rng);

// Log density normalized over (lo, hi); -inf outside the support.
double truncated_normal_log_density(double x, double mean, double sd, double lo, double hi);

} // namespace crmort
