#pragma once

#include <cstdint>
#include <limits>

#include "crmort/dataset.hpp"
#include "crmort/model.hpp"

namespace crmort {

inline constexpr double kDegenerateLogLikelihood = -std::numeric_limits<double>::infinity();

double poisson_log_pmf(std::int64_t n, double rho);

// lnG(r+n) - lnG(r) - r*ln(1 + sigma2*rho) - n*ln(r+rho) with r = 1/sigma2: the part of the
// gamma-mixed Poisson log pmf that couples the year total to sigma2.
double gamma_mixture_term(std::int64_t n, double rho, double sigma2);
// gamma_mixture_term == mixture_shape_part(n, s2) + mixture_rate_part(n, rho, s2); the split lets
// callers cache the sigma2-only part.
double mixture_shape_part(std::int64_t n, double sigma2);
double mixture_rate_part(std::int64_t n, double rho, double sigma2);

// Negative binomial with mean rho and variance rho + sigma2*rho^2.
double mixed_poisson_log_pmf(std::int64_t n, double rho, double sigma2);

// Natural log of the unconditional likelihood; -inf when some rho is 0 with a positive count.
double log_likelihood(const MortalityDataset& data, const ModelParams& params);
// Contribution of model year t (1-based). log_likelihood sums these for t = 1..T in order.
double log_likelihood_year(const MortalityDataset& data, const ModelParams& params, int t);

struct RiskFactorEstimate {
    double mode = 0.0;
    double mean = 1.0;
};

// Gamma(1/s2 + n, 1/s2 + rho) posterior of one year's risk factor.
RiskFactorEstimate map_risk_factor(std::int64_t n_k, double rho_k, double sigma2_k);

inline constexpr double kMomentSigma2Floor = 1e-4;

// Starting point for the sampler. Trend constants are copied from `constants`.
ModelParams init_params_moment_matching(const MortalityDataset& data, const ModelParams& constants);
ModelParams init_params_moment_matching(const MortalityDataset& data);

} // namespace crmort
