#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "crmort/model.hpp"

namespace crmort {

struct Policy {
    CellIndex cell;
    std::int64_t exposure = 1; // loss units paid out on death
    std::int64_t count = 1;    // identical policies
};

struct Portfolio {
    std::vector<Policy> policies;
    double loss_unit = 1.0;
    int year = 2011; // calendar year of the valuation period

    void validate(const ModelDims& dims) const;
    std::int64_t max_exposure() const;
};

// Columns: cell (e.g. "m9") and count, plus exposure_units or exposure_amount (rounded up to whole
// loss units).
Portfolio read_portfolio_csv(const std::string& path, double loss_unit, int year);

struct SectorSeverity {
    CauseId cause = 0;
    double lambda = 0.0;
    std::vector<double> severity; // index = exposure units, severity[0] = 0
    bool empty() const { return !(lambda > 0.0); }
};

SectorSeverity sector_severity(const Portfolio& portfolio, const ModelParams& params, CauseId k, double t);

struct PoissonCounting {
    double lambda = 0.0;
};

// P(N = n) = C(n+r-1, n) (1-p)^r p^n
struct NegBinCounting {
    double r = 1.0;
    double p = 0.0;
};

using Counting = std::variant<PoissonCounting, NegBinCounting>;

// Gamma(1/s2, scale s2) mixed Poisson(lambda) as a negative binomial.
NegBinCounting negbin_from_mixture(double lambda, double sigma2);

inline constexpr double kTruncationTolerance = 1e-6;

struct LossPMF {
    std::vector<double> prob; // loss 0..n_max in units
    double truncation_mass = 0.0;
    std::string warning; // non-empty when truncation_mass > tolerance

    std::size_t n_max() const { return prob.empty() ? 0 : prob.size() - 1; }
    double mass() const;
    double mean() const;
    double variance() const;
    bool truncated() const { return !warning.empty(); }
};

LossPMF compound_panjer(const Counting& counting, const std::vector<double>& severity, std::size_t n_max);
LossPMF convolve(const LossPMF& a, const LossPMF& b, std::size_t n_max);

struct LossMoments {
    double mean = 0.0;
    double variance = 0.0;
};

LossMoments analytic_loss_moments(const Portfolio& portfolio, const ModelParams& params, double t);
// mean + 40 sd + largest exposure.
std::size_t default_n_max(const Portfolio& portfolio, const ModelParams& params, double t);

// Idiosyncratic compound Poisson sector convolved with the compound negative binomial sectors in
// `order` (default 1..K). n_max = 0 picks default_n_max.
LossPMF portfolio_loss(const Portfolio& portfolio, const ModelParams& params, double t, std::size_t n_max = 0,
                       const std::vector<CauseId>& order = {});

struct RiskMeasures {
    double alpha = 0.0;
    std::int64_t var = 0;
    double es = 0.0;
};

RiskMeasures risk_measures(const LossPMF& pmf, double alpha);

void write_loss_csv(const LossPMF& pmf, const std::string& path);

} // namespace crmort
