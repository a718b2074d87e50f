#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "crmort/dataset.hpp"
#include "crmort/mcmc.hpp"
#include "crmort/model.hpp"

namespace crmort {

struct ParamDiagnostics {
    std::string name;
    double acceptance_rate = 0.0; // averaged over chains
    double lag1_autocorrelation = 0.0;
    double ess = 0.0;
    double rhat = 1.0; // split-chain
    bool degenerate = false; // zero variance: ess/rhat not defined and reported as NaN
};

struct SerialCorrelationCheck {
    CauseId cause = 0;
    double lag1 = 0.0;
    double band = 0.0; // 2/sqrt(T)
    bool significant = false;
};

struct CrossCorrelationCheck {
    CauseId cause_a = 0;
    CauseId cause_b = 0;
    double correlation = 0.0;
    double t_statistic = 0.0;
    double p_value = 1.0;
    bool reject = false; // at the 5% level
};

struct GammaFitCheck {
    CauseId cause = 0;
    double sigma2 = 0.0;
    double ks_statistic = 0.0;
    double p_value = 1.0;
};

// Checks on the MAP risk-factor series at a point estimate.
struct ValidationReport {
    int years = 0;
    std::vector<std::vector<double>> map_series; // [k-1][t-1]
    std::vector<SerialCorrelationCheck> serial;
    std::vector<CrossCorrelationCheck> cross;
    std::vector<GammaFitCheck> gamma_fit;
};

struct DiagnosticsReport {
    std::size_t n_chains = 0;
    std::size_t n_draws = 0; // per chain
    std::vector<ParamDiagnostics> params;
    bool has_validation = false;
    ValidationReport validation;
};

double lag1_autocorrelation(std::span<const double> x);
// Initial positive sequence estimator over one or more equally long chains; NaN for constant input.
double effective_sample_size(const std::vector<std::span<const double>>& chains);
// Each chain is split in half; NaN when the within-chain variance is zero.
double split_rhat(const std::vector<std::span<const double>>& chains);

// Kolmogorov limiting distribution tail with the small-sample correction of the statistic.
double ks_p_value(double d, std::size_t n);

ValidationReport validation_checks(const MortalityDataset& data, const ModelParams& params);

// Throws ConfigError for no chains or fewer than 100 draws.
DiagnosticsReport diagnose(const std::vector<PosteriorSamples>& chains);
DiagnosticsReport diagnose(const std::vector<PosteriorSamples>& chains, const MortalityDataset& data);

void to_json(nlohmann::json& j, const DiagnosticsReport& report);

} // namespace crmort
