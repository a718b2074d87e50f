#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "crmort/dataset.hpp"
#include "crmort/model.hpp"
#include "crmort/panjer.hpp"
#include "crmort/truncated_normal.hpp"

namespace crmort {

struct SimulationSpec {
    ModelParams params;
    int first_year = 1987;
    int years = 25;
    std::vector<std::int64_t> population; // cell * years + (t-1)
    std::uint64_t seed = 1;

    // Same population in every cell and year.
    static SimulationSpec constant_population(ModelParams params, int first_year, int years, std::int64_t m,
                                              std::uint64_t seed);
    void validate() const;
};

void to_json(nlohmann::json& j, const SimulationSpec& spec);
void from_json(const nlohmann::json& j, SimulationSpec& spec);

struct SimulationStats {
    std::size_t cap_events = 0;      // cell-years whose total exceeded the population
    std::int64_t capped_deaths = 0;  // deaths removed by the cap
    std::size_t cell_years = 0;
    std::vector<std::vector<double>> risk_factors; // [k-1][t-1]
};

void to_json(nlohmann::json& j, const SimulationStats& stats);

struct SimulationResult {
    MortalityDataset data;
    SimulationStats stats;
};

// Lambda_k ~ Gamma(1/sigma2_k, scale sigma2_k), k = 1..K.
std::vector<double> sample_risk_factors(const RiskFactorVariances& variances, Rng& rng);

SimulationResult sample_death_counts(const SimulationSpec& spec, Rng& rng);
// Replication r draws from make_rng(spec.seed, r).
SimulationResult simulate_dataset(const SimulationSpec& spec, std::uint64_t replication = 0);

struct EmpiricalLoss {
    std::vector<std::uint64_t> counts; // histogram over loss units
    std::uint64_t n_sims = 0;

    double pmf(std::size_t n) const;
    // Binomial standard error of pmf(n).
    double standard_error(std::size_t n) const;
    double mean() const;
    LossPMF as_pmf() const;
};

EmpiricalLoss simulate_portfolio_loss(const Portfolio& portfolio, const ModelParams& params, double t, Rng& rng,
                                      std::uint64_t n_sims);

} // namespace crmort
