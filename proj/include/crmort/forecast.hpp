#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "crmort/mcmc.hpp"
#include "crmort/model.hpp"

namespace crmort {

struct WeightSummary {
    CauseId cause = 0;
    std::string name;
    double mean = 0.0;
    double q05 = 0.0;
    double q95 = 0.0;
};

struct ForecastBlock {
    CellIndex cell;
    int year = 0;
    std::vector<WeightSummary> ranked; // rank 1 first
};

struct ForecastTable {
    std::vector<ForecastBlock> blocks;
};

// sorted[ceil(p N) - 1]
double nearest_rank_quantile(const std::vector<double>& sorted, double p);

// Per cause, in CauseId order.
std::vector<WeightSummary> weight_posterior(const PosteriorSamples& samples, const CellIndex& cell, int year,
                                            const TimeMapping& mapping);
// Descending mean, ties by CauseId.
std::vector<WeightSummary> top_causes(const PosteriorSamples& samples, const CellIndex& cell, int year,
                                      const TimeMapping& mapping, int n = 3);

struct RateSummary {
    double mean = 0.0;
    double q05 = 0.0;
    double q95 = 0.0;
};

RateSummary death_rate_forecast(const PosteriorSamples& samples, const CellIndex& cell, int year,
                                const TimeMapping& mapping);

// Blocks ordered cell-major, then year as given. top_n = 0 keeps all causes.
ForecastTable forecast_table(const PosteriorSamples& samples, const std::vector<CellIndex>& cells,
                             const std::vector<int>& years, const TimeMapping& mapping, int top_n = 3);

std::string render_csv(const ForecastTable& table);
std::string render_text(const ForecastTable& table, int age_groups);
ForecastTable parse_forecast_csv(const std::string& text, const std::vector<std::string>& cause_names);
nlohmann::json forecast_json(const ForecastTable& table);

} // namespace crmort
