#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace crmort {

enum class Gender : int { female = 0, male = 1 };

inline constexpr double kDefaultTrendEta = 1.0 / 150.0;

// Grid shape: A age groups x 2 genders, causes 0..K (0 is idiosyncratic).
struct ModelDims {
    int age_groups = 9;
    int causes = 10; // K, not counting cause 0

    std::size_t n_cells() const { return static_cast<std::size_t>(2 * age_groups); }
    std::size_t n_causes_total() const { return static_cast<std::size_t>(causes + 1); }

    bool operator==(const ModelDims&) const = default;
};

struct CellIndex {
    int age_group = 1; // 1..A
    Gender gender = Gender::female;

    bool operator==(const CellIndex&) const = default;
};

// Cells are stored age-major: (a1,f), (a1,m), (a2,f), ...
std::size_t cell_offset(const ModelDims& dims, const CellIndex& cell);
CellIndex cell_at(const ModelDims& dims, std::size_t offset);
void check_cell(const ModelDims& dims, const CellIndex& cell);

// "f1".."m9"
std::string cell_key(const CellIndex& cell);
CellIndex parse_cell_key(const std::string& key);
// Decade band label of an age group, e.g. "0-9", "80+" for the last band.
std::string age_band_label(int age_group, int age_groups);
std::string gender_name(Gender g);

using CauseId = int;

// Short names of the default eleven model causes, indexed by CauseId.
const std::vector<std::string>& default_cause_names();
// Default names when K matches the default setup, "cause_<k>" otherwise.
std::vector<std::string> cause_names_for(int causes);

// Shift and inverse halving time of the arctangent trend.
struct TrendReductionParams {
    double zeta = 0.0;
    double eta = kDefaultTrendEta;

    bool operator==(const TrendReductionParams&) const = default;
};

struct DeathProbParams {
    double alpha = 0.0;
    double beta = 0.0;
    TrendReductionParams trend;

    bool operator==(const DeathProbParams&) const = default;
};

// Softmax weight parameters, u and v stored cell-major with K+1 entries per cell.
struct WeightParams {
    std::vector<double> u;
    std::vector<double> v;
    std::vector<TrendReductionParams> cause_trend; // K+1 entries

    bool operator==(const WeightParams&) const = default;
};

// Variances of the mean-one gamma factors for causes 1..K (entry k-1 belongs to cause k).
struct RiskFactorVariances {
    std::vector<double> sigma2;

    bool operator==(const RiskFactorVariances&) const = default;
};

struct ModelParams {
    ModelDims dims;
    std::vector<DeathProbParams> death_prob; // one per cell
    WeightParams weights;
    RiskFactorVariances variances;

    // All-zero alpha/beta/u/v, sigma2 = 0.1 and the default trend constants.
    static ModelParams zeros(const ModelDims& dims);

    double& u(std::size_t cell, CauseId k) { return weights.u[cell * dims.n_causes_total() + k]; }
    double u(std::size_t cell, CauseId k) const { return weights.u[cell * dims.n_causes_total() + k]; }
    double& v(std::size_t cell, CauseId k) { return weights.v[cell * dims.n_causes_total() + k]; }
    double v(std::size_t cell, CauseId k) const { return weights.v[cell * dims.n_causes_total() + k]; }
    double& sigma2(CauseId k) { return variances.sigma2[k - 1]; }
    double sigma2(CauseId k) const { return variances.sigma2[k - 1]; }

    // Shape, positivity and finiteness checks; throws ConfigError.
    void validate() const;
    // u[cell,0] == v[cell,0] == 0 for every cell.
    bool is_gauge_fixed() const;
    // Subtracts the cause-0 coordinates so the result is gauge fixed; weights are unchanged.
    void fix_gauge();

    bool operator==(const ModelParams&) const = default;
};

// 2A (alpha, beta) + 2 * 2A * (K+1) (u, v) + K (sigma2)
std::size_t raw_parameter_count(const ModelDims& dims);
// raw count minus the 2 * 2A gauge coordinates
std::size_t free_parameter_count(const ModelDims& dims);

// Calendar year <-> model time; base_year maps to t = 1.
struct TimeMapping {
    int base_year = 1987;
    int years = 25; // T

    double t_of(int year) const { return static_cast<double>(year - base_year + 1); }
    int year_of(int t) const { return base_year + t - 1; }
};

double laplace_cdf(double x);
// log of laplace_cdf, accurate in both tails.
double log_laplace_cdf(double x);
// Inverse of laplace_cdf on (0,1).
double laplace_quantile(double p);

double trend_reduction(const TrendReductionParams& params, double t);

double death_probability(const CellIndex& cell, double t, const ModelParams& params);
double death_probability(std::size_t cell, double t, const ModelParams& params);

// Softmax over causes 0..K (max-subtracted).
std::vector<double> cause_weights(const CellIndex& cell, double t, const ModelParams& params);
void cause_weights(std::size_t cell, double t, const ModelParams& params, std::span<double> out);

double expected_deaths(const CellIndex& cell, CauseId cause, double t, const ModelParams& params,
                       double population);

void to_json(nlohmann::json& j, const ModelParams& p);
void from_json(const nlohmann::json& j, ModelParams& p);

ModelParams load_params(const std::string& path);
void save_params(const ModelParams& params, const std::string& path);

} // namespace crmort
