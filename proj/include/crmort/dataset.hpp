#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crmort/model.hpp"

namespace crmort {

// Population m_{a,g}(t) and death counts n_{a,g,k}(t) on the full (cell, cause, year) grid.
class MortalityDataset {
public:
    MortalityDataset() = default;
    MortalityDataset(ModelDims dims, int first_year, int years);

    const ModelDims& dims() const { return dims_; }
    int first_year() const { return first_year_; }
    int years() const { return years_; }
    int last_year() const { return first_year_ + years_ - 1; }
    TimeMapping time_mapping() const { return TimeMapping{first_year_, years_}; }

    const std::vector<std::string>& cause_names() const { return cause_names_; }
    void set_cause_names(std::vector<std::string> names);

    // t is the 1-based model year.
    std::int64_t population(std::size_t cell, int t) const { return population_[pop_index(cell, t)]; }
    std::int64_t& population(std::size_t cell, int t) { return population_[pop_index(cell, t)]; }
    std::int64_t deaths(std::size_t cell, CauseId k, int t) const { return deaths_[death_index(cell, k, t)]; }
    std::int64_t& deaths(std::size_t cell, CauseId k, int t) { return deaths_[death_index(cell, k, t)]; }

    std::int64_t total_deaths(std::size_t cell, int t) const;
    // n_k(t): deaths from cause k summed over all cells.
    std::int64_t cause_total(CauseId k, int t) const;

    // Non-negative counts, deaths <= population per cell-year, T >= 2. Throws DataError.
    void validate() const;

    bool operator==(const MortalityDataset&) const = default;

private:
    std::size_t pop_index(std::size_t cell, int t) const {
        return cell * static_cast<std::size_t>(years_) + static_cast<std::size_t>(t - 1);
    }
    std::size_t death_index(std::size_t cell, CauseId k, int t) const {
        return (cell * dims_.n_causes_total() + static_cast<std::size_t>(k)) * static_cast<std::size_t>(years_) +
               static_cast<std::size_t>(t - 1);
    }

    ModelDims dims_;
    int first_year_ = 0;
    int years_ = 0;
    std::vector<std::string> cause_names_;
    std::vector<std::int64_t> population_;
    std::vector<std::int64_t> deaths_;
};

// Year totals used by the gamma-mixture terms.
struct CauseAggregates {
    std::vector<std::int64_t> deaths; // n_k(t), index k * T + (t-1)
    std::vector<double> intensity;    // rho_k(t), same layout
    int years = 0;

    std::int64_t n(CauseId k, int t) const { return deaths[static_cast<std::size_t>(k * years + t - 1)]; }
    double rho(CauseId k, int t) const { return intensity[static_cast<std::size_t>(k * years + t - 1)]; }
};

CauseAggregates cause_aggregates(const MortalityDataset& data, const ModelParams& params);

// Normalized CSV: year,age_group,gender,population,<one deaths column per model cause>.
void write_dataset_csv(const MortalityDataset& data, const std::string& path);
std::string dataset_csv_string(const MortalityDataset& data);
MortalityDataset read_dataset_csv(const std::string& path);

} // namespace crmort
