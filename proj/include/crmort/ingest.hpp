#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "crmort/dataset.hpp"

namespace crmort {

struct CauseMappingEntry {
    std::string label; // normalized
    CauseId cause = 0;
    double comparability_factor = 1.0;
};

// Raw cause label -> model cause and comparability factor. Unmapped labels go to cause 0, factor 1.
class CauseMapping {
public:
    CauseMapping() = default;
    CauseMapping(std::vector<std::string> cause_names, std::vector<CauseMappingEntry> entries);

    // Ten named causes plus "not_elsewhere", with the ICD-9 -> ICD-10 comparability factors.
    static CauseMapping default_mapping();

    int causes() const { return static_cast<int>(cause_names_.size()) - 1; }
    const std::vector<std::string>& cause_names() const { return cause_names_; }
    const std::vector<CauseMappingEntry>& entries() const { return entries_; }

    bool contains(const std::string& label) const;
    const CauseMappingEntry& lookup(const std::string& label) const;

private:
    std::vector<std::string> cause_names_;
    std::vector<CauseMappingEntry> entries_;
    std::map<std::string, std::size_t> index_;
    CauseMappingEntry unmapped_;
};

// Lower case, trimmed, inner whitespace collapsed.
std::string normalize_label(const std::string& label);

void to_json(nlohmann::json& j, const CauseMapping& m);
void from_json(const nlohmann::json& j, CauseMapping& m);
CauseMapping load_cause_mapping(const std::string& path);

struct IngestConfig {
    std::optional<int> base_year; // must equal the first data year when set
    std::optional<int> comparability_cutoff_year = 1996;
    int age_groups = 9;
    CauseMapping mapping = CauseMapping::default_mapping();
};

// round(count * factor) half up for year <= cutoff, count otherwise. The factor is taken to six
// decimals so the product is exact.
std::int64_t apply_comparability(std::int64_t count, double factor, int year, std::optional<int> cutoff);
std::int64_t apply_comparability(std::int64_t count, double factor, int year, const IngestConfig& config);

struct CellYearCoverage {
    std::string cell;
    int year = 0;
    bool population = false;
    std::size_t death_rows = 0;
};

struct CoverageReport {
    int first_year = 0;
    int last_year = 0;
    std::size_t population_rows = 0;
    std::size_t death_rows = 0;
    std::size_t adjusted_rows = 0; // rows multiplied by a comparability factor != 1
    std::map<std::string, std::int64_t> unmapped_labels; // raw deaths routed to cause 0
    std::vector<CellYearCoverage> cell_years;
};

void to_json(nlohmann::json& j, const CoverageReport& r);

struct IngestResult {
    MortalityDataset data;
    CoverageReport coverage;
};

// Raw deaths CSV: year, age_group, gender, cause_label, count.
// Raw population CSV: year, age_group, gender, count.
// age_group is 1..A or a band label ("0-9", "80+"); gender f/m/female/male.
IngestResult load_dataset(const std::string& deaths_csv, const std::string& population_csv, const IngestConfig& config);

// Rows "year,death_rate"; years with zero population get "NA".
void emit_rate_series(const MortalityDataset& data, const CellIndex& cell, CauseId cause, std::ostream& out);

} // namespace crmort
