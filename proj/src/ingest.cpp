#include "crmort/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <tuple>

#include "crmort/csv.hpp"
#include "crmort/error.hpp"

namespace crmort {

namespace {

constexpr std::int64_t kFactorScale = 1'000'000;

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

int parse_age_group(const std::string& raw, int age_groups, const std::string& where) {
    const std::string s = csv::trim(raw);
    if (!s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); })) {
        const auto a = csv::parse_int(s, where);
        if (a < 1 || a > age_groups) throw DataError(where + ": age_group " + s + " outside 1.." + std::to_string(age_groups));
        return static_cast<int>(a);
    }
    for (int a = 1; a <= age_groups; ++a) {
        if (s == age_band_label(a, age_groups)) return a;
    }
    throw DataError(where + ": unknown age_group '" + s + "'");
}

Gender parse_gender(const std::string& raw, const std::string& where) {
    const std::string s = lower(csv::trim(raw));
    if (s == "f" || s == "female") return Gender::female;
    if (s == "m" || s == "male") return Gender::male;
    throw DataError(where + ": unknown gender '" + raw + "'");
}

std::int64_t parse_count(const std::string& raw, const std::string& where) {
    const auto n = csv::parse_int(csv::trim(raw), where);
    if (n < 0) throw DataError(where + ": negative count");
    return n;
}

} // namespace

std::string normalize_label(const std::string& label) {
    std::string out;
    bool space = false;
    for (unsigned char c : csv::trim(label)) {
        if (std::isspace(c)) {
            space = true;
            continue;
        }
        if (space && !out.empty()) out.push_back(' ');
        space = false;
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

CauseMapping::CauseMapping(std::vector<std::string> cause_names, std::vector<CauseMappingEntry> entries)
    : cause_names_(std::move(cause_names)), entries_(std::move(entries)) {
    if (cause_names_.size() < 2) throw ConfigError("cause mapping needs cause 0 and at least one named cause");
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        auto& e = entries_[i];
        e.label = normalize_label(e.label);
        if (e.label.empty()) throw ConfigError("cause mapping has an empty label");
        if (e.cause < 0 || e.cause >= static_cast<int>(cause_names_.size())) {
            throw ConfigError("cause mapping label '" + e.label + "' points to an unknown cause");
        }
        if (!(e.comparability_factor > 0.0) || !std::isfinite(e.comparability_factor)) {
            throw ConfigError("comparability factor for '" + e.label + "' must be > 0");
        }
        if (!index_.emplace(e.label, i).second) throw ConfigError("duplicate cause mapping label '" + e.label + "'");
    }
}

CauseMapping CauseMapping::default_mapping() {
    struct Row {
        CauseId k;
        double factor;
        std::vector<std::string> labels;
    };
    const std::vector<Row> rows{
        {1, 1.25, {"infectious", "infectious and parasitic diseases", "certain infectious and parasitic diseases"}},
        {2, 1.0, {"neoplasms"}},
        {3, 1.01, {"endocrine", "endocrine, nutritional and metabolic diseases"}},
        {4, 0.78, {"mental", "mental and behavioural disorders"}},
        {5, 1.2, {"nervous", "diseases of the nervous system"}},
        {6, 1.0, {"circulatory", "diseases of the circulatory system"}},
        {7, 0.91, {"respiratory", "diseases of the respiratory system"}},
        {8, 1.05, {"digestive", "diseases of the digestive system"}},
        {9, 1.06, {"external", "external causes of morbidity and mortality", "injury and poisoning"}},
        {10, 1.14, {"genitourinary", "diseases of the genitourinary system"}},
    };
    std::vector<CauseMappingEntry> entries{{"not_elsewhere", 0, 1.0}};
    for (const auto& r : rows) {
        for (const auto& l : r.labels) entries.push_back({l, r.k, r.factor});
    }
    return CauseMapping(default_cause_names(), std::move(entries));
}

bool CauseMapping::contains(const std::string& label) const { return index_.count(normalize_label(label)) > 0; }

const CauseMappingEntry& CauseMapping::lookup(const std::string& label) const {
    auto it = index_.find(normalize_label(label));
    return it == index_.end() ? unmapped_ : entries_[it->second];
}

void to_json(nlohmann::json& j, const CauseMapping& m) {
    j = nlohmann::json{{"causes", m.cause_names()}, {"labels", nlohmann::json::array()}};
    for (const auto& e : m.entries()) {
        j["labels"].push_back({{"label", e.label}, {"cause", e.cause}, {"comparability_factor", e.comparability_factor}});
    }
}

void from_json(const nlohmann::json& j, CauseMapping& m) {
    std::vector<CauseMappingEntry> entries;
    for (const auto& e : j.at("labels")) {
        entries.push_back({e.at("label").get<std::string>(), e.at("cause").get<int>(),
                           e.value("comparability_factor", 1.0)});
    }
    m = CauseMapping(j.at("causes").get<std::vector<std::string>>(), std::move(entries));
}

CauseMapping load_cause_mapping(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open cause mapping " + path);
    try {
        return nlohmann::json::parse(in).get<CauseMapping>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

std::int64_t apply_comparability(std::int64_t count, double factor, int year, std::optional<int> cutoff) {
    if (count < 0) throw DataError("comparability adjustment of a negative count");
    if (!(factor > 0.0)) throw ConfigError("comparability factor must be > 0");
    if (!cutoff || year > *cutoff) return count;
    const std::int64_t f = std::llround(factor * static_cast<double>(kFactorScale));
    return (count * f + kFactorScale / 2) / kFactorScale;
}

std::int64_t apply_comparability(std::int64_t count, double factor, int year, const IngestConfig& config) {
    return apply_comparability(count, factor, year, config.comparability_cutoff_year);
}

void to_json(nlohmann::json& j, const CoverageReport& r) {
    j = nlohmann::json{{"first_year", r.first_year},
                       {"last_year", r.last_year},
                       {"population_rows", r.population_rows},
                       {"death_rows", r.death_rows},
                       {"comparability_adjusted_rows", r.adjusted_rows},
                       {"unmapped_labels", r.unmapped_labels},
                       {"cell_years", nlohmann::json::array()}};
    for (const auto& c : r.cell_years) {
        j["cell_years"].push_back(
            {{"cell", c.cell}, {"year", c.year}, {"population", c.population}, {"death_rows", c.death_rows}});
    }
}

IngestResult load_dataset(const std::string& deaths_csv, const std::string& population_csv, const IngestConfig& config) {
    const int A = config.age_groups;
    if (A < 1) throw ConfigError("age_groups must be >= 1");
    const csv::Table pop = csv::read_file(population_csv);
    const csv::Table dth = csv::read_file(deaths_csv);
    const ModelDims dims{A, config.mapping.causes()};

    using Key = std::tuple<int, std::size_t>; // year, cell
    std::map<Key, std::int64_t> population;
    {
        const std::size_t cy = pop.column("year"), ca = pop.column("age_group"), cg = pop.column("gender"),
                          cn = pop.column("count");
        for (std::size_t r = 0; r < pop.rows.size(); ++r) {
            const auto& row = pop.rows[r];
            const std::string where = population_csv + ":" + std::to_string(pop.line_numbers[r]);
            const int year = static_cast<int>(csv::parse_int(csv::trim(row[cy]), where));
            const CellIndex cell{parse_age_group(row[ca], A, where), parse_gender(row[cg], where)};
            const std::int64_t n = parse_count(row[cn], where);
            if (!population.emplace(Key{year, cell_offset(dims, cell)}, n).second) {
                throw DataError(where + ": duplicate population row for " + cell_key(cell) + " in " + std::to_string(year));
            }
        }
    }
    if (population.empty()) throw DataError(population_csv + ": no population rows");

    struct DeathRow {
        int year;
        std::size_t cell;
        CauseId cause;
        std::int64_t count;
    };
    std::vector<DeathRow> deaths;
    CoverageReport cov;
    std::set<std::tuple<int, std::size_t, std::string>> seen;
    {
        const std::size_t cy = dth.column("year"), ca = dth.column("age_group"), cg = dth.column("gender"),
                          cl = dth.column("cause_label"), cn = dth.column("count");
        for (std::size_t r = 0; r < dth.rows.size(); ++r) {
            const auto& row = dth.rows[r];
            const std::string where = deaths_csv + ":" + std::to_string(dth.line_numbers[r]);
            const int year = static_cast<int>(csv::parse_int(csv::trim(row[cy]), where));
            const CellIndex cell{parse_age_group(row[ca], A, where), parse_gender(row[cg], where)};
            const std::size_t c = cell_offset(dims, cell);
            const std::string label = normalize_label(row[cl]);
            const std::int64_t n = parse_count(row[cn], where);
            if (!seen.emplace(year, c, label).second) {
                throw DataError(where + ": duplicate deaths row for " + cell_key(cell) + ", " + std::to_string(year) +
                                ", '" + label + "'");
            }
            if (!population.count(Key{year, c})) {
                throw DataError(where + ": no population row for cell " + cell_key(cell) + " in year " +
                                std::to_string(year));
            }
            const CauseMappingEntry& e = config.mapping.lookup(label);
            if (!config.mapping.contains(label)) cov.unmapped_labels[label] += n;
            const std::int64_t adjusted = apply_comparability(n, e.comparability_factor, year, config);
            if (e.comparability_factor != 1.0 && config.comparability_cutoff_year &&
                year <= *config.comparability_cutoff_year) {
                ++cov.adjusted_rows;
            }
            deaths.push_back({year, c, e.cause, adjusted});
        }
    }

    int first = std::get<0>(population.begin()->first);
    int last = std::get<0>(population.rbegin()->first);
    if (config.base_year && *config.base_year != first) {
        throw ConfigError("base_year " + std::to_string(*config.base_year) + " differs from the first data year " +
                          std::to_string(first));
    }
    if (config.comparability_cutoff_year &&
        (*config.comparability_cutoff_year < first || *config.comparability_cutoff_year > last)) {
        throw ConfigError("comparability cutoff year " + std::to_string(*config.comparability_cutoff_year) +
                          " lies outside the data years " + std::to_string(first) + "-" + std::to_string(last));
    }
    const int T = last - first + 1;
    std::set<int> pop_years;
    for (const auto& [key, n] : population) pop_years.insert(std::get<0>(key));
    for (int y = first; y <= last; ++y) {
        if (!pop_years.count(y)) throw DataError("no population rows for year " + std::to_string(y));
    }

    MortalityDataset data(dims, first, T);
    data.set_cause_names(config.mapping.cause_names());
    for (const auto& [key, n] : population) data.population(std::get<1>(key), std::get<0>(key) - first + 1) = n;
    std::map<Key, std::size_t> death_rows;
    for (const auto& d : deaths) {
        data.deaths(d.cell, d.cause, d.year - first + 1) += d.count;
        ++death_rows[Key{d.year, d.cell}];
    }

    cov.first_year = first;
    cov.last_year = last;
    cov.population_rows = pop.rows.size();
    cov.death_rows = dth.rows.size();
    for (int y = first; y <= last; ++y) {
        for (std::size_t c = 0; c < dims.n_cells(); ++c) {
            auto it = death_rows.find(Key{y, c});
            cov.cell_years.push_back({cell_key(cell_at(dims, c)), y, population.count(Key{y, c}) > 0,
                                      it == death_rows.end() ? 0 : it->second});
        }
    }

    try {
        data.validate();
    } catch (const DataError& e) {
        throw DataError(deaths_csv + ": " + e.what());
    }
    return IngestResult{std::move(data), std::move(cov)};
}

void emit_rate_series(const MortalityDataset& data, const CellIndex& cell, CauseId cause, std::ostream& out) {
    const ModelDims& dims = data.dims();
    check_cell(dims, cell);
    if (cause < 0 || cause > dims.causes) throw ConfigError("cause index out of range");
    const std::size_t c = cell_offset(dims, cell);
    out << "year,death_rate\n";
    for (int t = 1; t <= data.years(); ++t) {
        const auto m = data.population(c, t);
        out << data.first_year() + t - 1 << ',';
        if (m == 0) {
            out << "NA\n";
        } else {
            out << csv::format_double(static_cast<double>(data.deaths(c, cause, t)) / static_cast<double>(m)) << '\n';
        }
    }
}

} // namespace crmort
