#include "crmort/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "crmort/csv.hpp"
#include "crmort/error.hpp"

namespace crmort {

MortalityDataset::MortalityDataset(ModelDims dims, int first_year, int years)
    : dims_(dims), first_year_(first_year), years_(years) {
    if (years < 1) throw DataError("dataset needs at least one year");
    if (dims.age_groups < 1 || dims.causes < 0) throw DataError("invalid dataset dimensions");
    cause_names_ = cause_names_for(dims.causes);
    population_.assign(dims.n_cells() * static_cast<std::size_t>(years), 0);
    deaths_.assign(dims.n_cells() * dims.n_causes_total() * static_cast<std::size_t>(years), 0);
}

void MortalityDataset::set_cause_names(std::vector<std::string> names) {
    if (names.size() != dims_.n_causes_total()) throw DataError("need one name per model cause");
    cause_names_ = std::move(names);
}

std::int64_t MortalityDataset::total_deaths(std::size_t cell, int t) const {
    std::int64_t total = 0;
    for (int k = 0; k <= dims_.causes; ++k) total += deaths(cell, k, t);
    return total;
}

std::int64_t MortalityDataset::cause_total(CauseId k, int t) const {
    std::int64_t total = 0;
    for (std::size_t c = 0; c < dims_.n_cells(); ++c) total += deaths(c, k, t);
    return total;
}

void MortalityDataset::validate() const {
    if (years_ < 2) throw DataError("dataset needs at least two years of data");
    for (std::size_t c = 0; c < dims_.n_cells(); ++c) {
        const std::string cell = cell_key(cell_at(dims_, c));
        for (int t = 1; t <= years_; ++t) {
            const std::string where = "cell " + cell + ", year " + std::to_string(first_year_ + t - 1);
            if (population(c, t) < 0) throw DataError("negative population at " + where);
            for (int k = 0; k <= dims_.causes; ++k) {
                if (deaths(c, k, t) < 0) throw DataError("negative death count at " + where);
            }
            if (total_deaths(c, t) > population(c, t)) {
                throw DataError("deaths (" + std::to_string(total_deaths(c, t)) + ") exceed population (" +
                                std::to_string(population(c, t)) + ") at " + where);
            }
        }
    }
}

CauseAggregates cause_aggregates(const MortalityDataset& data, const ModelParams& params) {
    const ModelDims& dims = data.dims();
    CauseAggregates agg;
    agg.years = data.years();
    agg.deaths.assign(dims.n_causes_total() * static_cast<std::size_t>(data.years()), 0);
    agg.intensity.assign(agg.deaths.size(), 0.0);
    std::vector<double> w(dims.n_causes_total());
    for (std::size_t c = 0; c < dims.n_cells(); ++c) {
        for (int t = 1; t <= data.years(); ++t) {
            const double m = static_cast<double>(data.population(c, t));
            const double q = death_probability(c, t, params);
            cause_weights(c, t, params, w);
            for (int k = 0; k <= dims.causes; ++k) {
                const std::size_t idx = static_cast<std::size_t>(k * data.years() + t - 1);
                agg.deaths[idx] += data.deaths(c, k, t);
                agg.intensity[idx] += m * q * w[static_cast<std::size_t>(k)];
            }
        }
    }
    return agg;
}

std::string dataset_csv_string(const MortalityDataset& data) {
    std::ostringstream out;
    std::vector<std::string> header{"year", "age_group", "gender", "population"};
    for (const auto& name : data.cause_names()) header.push_back(name);
    out << csv::join(header) << '\n';
    for (int t = 1; t <= data.years(); ++t) {
        for (std::size_t c = 0; c < data.dims().n_cells(); ++c) {
            const CellIndex cell = cell_at(data.dims(), c);
            out << data.first_year() + t - 1 << ',' << cell.age_group << ','
                << (cell.gender == Gender::female ? 'f' : 'm') << ',' << data.population(c, t);
            for (int k = 0; k <= data.dims().causes; ++k) out << ',' << data.deaths(c, k, t);
            out << '\n';
        }
    }
    return out.str();
}

void write_dataset_csv(const MortalityDataset& data, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << dataset_csv_string(data);
}

MortalityDataset read_dataset_csv(const std::string& path) {
    const csv::Table table = csv::read_file(path);
    if (table.header.size() < 5) throw DataError(path + ": normalized dataset needs at least one cause column");
    const std::size_t cy = table.column("year");
    const std::size_t ca = table.column("age_group");
    const std::size_t cg = table.column("gender");
    const std::size_t cp = table.column("population");
    if (cy != 0 || ca != 1 || cg != 2 || cp != 3) {
        throw DataError(path + ": columns must start with year,age_group,gender,population");
    }
    std::vector<std::string> names(table.header.begin() + 4, table.header.end());
    const int causes = static_cast<int>(names.size()) - 1;

    int min_year = 0, max_year = 0, max_age = 0;
    bool first = true;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const std::string where = path + ":" + std::to_string(table.line_numbers[r]);
        const int year = static_cast<int>(csv::parse_int(table.rows[r][cy], where));
        const int age = static_cast<int>(csv::parse_int(table.rows[r][ca], where));
        if (first) {
            min_year = max_year = year;
            first = false;
        }
        min_year = std::min(min_year, year);
        max_year = std::max(max_year, year);
        max_age = std::max(max_age, age);
    }
    if (first) throw DataError(path + ": dataset has no rows");

    MortalityDataset data(ModelDims{max_age, causes}, min_year, max_year - min_year + 1);
    data.set_cause_names(names);
    std::set<std::pair<int, std::size_t>> seen;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::string where = path + ":" + std::to_string(table.line_numbers[r]);
        const int year = static_cast<int>(csv::parse_int(row[cy], where));
        const int age = static_cast<int>(csv::parse_int(row[ca], where));
        const std::string g = csv::trim(row[cg]);
        if (g != "f" && g != "m") throw DataError(where + ": gender must be f or m");
        if (age < 1) throw DataError(where + ": age_group must be >= 1");
        const std::size_t cell = cell_offset(data.dims(), CellIndex{age, g == "f" ? Gender::female : Gender::male});
        const int t = year - min_year + 1;
        if (!seen.insert({t, cell}).second) throw DataError(where + ": duplicate row");
        data.population(cell, t) = csv::parse_int(row[cp], where);
        for (int k = 0; k <= causes; ++k) {
            data.deaths(cell, k, t) = csv::parse_int(row[4 + static_cast<std::size_t>(k)], where);
        }
    }
    const std::size_t expected = data.dims().n_cells() * static_cast<std::size_t>(data.years());
    if (seen.size() != expected) {
        for (int t = 1; t <= data.years(); ++t) {
            for (std::size_t c = 0; c < data.dims().n_cells(); ++c) {
                if (!seen.count({t, c})) {
                    throw DataError(path + ": missing row for cell " + cell_key(cell_at(data.dims(), c)) +
                                    ", year " + std::to_string(min_year + t - 1));
                }
            }
        }
    }
    data.validate();
    return data;
}

} // namespace crmort
