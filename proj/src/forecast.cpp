#include "crmort/forecast.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "crmort/csv.hpp"
#include "crmort/error.hpp"

namespace crmort {

namespace {

void require_draws(const PosteriorSamples& samples) {
    if (samples.n_draws() == 0) throw ConfigError("forecast needs at least one posterior draw");
}

std::string cause_label(const PosteriorSamples& samples, CauseId k) {
    if (static_cast<std::size_t>(k) < samples.cause_names.size()) return samples.cause_names[k];
    return "cause_" + std::to_string(k);
}

std::string fixed3(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", x);
    return buf;
}

} // namespace

double nearest_rank_quantile(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) throw ConfigError("quantile of an empty sample");
    const double n = static_cast<double>(sorted.size());
    auto rank = static_cast<std::size_t>(std::ceil(p * n - 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, sorted.size());
    return sorted[rank - 1];
}

std::vector<WeightSummary> weight_posterior(const PosteriorSamples& samples, const CellIndex& cell, int year,
                                            const TimeMapping& mapping) {
    require_draws(samples);
    const ModelDims& dims = samples.base.dims;
    check_cell(dims, cell);
    const std::size_t c = cell_offset(dims, cell);
    const std::size_t nk = dims.n_causes_total();
    const std::size_t N = samples.n_draws();
    const double t = mapping.t_of(year);

    std::vector<std::vector<double>> values(nk, std::vector<double>(N));
    ModelParams p = samples.base;
    std::vector<double> w(nk);
    for (std::size_t i = 0; i < N; ++i) {
        samples.draw_into(i, p);
        cause_weights(c, t, p, w);
        for (std::size_t k = 0; k < nk; ++k) values[k][i] = w[k];
    }
    std::vector<WeightSummary> out;
    for (std::size_t k = 0; k < nk; ++k) {
        auto& v = values[k];
        double sum = 0.0;
        for (double x : v) sum += x;
        std::sort(v.begin(), v.end());
        out.push_back({static_cast<CauseId>(k), cause_label(samples, static_cast<CauseId>(k)),
                       sum / static_cast<double>(N), nearest_rank_quantile(v, 0.05), nearest_rank_quantile(v, 0.95)});
    }
    return out;
}

std::vector<WeightSummary> top_causes(const PosteriorSamples& samples, const CellIndex& cell, int year,
                                      const TimeMapping& mapping, int n) {
    const int total = samples.base.dims.causes + 1;
    if (n < 1 || n > total) throw ConfigError("top_causes needs 1 <= n <= " + std::to_string(total));
    auto all = weight_posterior(samples, cell, year, mapping);
    std::stable_sort(all.begin(), all.end(), [](const WeightSummary& a, const WeightSummary& b) {
        if (a.mean != b.mean) return a.mean > b.mean;
        return a.cause < b.cause;
    });
    all.resize(static_cast<std::size_t>(n));
    return all;
}

RateSummary death_rate_forecast(const PosteriorSamples& samples, const CellIndex& cell, int year,
                                const TimeMapping& mapping) {
    require_draws(samples);
    check_cell(samples.base.dims, cell);
    const std::size_t c = cell_offset(samples.base.dims, cell);
    const double t = mapping.t_of(year);
    std::vector<double> q(samples.n_draws());
    ModelParams p = samples.base;
    double sum = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        samples.draw_into(i, p);
        q[i] = death_probability(c, t, p);
        sum += q[i];
    }
    std::sort(q.begin(), q.end());
    return RateSummary{sum / static_cast<double>(q.size()), nearest_rank_quantile(q, 0.05),
                       nearest_rank_quantile(q, 0.95)};
}

ForecastTable forecast_table(const PosteriorSamples& samples, const std::vector<CellIndex>& cells,
                             const std::vector<int>& years, const TimeMapping& mapping, int top_n) {
    if (years.empty()) throw ConfigError("forecast needs at least one target year");
    const int n = top_n == 0 ? samples.base.dims.causes + 1 : top_n;
    ForecastTable table;
    for (const auto& cell : cells) {
        for (int y : years) table.blocks.push_back({cell, y, top_causes(samples, cell, y, mapping, n)});
    }
    return table;
}

std::string render_csv(const ForecastTable& table) {
    std::ostringstream out;
    out << "cell,year,rank,cause,mean,q05,q95\n";
    for (const auto& b : table.blocks) {
        for (std::size_t r = 0; r < b.ranked.size(); ++r) {
            const auto& w = b.ranked[r];
            out << cell_key(b.cell) << ',' << b.year << ',' << r + 1 << ',' << csv::escape(w.name) << ','
                << csv::format_double(w.mean) << ',' << csv::format_double(w.q05) << ','
                << csv::format_double(w.q95) << '\n';
        }
    }
    return out.str();
}

std::string render_text(const ForecastTable& table, int age_groups) {
    // one section per cell, one column per year: "cause mean (q95/q05)"
    std::vector<std::string> order;
    std::map<std::string, std::vector<const ForecastBlock*>> by_cell;
    for (const auto& b : table.blocks) {
        const std::string key = cell_key(b.cell);
        if (!by_cell.count(key)) order.push_back(key);
        by_cell[key].push_back(&b);
    }
    std::ostringstream out;
    for (const auto& key : order) {
        const auto& blocks = by_cell[key];
        const CellIndex cell = blocks.front()->cell;
        std::size_t rows = 0;
        std::vector<std::vector<std::string>> cols;
        for (const auto* b : blocks) {
            std::vector<std::string> col{std::to_string(b->year)};
            for (const auto& w : b->ranked) {
                col.push_back(w.name + " " + fixed3(w.mean) + " (" + fixed3(w.q95) + "/" + fixed3(w.q05) + ")");
            }
            rows = std::max(rows, col.size());
            cols.push_back(std::move(col));
        }
        std::vector<std::size_t> width;
        for (const auto& col : cols) {
            std::size_t wmax = 0;
            for (const auto& s : col) wmax = std::max(wmax, s.size());
            width.push_back(wmax);
        }
        out << (cell.gender == Gender::female ? "Females " : "Males ") << age_band_label(cell.age_group, age_groups)
            << '\n';
        for (std::size_t r = 0; r < rows; ++r) {
            std::string line = r == 0 ? std::string("    ") : "  " + std::to_string(r) + " ";
            for (std::size_t c = 0; c < cols.size(); ++c) {
                const std::string s = r < cols[c].size() ? cols[c][r] : "";
                line += "  " + s + std::string(width[c] - s.size(), ' ');
            }
            while (!line.empty() && line.back() == ' ') line.pop_back();
            out << line << '\n';
        }
        out << '\n';
    }
    return out.str();
}

ForecastTable parse_forecast_csv(const std::string& text, const std::vector<std::string>& cause_names) {
    const csv::Table t = csv::parse(text, "forecast");
    const std::vector<std::string> expected{"cell", "year", "rank", "cause", "mean", "q05", "q95"};
    if (t.header != expected) throw DataError("forecast CSV has unexpected columns");
    ForecastTable table;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const std::string where = "forecast:" + std::to_string(t.line_numbers[r]);
        const CellIndex cell = parse_cell_key(row[0]);
        const int year = static_cast<int>(csv::parse_int(row[1], where));
        const auto rank = csv::parse_int(row[2], where);
        auto it = std::find(cause_names.begin(), cause_names.end(), row[3]);
        if (it == cause_names.end()) throw DataError(where + ": unknown cause " + row[3]);
        WeightSummary w{static_cast<CauseId>(it - cause_names.begin()), row[3], csv::parse_double(row[4], where),
                        csv::parse_double(row[5], where), csv::parse_double(row[6], where)};
        if (rank == 1 || table.blocks.empty()) table.blocks.push_back({cell, year, {}});
        table.blocks.back().ranked.push_back(w);
    }
    return table;
}

nlohmann::json forecast_json(const ForecastTable& table) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& b : table.blocks) {
        nlohmann::json block{{"cell", cell_key(b.cell)}, {"year", b.year}, {"causes", nlohmann::json::array()}};
        for (const auto& w : b.ranked) {
            block["causes"].push_back(
                {{"cause", w.cause}, {"name", w.name}, {"mean", w.mean}, {"q05", w.q05}, {"q95", w.q95}});
        }
        j.push_back(block);
    }
    return j;
}

} // namespace crmort
