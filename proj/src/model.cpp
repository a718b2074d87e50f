#include "crmort/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "crmort/error.hpp"

namespace crmort {

std::size_t cell_offset(const ModelDims& dims, const CellIndex& cell) {
    check_cell(dims, cell);
    return static_cast<std::size_t>((cell.age_group - 1) * 2 + static_cast<int>(cell.gender));
}

CellIndex cell_at(const ModelDims& dims, std::size_t offset) {
    if (offset >= dims.n_cells()) {
        throw ConfigError("cell offset " + std::to_string(offset) + " out of range");
    }
    return CellIndex{static_cast<int>(offset / 2) + 1, static_cast<Gender>(offset % 2)};
}

void check_cell(const ModelDims& dims, const CellIndex& cell) {
    if (cell.age_group < 1 || cell.age_group > dims.age_groups) {
        throw ConfigError("age group " + std::to_string(cell.age_group) + " outside 1.." +
                          std::to_string(dims.age_groups));
    }
}

std::string cell_key(const CellIndex& cell) {
    return (cell.gender == Gender::female ? "f" : "m") + std::to_string(cell.age_group);
}

CellIndex parse_cell_key(const std::string& key) {
    if (key.size() < 2 || (key[0] != 'f' && key[0] != 'm')) {
        throw DataError("malformed cell key '" + key + "' (expected f<age> or m<age>)");
    }
    int age = 0;
    for (std::size_t i = 1; i < key.size(); ++i) {
        if (key[i] < '0' || key[i] > '9') throw DataError("malformed cell key '" + key + "'");
        age = age * 10 + (key[i] - '0');
    }
    return CellIndex{age, key[0] == 'f' ? Gender::female : Gender::male};
}

std::string age_band_label(int age_group, int age_groups) {
    const int lo = 10 * (age_group - 1);
    if (age_group == age_groups) return std::to_string(lo) + "+";
    return std::to_string(lo) + "-" + std::to_string(lo + 9);
}

std::string gender_name(Gender g) { return g == Gender::female ? "female" : "male"; }

const std::vector<std::string>& default_cause_names() {
    static const std::vector<std::string> names{
        "not_elsewhere", "infectious", "neoplasms", "endocrine",   "mental",       "nervous",
        "circulatory",   "respiratory", "digestive", "external",   "genitourinary"};
    return names;
}

std::vector<std::string> cause_names_for(int causes) {
    if (causes + 1 == static_cast<int>(default_cause_names().size())) return default_cause_names();
    std::vector<std::string> names;
    for (int k = 0; k <= causes; ++k) names.push_back("cause_" + std::to_string(k));
    return names;
}

ModelParams ModelParams::zeros(const ModelDims& dims) {
    ModelParams p;
    p.dims = dims;
    p.death_prob.assign(dims.n_cells(), DeathProbParams{});
    p.weights.u.assign(dims.n_cells() * dims.n_causes_total(), 0.0);
    p.weights.v.assign(dims.n_cells() * dims.n_causes_total(), 0.0);
    p.weights.cause_trend.assign(dims.n_causes_total(), TrendReductionParams{});
    p.variances.sigma2.assign(static_cast<std::size_t>(dims.causes), 0.1);
    return p;
}

void ModelParams::validate() const {
    if (dims.age_groups < 1 || dims.causes < 0) throw ConfigError("invalid model dimensions");
    const std::size_t nc = dims.n_cells();
    const std::size_t nk = dims.n_causes_total();
    if (death_prob.size() != nc) throw ConfigError("death_prob must have one entry per cell");
    if (weights.u.size() != nc * nk || weights.v.size() != nc * nk) {
        throw ConfigError("weights.u/v must have (K+1) entries per cell");
    }
    if (weights.cause_trend.size() != nk) throw ConfigError("cause_trend must have K+1 entries");
    if (variances.sigma2.size() != static_cast<std::size_t>(dims.causes)) {
        throw ConfigError("sigma2 must have K entries");
    }
    auto check_trend = [](const TrendReductionParams& tr) {
        if (!(tr.eta > 0.0) || !std::isfinite(tr.eta) || !std::isfinite(tr.zeta)) {
            throw ConfigError("trend reduction requires finite zeta and eta > 0");
        }
    };
    for (const auto& dp : death_prob) {
        if (!std::isfinite(dp.alpha) || !std::isfinite(dp.beta)) throw ConfigError("non-finite alpha/beta");
        check_trend(dp.trend);
    }
    for (const auto& tr : weights.cause_trend) check_trend(tr);
    for (double x : weights.u) {
        if (!std::isfinite(x)) throw ConfigError("non-finite u");
    }
    for (double x : weights.v) {
        if (!std::isfinite(x)) throw ConfigError("non-finite v");
    }
    for (double s2 : variances.sigma2) {
        if (!(s2 > 0.0) || !std::isfinite(s2)) throw ConfigError("sigma2 entries must be finite and > 0");
    }
}

bool ModelParams::is_gauge_fixed() const {
    for (std::size_t c = 0; c < dims.n_cells(); ++c) {
        if (u(c, 0) != 0.0 || v(c, 0) != 0.0) return false;
    }
    return true;
}

void ModelParams::fix_gauge() {
    for (std::size_t c = 0; c < dims.n_cells(); ++c) {
        const double u0 = u(c, 0);
        const double v0 = v(c, 0);
        for (int k = 0; k <= dims.causes; ++k) {
            u(c, k) -= u0;
            v(c, k) -= v0;
        }
    }
}

std::size_t raw_parameter_count(const ModelDims& dims) {
    return 2 * dims.n_cells() + 2 * dims.n_cells() * dims.n_causes_total() +
           static_cast<std::size_t>(dims.causes);
}

std::size_t free_parameter_count(const ModelDims& dims) {
    return raw_parameter_count(dims) - 2 * dims.n_cells();
}

double laplace_cdf(double x) {
    if (!std::isfinite(x)) throw ConfigError("laplace_cdf requires a finite argument");
    if (x < 0.0) return 0.5 * std::exp(x);
    if (x > 0.0) return 1.0 - 0.5 * std::exp(-x);
    return 0.5;
}

double log_laplace_cdf(double x) {
    if (x <= 0.0) return x - std::numbers::ln2;
    return std::log1p(-0.5 * std::exp(-x));
}

double laplace_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw ConfigError("laplace_quantile requires p in (0,1)");
    if (p < 0.5) return std::log(2.0 * p);
    return -std::log(2.0 * (1.0 - p));
}

double trend_reduction(const TrendReductionParams& params, double t) {
    if (!(params.eta > 0.0)) throw ConfigError("trend reduction requires eta > 0");
    return std::atan(params.zeta + params.eta * t) / params.eta;
}

double death_probability(std::size_t cell, double t, const ModelParams& params) {
    const DeathProbParams& dp = params.death_prob.at(cell);
    return laplace_cdf(dp.alpha + dp.beta * trend_reduction(dp.trend, t));
}

double death_probability(const CellIndex& cell, double t, const ModelParams& params) {
    return death_probability(cell_offset(params.dims, cell), t, params);
}

void cause_weights(std::size_t cell, double t, const ModelParams& params, std::span<double> out) {
    const std::size_t nk = params.dims.n_causes_total();
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < nk; ++k) {
        const int kk = static_cast<int>(k);
        out[k] = params.u(cell, kk) + params.v(cell, kk) * trend_reduction(params.weights.cause_trend[k], t);
        top = std::max(top, out[k]);
    }
    double total = 0.0;
    for (std::size_t k = 0; k < nk; ++k) {
        out[k] = std::exp(out[k] - top);
        total += out[k];
    }
    for (std::size_t k = 0; k < nk; ++k) out[k] /= total;
}

std::vector<double> cause_weights(const CellIndex& cell, double t, const ModelParams& params) {
    std::vector<double> w(params.dims.n_causes_total());
    cause_weights(cell_offset(params.dims, cell), t, params, w);
    return w;
}

double expected_deaths(const CellIndex& cell, CauseId cause, double t, const ModelParams& params,
                       double population) {
    if (!(population >= 0.0)) throw ConfigError("population must be >= 0");
    if (cause < 0 || cause > params.dims.causes) throw ConfigError("cause id out of range");
    if (population == 0.0) return 0.0;
    const auto w = cause_weights(cell, t, params);
    return population * death_probability(cell, t, params) * w[static_cast<std::size_t>(cause)];
}

namespace {

nlohmann::json trend_json(const TrendReductionParams& tr) {
    return nlohmann::json{{"zeta", tr.zeta}, {"eta", tr.eta}};
}

TrendReductionParams trend_from(const nlohmann::json& j) {
    return TrendReductionParams{j.at("zeta").get<double>(), j.at("eta").get<double>()};
}

} // namespace

void to_json(nlohmann::json& j, const ModelParams& p) {
    const std::size_t nk = p.dims.n_causes_total();
    nlohmann::json death = nlohmann::json::array();
    nlohmann::json u = nlohmann::json::array();
    nlohmann::json v = nlohmann::json::array();
    for (std::size_t c = 0; c < p.dims.n_cells(); ++c) {
        const CellIndex cell = cell_at(p.dims, c);
        const DeathProbParams& dp = p.death_prob[c];
        death.push_back({{"age_group", cell.age_group},
                         {"gender", gender_name(cell.gender)},
                         {"alpha", dp.alpha},
                         {"beta", dp.beta},
                         {"trend", trend_json(dp.trend)}});
        u.push_back(std::vector<double>(p.weights.u.begin() + c * nk, p.weights.u.begin() + (c + 1) * nk));
        v.push_back(std::vector<double>(p.weights.v.begin() + c * nk, p.weights.v.begin() + (c + 1) * nk));
    }
    nlohmann::json cause_trend = nlohmann::json::array();
    for (const auto& tr : p.weights.cause_trend) cause_trend.push_back(trend_json(tr));
    j = nlohmann::json{{"dims", {{"age_groups", p.dims.age_groups}, {"causes", p.dims.causes}}},
                       {"death_prob", death},
                       {"weights", {{"u", u}, {"v", v}, {"cause_trend", cause_trend}}},
                       {"variances", {{"sigma2", p.variances.sigma2}}}};
}

void from_json(const nlohmann::json& j, ModelParams& p) {
    ModelDims dims{j.at("dims").at("age_groups").get<int>(), j.at("dims").at("causes").get<int>()};
    p = ModelParams::zeros(dims);
    const std::size_t nk = dims.n_causes_total();
    const auto& death = j.at("death_prob");
    if (death.size() != dims.n_cells()) throw ConfigError("death_prob must list every cell");
    for (const auto& entry : death) {
        const std::string g = entry.at("gender").get<std::string>();
        if (g != "female" && g != "male") throw ConfigError("gender must be 'female' or 'male'");
        CellIndex cell{entry.at("age_group").get<int>(), g == "female" ? Gender::female : Gender::male};
        DeathProbParams& dp = p.death_prob[cell_offset(dims, cell)];
        dp.alpha = entry.at("alpha").get<double>();
        dp.beta = entry.at("beta").get<double>();
        dp.trend = trend_from(entry.at("trend"));
    }
    const auto& w = j.at("weights");
    const auto& u = w.at("u");
    const auto& v = w.at("v");
    if (u.size() != dims.n_cells() || v.size() != dims.n_cells()) throw ConfigError("u/v must list every cell");
    for (std::size_t c = 0; c < dims.n_cells(); ++c) {
        if (u[c].size() != nk || v[c].size() != nk) throw ConfigError("u/v rows need K+1 entries");
        for (std::size_t k = 0; k < nk; ++k) {
            p.weights.u[c * nk + k] = u[c][k].get<double>();
            p.weights.v[c * nk + k] = v[c][k].get<double>();
        }
    }
    const auto& ct = w.at("cause_trend");
    if (ct.size() != nk) throw ConfigError("cause_trend needs K+1 entries");
    for (std::size_t k = 0; k < nk; ++k) p.weights.cause_trend[k] = trend_from(ct[k]);
    p.variances.sigma2 = j.at("variances").at("sigma2").get<std::vector<double>>();
    p.validate();
}

ModelParams load_params(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open parameter file " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("malformed parameter file " + path + ": " + e.what());
    }
    try {
        return j.get<ModelParams>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("invalid parameter file " + path + ": " + e.what());
    }
}

void save_params(const ModelParams& params, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write parameter file " + path);
    out << nlohmann::json(params).dump(2) << '\n';
}

} // namespace crmort
