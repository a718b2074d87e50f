#include "crmort/simulate.hpp"

#include <cmath>

#include "crmort/error.hpp"

namespace crmort {

namespace {

std::int64_t poisson_draw(double mean, Rng& rng) {
    if (!(mean >= 0.0) || !std::isfinite(mean)) throw ConfigError("expected intensity must be finite and >= 0");
    if (mean == 0.0) return 0;
    return std::poisson_distribution<std::int64_t>(mean)(rng);
}

} // namespace

SimulationSpec SimulationSpec::constant_population(ModelParams params, int first_year, int years, std::int64_t m,
                                                   std::uint64_t seed) {
    SimulationSpec s;
    s.population.assign(params.dims.n_cells() * static_cast<std::size_t>(years), m);
    s.params = std::move(params);
    s.first_year = first_year;
    s.years = years;
    s.seed = seed;
    return s;
}

void SimulationSpec::validate() const {
    params.validate();
    if (years < 1) throw ConfigError("simulation needs at least one year");
    if (population.size() != params.dims.n_cells() * static_cast<std::size_t>(years)) {
        throw ConfigError("simulation population needs one entry per cell and year");
    }
    for (auto m : population) {
        if (m < 0) throw ConfigError("simulation population must be >= 0");
    }
}

void to_json(nlohmann::json& j, const SimulationSpec& spec) {
    j = nlohmann::json{{"params", spec.params},
                       {"first_year", spec.first_year},
                       {"years", spec.years},
                       {"population", spec.population},
                       {"seed", spec.seed}};
}

// "population" is either one number for every cell-year or the full cell-major list.
void from_json(const nlohmann::json& j, SimulationSpec& spec) {
    spec.params = j.at("params").get<ModelParams>();
    spec.first_year = j.value("first_year", 1987);
    spec.years = j.value("years", 25);
    spec.seed = j.value("seed", std::uint64_t{1});
    const auto& pop = j.at("population");
    if (pop.is_number_integer()) {
        spec.population.assign(spec.params.dims.n_cells() * static_cast<std::size_t>(spec.years),
                               pop.get<std::int64_t>());
    } else {
        spec.population = pop.get<std::vector<std::int64_t>>();
    }
}

void to_json(nlohmann::json& j, const SimulationStats& stats) {
    j = nlohmann::json{{"cap_events", stats.cap_events},
                       {"capped_deaths", stats.capped_deaths},
                       {"cell_years", stats.cell_years},
                       {"risk_factors", stats.risk_factors}};
}

std::vector<double> sample_risk_factors(const RiskFactorVariances& variances, Rng& rng) {
    std::vector<double> out;
    out.reserve(variances.sigma2.size());
    for (double s2 : variances.sigma2) {
        if (!(s2 > 0.0)) throw ConfigError("risk factor variance must be > 0");
        out.push_back(std::gamma_distribution<double>(1.0 / s2, s2)(rng));
    }
    return out;
}

SimulationResult sample_death_counts(const SimulationSpec& spec, Rng& rng) {
    spec.validate();
    const ModelParams& p = spec.params;
    const ModelDims& dims = p.dims;
    const std::size_t nk = dims.n_causes_total();
    SimulationResult res{MortalityDataset(dims, spec.first_year, spec.years), {}};
    res.data.set_cause_names(cause_names_for(dims.causes));
    res.stats.risk_factors.assign(static_cast<std::size_t>(dims.causes), std::vector<double>(spec.years));

    std::vector<double> w(nk);
    for (int t = 1; t <= spec.years; ++t) {
        const std::vector<double> lambda = sample_risk_factors(p.variances, rng);
        for (int k = 1; k <= dims.causes; ++k) res.stats.risk_factors[k - 1][t - 1] = lambda[k - 1];
        for (std::size_t c = 0; c < dims.n_cells(); ++c) {
            const std::int64_t m = spec.population[c * static_cast<std::size_t>(spec.years) + (t - 1)];
            res.data.population(c, t) = m;
            const double mq = static_cast<double>(m) * death_probability(c, t, p);
            cause_weights(c, t, p, w);
            std::int64_t total = 0;
            for (std::size_t k = 0; k < nk; ++k) {
                const double factor = k == 0 ? 1.0 : lambda[k - 1];
                const std::int64_t n = poisson_draw(mq * w[k] * factor, rng);
                res.data.deaths(c, static_cast<int>(k), t) = n;
                total += n;
            }
            ++res.stats.cell_years;
            if (total > m) {
                ++res.stats.cap_events;
                std::int64_t excess = total - m;
                res.stats.capped_deaths += excess;
                for (std::size_t k = nk; k-- > 0 && excess > 0;) {
                    auto& n = res.data.deaths(c, static_cast<int>(k), t);
                    const std::int64_t cut = std::min(n, excess);
                    n -= cut;
                    excess -= cut;
                }
            }
        }
    }
    return res;
}

SimulationResult simulate_dataset(const SimulationSpec& spec, std::uint64_t replication) {
    Rng rng = make_rng(spec.seed, replication);
    return sample_death_counts(spec, rng);
}

double EmpiricalLoss::pmf(std::size_t n) const {
    if (n >= counts.size() || n_sims == 0) return 0.0;
    return static_cast<double>(counts[n]) / static_cast<double>(n_sims);
}

double EmpiricalLoss::standard_error(std::size_t n) const {
    const double p = pmf(n);
    return std::sqrt(p * (1.0 - p) / static_cast<double>(n_sims));
}

double EmpiricalLoss::mean() const {
    double m = 0.0;
    for (std::size_t n = 1; n < counts.size(); ++n) m += static_cast<double>(n) * pmf(n);
    return m;
}

LossPMF EmpiricalLoss::as_pmf() const {
    LossPMF out;
    out.prob.resize(counts.size());
    for (std::size_t n = 0; n < counts.size(); ++n) out.prob[n] = pmf(n);
    return out;
}

EmpiricalLoss simulate_portfolio_loss(const Portfolio& portfolio, const ModelParams& params, double t, Rng& rng,
                                      std::uint64_t n_sims) {
    if (n_sims == 0) throw ConfigError("n_sims must be >= 1");
    const ModelDims& dims = params.dims;
    const std::size_t nk = dims.n_causes_total();
    // per-policy expected deaths by cause, before the factor
    std::vector<double> base(portfolio.policies.size() * nk);
    std::vector<double> w(nk);
    for (std::size_t i = 0; i < portfolio.policies.size(); ++i) {
        const Policy& pol = portfolio.policies[i];
        const std::size_t c = cell_offset(dims, pol.cell);
        cause_weights(c, t, params, w);
        const double q = death_probability(c, t, params);
        for (std::size_t k = 0; k < nk; ++k) base[i * nk + k] = static_cast<double>(pol.count) * q * w[k];
    }
    EmpiricalLoss out;
    out.n_sims = n_sims;
    for (std::uint64_t s = 0; s < n_sims; ++s) {
        const std::vector<double> lambda = sample_risk_factors(params.variances, rng);
        std::uint64_t loss = 0;
        for (std::size_t i = 0; i < portfolio.policies.size(); ++i) {
            double intensity = base[i * nk];
            for (std::size_t k = 1; k < nk; ++k) intensity += base[i * nk + k] * lambda[k - 1];
            const std::int64_t deaths = poisson_draw(intensity, rng);
            loss += static_cast<std::uint64_t>(deaths * portfolio.policies[i].exposure);
        }
        if (loss >= out.counts.size()) out.counts.resize(loss + 1, 0);
        ++out.counts[loss];
    }
    return out;
}

} // namespace crmort
