// Acceptance run: one PASS/FAIL/SKIP line per criterion. Criterion 8 needs real data supplied
// through environment variables and never blocks the exit status.
//
// usage: crmort_acceptance [criterion ...]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/negative_binomial.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "crmort/csv.hpp"
#include "crmort/diagnostics.hpp"
#include "crmort/forecast.hpp"
#include "crmort/ingest.hpp"
#include "crmort/likelihood.hpp"
#include "crmort/mcmc.hpp"
#include "crmort/panjer.hpp"
#include "crmort/simulate.hpp"
#include "support.hpp"

using namespace crmort;
namespace fs = std::filesystem;

namespace {

enum class Status { pass, fail, skip };

struct Outcome {
    Status status = Status::fail;
    std::string detail;
};

Outcome verdict(bool ok, const std::string& detail) { return {ok ? Status::pass : Status::fail, detail}; }

std::string fmt(double x) {
    std::ostringstream s;
    s.precision(3);
    s << x;
    return s.str();
}

const char* env(const char* name) {
    const char* v = std::getenv(name);
    return (v && *v) ? v : nullptr;
}

// --- 1: negative binomial oracle ----------------------------------------------------------------

Outcome nb_oracle() {
    double worst = 0.0;
    for (double rho : {0.1, 1.0, 10.0}) {
        for (double s2 : {0.05, 0.5, 2.0}) {
            // failures-before-r-successes form: success probability 1/(1 + s2 rho)
            const boost::math::negative_binomial_distribution<double> nb(1.0 / s2, 1.0 / (1.0 + s2 * rho));
            for (int n = 0; n <= 50; ++n) {
                const double ref = boost::math::pdf(nb, static_cast<double>(n));
                const double got = std::exp(mixed_poisson_log_pmf(n, rho, s2));
                worst = std::max(worst, std::abs(got - ref));
            }
        }
    }
    return verdict(worst < 1e-12, "max |pmf diff| " + fmt(worst) + " over 459 grid points");
}

// --- 2: likelihood against quadrature over the risk factor --------------------------------------

double log_poisson(std::int64_t n, double rho) {
    return static_cast<double>(n) * std::log(rho) - rho - std::lgamma(static_cast<double>(n) + 1.0);
}

double quadrature_loglik(const MortalityDataset& d, const ModelParams& p) {
    double total = 0.0;
    const double s2 = p.sigma2(1);
    const double shape = 1.0 / s2;
    for (int t = 1; t <= d.years(); ++t) {
        std::vector<double> rho0, rho1;
        std::vector<std::int64_t> n1;
        for (std::size_t c = 0; c < 2; ++c) {
            const double m = static_cast<double>(d.population(c, t));
            const double x = p.death_prob[c].alpha +
                             p.death_prob[c].beta * std::atan(p.death_prob[c].trend.zeta + p.death_prob[c].trend.eta * t) /
                                 p.death_prob[c].trend.eta;
            const double q = x < 0.0 ? 0.5 * std::exp(x) : 1.0 - 0.5 * std::exp(-x);
            const double z1 = p.u(c, 1) + p.v(c, 1) *
                                              std::atan(p.weights.cause_trend[1].zeta + p.weights.cause_trend[1].eta * t) /
                                              p.weights.cause_trend[1].eta;
            const double z0 = p.u(c, 0);
            const double w1 = 1.0 / (1.0 + std::exp(z0 - z1));
            rho0.push_back(m * q * (1.0 - w1));
            rho1.push_back(m * q * w1);
            n1.push_back(d.deaths(c, 1, t));
            total += log_poisson(d.deaths(c, 0, t), rho0.back());
        }
        auto logf = [&](double lam) {
            double v = (shape - 1.0) * std::log(lam) - shape * lam + shape * std::log(shape) - std::lgamma(shape);
            for (std::size_t c = 0; c < 2; ++c) v += log_poisson(n1[c], rho1[c] * lam);
            return v;
        };
        const double N = static_cast<double>(n1[0] + n1[1]);
        const double mode = std::max((N + shape - 1.0) / (rho1[0] + rho1[1] + shape), 1e-8);
        const double top = logf(mode);
        auto f = [&](double lam) { return lam > 0.0 ? std::exp(logf(lam) - top) : 0.0; };
        using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
        const double inf = std::numeric_limits<double>::infinity();
        const double area = GK::integrate(f, 0.0, mode, 20, 1e-15) + GK::integrate(f, mode, inf, 20, 1e-15);
        total += top + std::log(area);
    }
    return total;
}

Outcome quadrature_oracle() {
    ModelParams p = ModelParams::zeros({1, 1});
    p.death_prob[0].alpha = -4.2;
    p.death_prob[1].alpha = -3.7;
    p.death_prob[0].beta = -0.02;
    p.death_prob[1].beta = -0.015;
    p.u(0, 1) = 0.4;
    p.u(1, 1) = -0.3;
    p.v(0, 1) = 0.01;
    p.v(1, 1) = -0.004;
    MortalityDataset d({1, 1}, 2000, 2);
    const std::int64_t pop[2][2] = {{50000, 51000}, {80000, 79000}};
    const std::int64_t dead[2][2][2] = {{{160, 171}, {240, 229}}, {{540, 502}, {520, 610}}};
    for (std::size_t c = 0; c < 2; ++c) {
        for (int t = 1; t <= 2; ++t) {
            d.population(c, t) = pop[c][t - 1];
            for (int k = 0; k <= 1; ++k) d.deaths(c, k, t) = dead[c][k][t - 1];
        }
    }
    double worst = 0.0;
    for (double s2 : {0.005, 0.05, 0.5, 3.0}) {
        p.sigma2(1) = s2;
        const double ref = quadrature_loglik(d, p);
        worst = std::max(worst, std::abs(log_likelihood(d, p) - ref) / std::abs(ref));
    }
    return verdict(worst < 1e-8, "max relative error " + fmt(worst) + " over 4 variances");
}

// --- 3: gauge invariance ------------------------------------------------------------------------

PosteriorSamples samples_of(const std::vector<ModelParams>& draws) {
    PosteriorSamples s;
    s.base = draws.front();
    s.base.fix_gauge();
    const FreeLayout layout(s.base.dims);
    s.names = layout.names();
    s.cause_names = cause_names_for(s.base.dims.causes);
    for (const auto& d : draws) {
        ModelParams g = d;
        g.fix_gauge();
        const auto x = layout.extract(g);
        s.values.insert(s.values.end(), x.begin(), x.end());
    }
    return s;
}

// Mean, 5% and 95% of every weight and of the death probability, computed straight from the draws.
std::vector<double> raw_statistics(const std::vector<ModelParams>& draws, std::size_t cell, double t) {
    const std::size_t nk = draws.front().dims.n_causes_total();
    std::vector<std::vector<double>> cols(nk + 1);
    std::vector<double> w(nk);
    for (const auto& p : draws) {
        cause_weights(cell, t, p, w);
        for (std::size_t k = 0; k < nk; ++k) cols[k].push_back(w[k]);
        cols[nk].push_back(death_probability(cell, t, p));
    }
    std::vector<double> out;
    for (auto& col : cols) {
        double mean = 0.0;
        for (double x : col) mean += x;
        std::sort(col.begin(), col.end());
        out.push_back(mean / static_cast<double>(col.size()));
        out.push_back(nearest_rank_quantile(col, 0.05));
        out.push_back(nearest_rank_quantile(col, 0.95));
    }
    return out;
}

std::vector<double> table_statistics(const std::vector<ModelParams>& draws, const std::vector<CellIndex>& cells,
                                     const std::vector<int>& years, const TimeMapping& tm) {
    const PosteriorSamples s = samples_of(draws);
    std::vector<double> out;
    for (const auto& b : forecast_table(s, cells, years, tm, 0).blocks) {
        for (const auto& r : b.ranked) out.insert(out.end(), {static_cast<double>(r.cause), r.mean, r.q05, r.q95});
    }
    for (const auto& c : cells) {
        for (int y : years) {
            const RateSummary r = death_rate_forecast(s, c, y, tm);
            out.insert(out.end(), {r.mean, r.q05, r.q95});
        }
    }
    return out;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    return worst;
}

Outcome gauge_invariance() {
    const ModelParams truth = testing::reference_params(9, 10);
    const auto data = testing::synthetic_dataset(truth, 25, 1000000, 41);
    std::mt19937_64 rng(123);
    std::normal_distribution<double> z(0.0, 1.0);
    std::vector<ModelParams> draws;
    for (int i = 0; i < 100; ++i) {
        ModelParams p = truth;
        for (std::size_t c = 0; c < p.dims.n_cells(); ++c) {
            p.death_prob[c].alpha += 0.05 * z(rng);
            p.death_prob[c].beta += 0.002 * z(rng);
            for (int k = 1; k <= p.dims.causes; ++k) {
                p.u(c, k) += 0.2 * z(rng);
                p.v(c, k) += 0.005 * z(rng);
            }
        }
        draws.push_back(p);
    }
    const TimeMapping tm{1987, 25};
    const std::vector<int> years{2011, 2031, 2051};
    double worst_ll = 0.0, worst_fc = 0.0;
    const double ll0 = log_likelihood(data, draws.front());
    for (std::size_t cell = 0; cell < truth.dims.n_cells(); ++cell) {
        const std::vector<CellIndex> cells{cell_at(truth.dims, cell)};
        const auto base_table = table_statistics(draws, cells, years, tm);
        for (bool shift_v : {false, true}) {
            std::vector<ModelParams> moved = draws;
            for (auto& p : moved) {
                for (int k = 0; k <= p.dims.causes; ++k) (shift_v ? p.v(cell, k) : p.u(cell, k)) += 3.7;
            }
            worst_ll = std::max(worst_ll, std::abs(log_likelihood(data, moved.front()) - ll0));
            for (int y : years) {
                worst_fc = std::max(worst_fc, max_abs_diff(raw_statistics(draws, cell, tm.t_of(y)),
                                                           raw_statistics(moved, cell, tm.t_of(y))));
            }
            worst_fc = std::max(worst_fc, max_abs_diff(base_table, table_statistics(moved, cells, years, tm)));
        }
    }
    return verdict(worst_ll < 1e-9 && worst_fc < 1e-9,
                   "max |d loglik| " + fmt(worst_ll) + ", max |d forecast| " + fmt(worst_fc) + " over 18 cells");
}

// --- 4: parameter recovery ----------------------------------------------------------------------

Outcome parameter_recovery() {
    constexpr int kReps = 20, kChains = 4, kCauses = 3;
    const ModelParams truth = testing::reference_params(9, kCauses);
    std::vector<int> covered(kCauses, 0);
    double worst_rhat = 0.0;
    const auto start = std::chrono::steady_clock::now();
    for (int r = 0; r < kReps; ++r) {
        const auto spec = SimulationSpec::constant_population(truth, 1987, 25, 1000000, 5000 + r);
        const MortalityDataset data = simulate_dataset(spec).data;
        const ModelParams init = init_params_moment_matching(data);
        std::vector<ModelParams> inits;
        std::vector<SamplerConfig> cfgs;
        for (int c = 0; c < kChains; ++c) {
            SamplerConfig cfg;
            cfg.n_steps = 35000;
            cfg.burn_in = 5000;
            cfg.seed = 100000 + 10 * static_cast<std::uint64_t>(r) + static_cast<std::uint64_t>(c);
            cfgs.push_back(cfg);
            inits.push_back(c == 0 ? init : jittered_start(data, init, cfg.seed));
        }
        const auto chains = run_chains_parallel(data, inits, cfgs, 0);
        const PosteriorSamples pooled = pool_samples(chains);
        std::ostringstream line;
        line << "  replication " << r + 1 << ":";
        for (int k = 1; k <= kCauses; ++k) {
            const std::size_t j = FreeLayout(truth.dims).sigma2_index(k);
            std::vector<double> sigma;
            for (double s2 : pooled.column(j)) sigma.push_back(std::sqrt(s2));
            std::sort(sigma.begin(), sigma.end());
            const double lo = nearest_rank_quantile(sigma, 0.05), hi = nearest_rank_quantile(sigma, 0.95);
            const double target = std::sqrt(truth.sigma2(k));
            if (lo <= target && target <= hi) ++covered[k - 1];

            std::vector<std::vector<double>> cols;
            for (const auto& ch : chains) cols.push_back(ch.column(j));
            std::vector<std::span<const double>> spans(cols.begin(), cols.end());
            const double rhat = split_rhat(spans);
            worst_rhat = std::max(worst_rhat, std::isfinite(rhat) ? rhat : std::numeric_limits<double>::infinity());
            line << " sigma_" << k << " " << fmt(target) << " in [" << fmt(lo) << ", " << fmt(hi) << "] rhat "
                 << fmt(rhat) << ";";
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::cerr << line.str() << " (" << fmt(secs) << " s)\n";
    }
    bool ok = worst_rhat < 1.1;
    std::string detail = "coverage";
    for (int k = 0; k < kCauses; ++k) {
        ok = ok && covered[k] >= 16;
        detail += " sigma_" + std::to_string(k + 1) + " " + std::to_string(covered[k]) + "/20";
    }
    return verdict(ok, detail + ", max split R-hat " + fmt(worst_rhat));
}

// --- 5: Panjer against Monte Carlo --------------------------------------------------------------

Outcome panjer_vs_monte_carlo() {
    ModelParams p = testing::reference_params(9, 2);
    for (auto& dp : p.death_prob) dp.alpha += 3.0;
    p.sigma2(1) = 0.05;
    p.sigma2(2) = 0.3;
    Portfolio pf;
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> age(1, 9), gender(0, 1), exposure(1, 5);
    for (int i = 0; i < 100; ++i) {
        pf.policies.push_back({CellIndex{age(rng), gender(rng) ? Gender::male : Gender::female}, exposure(rng), 1});
    }
    const double t = 25.0;
    const LossPMF pmf = portfolio_loss(pf, p, t);
    const LossMoments m = analytic_loss_moments(pf, p, t);
    const double mean_err = std::abs(pmf.mean() - m.mean) / m.mean;

    const std::uint64_t N = 1000000;
    Rng sim_rng = make_rng(77);
    const EmpiricalLoss emp = simulate_portfolio_loss(pf, p, t, sim_rng, N);
    const double dN = static_cast<double>(N);
    // pointwise binomial standard error at the Panjer probability, floored at one count
    std::size_t misses = 0, points = 0;
    double worst_z = 0.0;
    const std::size_t top = std::max(pmf.prob.size(), emp.counts.size());
    for (std::size_t n = 0; n < top; ++n) {
        const double pp = n < pmf.prob.size() ? pmf.prob[n] : 0.0;
        const double pe = emp.pmf(n);
        const double se = std::sqrt(std::max(pp, 1.0 / dN) * (1.0 - pp) / dN);
        const double zscore = std::abs(pe - pp) / se;
        worst_z = std::max(worst_z, zscore);
        if (zscore > 3.0) ++misses;
        ++points;
    }

    const double alpha = 0.99;
    const RiskMeasures exact = risk_measures(pmf, alpha);
    const RiskMeasures mc = risk_measures(emp.as_pmf(), alpha);
    // VaR: the Panjer cdf at the empirical quantile must bracket alpha up to 3 standard errors
    const double q_se = std::sqrt(alpha * (1.0 - alpha) / dN);
    double cdf_at = 0.0;
    for (std::int64_t n = 0; n <= mc.var && n < static_cast<std::int64_t>(pmf.prob.size()); ++n) cdf_at += pmf.prob[n];
    const double cdf_below = cdf_at - (mc.var < static_cast<std::int64_t>(pmf.prob.size()) ? pmf.prob[mc.var] : 0.0);
    const bool var_ok = cdf_at >= alpha - 3.0 * q_se && cdf_below < alpha + 3.0 * q_se;
    // ES: standard error of a tail mean over (1-alpha) N draws
    double tail_m = 0.0, tail_s = 0.0, tail_p = 0.0;
    for (std::size_t n = static_cast<std::size_t>(exact.var); n < pmf.prob.size(); ++n) {
        tail_m += static_cast<double>(n) * pmf.prob[n];
        tail_s += static_cast<double>(n * n) * pmf.prob[n];
        tail_p += pmf.prob[n];
    }
    const double tail_var = tail_s / tail_p - (tail_m / tail_p) * (tail_m / tail_p);
    const double es_se = std::sqrt(tail_var / ((1.0 - alpha) * dN));
    const bool es_ok = std::abs(mc.es - exact.es) <= 3.0 * es_se;

    const bool ok = misses == 0 && mean_err < 1e-8 && var_ok && es_ok && !pmf.truncated();
    return verdict(ok, std::to_string(misses) + "/" + std::to_string(points) + " points beyond 3 SE (max z " +
                           fmt(worst_z) + "), mean rel err " + fmt(mean_err) + ", VaR99 " +
                           std::to_string(exact.var) + " vs " + std::to_string(mc.var) + ", ES99 " + fmt(exact.es) +
                           " vs " + fmt(mc.es) + " (se " + fmt(es_se) + ")");
}

// --- 6: probability invariants ------------------------------------------------------------------

Outcome probability_invariants() {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    std::normal_distribution<double> z(0.0, 1.0);
    const ModelDims dims{9, 10};
    std::size_t bad_sum = 0, bad_q = 0, bad_trend = 0, bad_sym = 0;
    const int draws = 20000;
    std::vector<double> w(dims.n_causes_total());
    for (int i = 0; i < draws; ++i) {
        ModelParams p = ModelParams::zeros(dims);
        for (std::size_t c = 0; c < dims.n_cells(); ++c) {
            p.death_prob[c].alpha = -14.0 + 16.0 * U(rng);
            p.death_prob[c].beta = 0.05 * z(rng);
            p.death_prob[c].trend.zeta = 2.0 * z(rng);
            for (int k = 0; k <= dims.causes; ++k) {
                p.u(c, k) = 3.0 * z(rng);
                p.v(c, k) = 0.05 * z(rng);
            }
        }
        const double t = 1.0 + 99.0 * U(rng);
        const std::size_t cell = static_cast<std::size_t>(U(rng) * static_cast<double>(dims.n_cells()));
        cause_weights(cell, t, p, w);
        double sum = 0.0;
        for (double x : w) sum += x;
        if (!(std::abs(sum - 1.0) <= 1e-12)) ++bad_sum;
        const double q = death_probability(cell, t, p);
        if (!(q > 0.0 && q < 1.0)) ++bad_q;

        TrendReductionParams tr{4.0 * z(rng), 0.001 + 0.05 * U(rng)};
        const double t0 = -200.0 + 400.0 * U(rng), dt = 0.01 + 5.0 * U(rng);
        if (!(trend_reduction(tr, t0 + dt) > trend_reduction(tr, t0))) ++bad_trend;

        const double x = 30.0 * z(rng);
        if (!(std::abs(laplace_cdf(x) + laplace_cdf(-x) - 1.0) <= 1e-15)) ++bad_sym;
    }
    return verdict(bad_sum + bad_q + bad_trend + bad_sym == 0,
                   std::to_string(draws) + " draws; violations: weight sum " + std::to_string(bad_sum) +
                       ", q range " + std::to_string(bad_q) + ", trend monotone " + std::to_string(bad_trend) +
                       ", cdf symmetry " + std::to_string(bad_sym));
}

// --- 7: comparability arithmetic ----------------------------------------------------------------

Outcome comparability() {
    struct Case {
        std::int64_t n;
        double f;
        int year;
        std::int64_t want;
    };
    const std::vector<Case> cases{{100, 1.25, 1990, 125}, {50, 0.78, 1990, 39}, {25, 0.78, 1996, 20},
                                  {25, 0.78, 1997, 25},   {100, 1.25, 2011, 100}};
    int bad = 0;
    for (const auto& c : cases) {
        if (apply_comparability(c.n, c.f, c.year, 1996) != c.want) ++bad;
    }
    // the same rules through the raw-file loader
    const std::string dir = std::string(CRMORT_TEST_DATA) + "/ingest/";
    IngestConfig cfg;
    cfg.age_groups = 2;
    cfg.mapping = load_cause_mapping(dir + "mapping.json");
    const auto res = load_dataset(dir + "deaths.csv", dir + "population.csv", cfg);
    const std::size_t f1 = cell_offset(res.data.dims(), {1, Gender::female});
    if (res.data.deaths(f1, 1, 1) != 100) ++bad; // 80 x 1.25
    if (res.data.deaths(f1, 2, 1) != 16) ++bad;  // 20 x 0.78
    if (res.data.deaths(f1, 1, 3) != 88) ++bad;  // after the cutoff
    return verdict(bad == 0, std::to_string(bad) + " of 8 exact cases wrong");
}

// --- 8: data-conditional reproduction -----------------------------------------------------------

Outcome reproduction() {
    const char* deaths = env("CRMORT_DEATHS_CSV");
    const char* population = env("CRMORT_POPULATION_CSV");
    if (!deaths || !population) return {Status::skip, "set CRMORT_DEATHS_CSV and CRMORT_POPULATION_CSV to run"};
    const auto dir = testing::temp_dir("accept_reproduce");
    nlohmann::json data{{"deaths", fs::absolute(deaths).string()}, {"population", fs::absolute(population).string()}};
    if (const char* mapping = env("CRMORT_CAUSE_MAPPING")) data["cause_mapping"] = fs::absolute(mapping).string();
    const int base = env("CRMORT_BASE_YEAR") ? std::atoi(env("CRMORT_BASE_YEAR")) : 1987;
    const std::size_t steps = env("CRMORT_STEPS") ? std::stoul(env("CRMORT_STEPS")) : 35000;
    const nlohmann::json cfg{{"model", {{"age_groups", 9}, {"base_year", base}}},
                             {"data", data},
                             {"sampler", {{"n_steps", steps}, {"burn_in", steps / 7}, {"chains", 4}}},
                             {"forecast", {{"years", {2011}}, {"top", 0}}},
                             {"output_dir", "out"},
                             {"seed", 2011}};
    testing::spit(dir / "run.json", cfg.dump(2));
    const std::string conf = "--config " + (dir / "run.json").string() + " ";
    for (const char* cmd : {"ingest", "estimate", "forecast"}) {
        const int rc = testing::run_cli(conf + cmd);
        if (rc != 0) return {Status::fail, std::string(cmd) + " exited with " + std::to_string(rc)};
    }

    // forecast weights keyed by (cell, cause)
    std::map<std::pair<std::string, std::string>, double> got;
    std::map<std::string, std::string> leader;
    const auto fc = csv::read_file((dir / "out/forecast.csv").string());
    for (const auto& row : fc.rows) {
        const std::string& cell = row[fc.column("cell")];
        const std::string& cause = row[fc.column("cause")];
        got[{cell, cause}] = csv::parse_double(row[fc.column("mean")], "forecast mean");
        if (row[fc.column("rank")] == "1") leader[cell] = cause;
    }
    const auto ref = csv::read_file(std::string(CRMORT_TEST_DATA) + "/reference_2011.csv");
    int top_miss = 0, weight_miss = 0, checked = 0;
    double worst = 0.0;
    for (const auto& row : ref.rows) {
        const std::string& cell = row[0];
        const std::string& cause = row[2];
        const double want = csv::parse_double(row[3], "reference mean");
        if (row[1] == "1" && leader[cell] != cause) ++top_miss;
        const auto it = got.find({cell, cause});
        const double diff = it == got.end() ? 1.0 : std::abs(it->second - want);
        worst = std::max(worst, diff);
        if (diff > 0.02) ++weight_miss;
        ++checked;
    }
    return verdict(top_miss == 0 && weight_miss == 0,
                   std::to_string(top_miss) + "/18 leading causes differ, " + std::to_string(weight_miss) + "/" +
                       std::to_string(checked) + " weights off by more than 0.02 (max " + fmt(worst) +
                       "); outputs in " + (dir / "out").string());
}

// --- 9: end-to-end determinism ------------------------------------------------------------------

Outcome determinism() {
    const auto dir = testing::temp_dir("accept_determinism");
    save_params(testing::reference_params(3, 3), (dir / "truth.json").string());
    const nlohmann::json cfg{
        {"model", {{"base_year", 1987}}},
        {"simulate", {{"params", "truth.json"}, {"years", 12}, {"population", 500000}}},
        {"sampler", {{"n_steps", 3000}, {"burn_in", 1000}, {"chains", 4}}},
        {"forecast", {{"years", {2011, 2031}}}},
        {"seed", 9}};
    testing::spit(dir / "run.json", cfg.dump(2));
    const std::vector<std::pair<std::string, std::string>> runs{{"a", "1"}, {"b", "1"}, {"c", "4"}};
    for (const auto& [name, threads] : runs) {
        const std::string conf = "--config " + (dir / "run.json").string() + " --out " + (dir / name).string() +
                                 " --threads " + threads + " ";
        for (const char* cmd : {"simulate", "estimate", "forecast"}) {
            const int rc = testing::run_cli(conf + cmd);
            if (rc != 0) return {Status::fail, "run " + name + ": " + cmd + " exited with " + std::to_string(rc)};
        }
    }
    std::size_t files = 0;
    std::vector<std::string> differ;
    for (const auto& entry : fs::directory_iterator(dir / "a")) {
        const std::string fname = entry.path().filename().string();
        const std::string ref = testing::slurp(entry.path());
        for (const char* other : {"b", "c"}) {
            if (testing::slurp(dir / other / fname) != ref) differ.push_back(std::string(other) + "/" + fname);
        }
        ++files;
    }
    std::string detail = std::to_string(files) + " output files compared across 2 runs and thread counts 1/4";
    for (const auto& d : differ) detail += "; differs: " + d;
    return verdict(files >= 10 && differ.empty(), detail);
}

} // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
        {1, nb_oracle},          {2, quadrature_oracle},      {3, gauge_invariance},
        {4, parameter_recovery}, {5, panjer_vs_monte_carlo},  {6, probability_invariants},
        {7, comparability},      {8, reproduction},           {9, determinism}};
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

    bool blocking_failure = false;
    for (const auto& [id, run] : criteria) {
        if (!only.empty() && !only.count(id)) continue;
        Outcome out;
        try {
            out = run();
        } catch (const std::exception& e) {
            out = {Status::fail, std::string("exception: ") + e.what()};
        }
        const char* tag = out.status == Status::pass ? "PASS" : out.status == Status::skip ? "SKIP" : "FAIL";
        std::cout << "criterion " << id << ": " << tag << " - " << out.detail << std::endl;
        if (out.status == Status::fail && id != 8) blocking_failure = true;
    }
    return blocking_failure ? 1 : 0;
}
