#include "crmort/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <unsupported/Eigen/FFT>

#include "crmort/error.hpp"
#include "crmort/likelihood.hpp"

namespace crmort {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::size_t kMinDraws = 100;

// Exactly constant across all chains; FFT round-off would otherwise leave a tiny variance.
bool constant(const std::vector<std::span<const double>>& chains) {
    const double first = chains.front().empty() ? 0.0 : chains.front()[0];
    for (const auto& c : chains) {
        for (double x : c) {
            if (x != first) return false;
        }
    }
    return true;
}

double mean_of(std::span<const double> x) {
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

// Biased autocovariances (divided by n) for lags 0..n-1.
std::vector<double> autocovariance(std::span<const double> x) {
    const std::size_t n = x.size();
    const double mu = mean_of(x);
    std::vector<std::complex<double>> padded(2 * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) padded[i] = x[i] - mu;
    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> spec;
    fft.fwd(spec, padded);
    for (auto& s : spec) s = std::norm(s);
    std::vector<std::complex<double>> back;
    fft.inv(back, spec);
    std::vector<double> acov(n);
    for (std::size_t i = 0; i < n; ++i) acov[i] = back[i].real() / static_cast<double>(n);
    return acov;
}

double pearson(std::span<const double> a, std::span<const double> b) {
    const double ma = mean_of(a), mb = mean_of(b);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa <= 0.0 || sbb <= 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

} // namespace

double lag1_autocorrelation(std::span<const double> x) {
    if (x.size() < 2) return kNaN;
    const double mu = mean_of(x);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        den += (x[i] - mu) * (x[i] - mu);
        if (i + 1 < x.size()) num += (x[i] - mu) * (x[i + 1] - mu);
    }
    if (den <= 0.0) return kNaN;
    return num / den;
}

double effective_sample_size(const std::vector<std::span<const double>>& chains) {
    if (chains.empty()) throw ConfigError("effective_sample_size needs at least one chain");
    const std::size_t n = chains.front().size();
    const std::size_t M = chains.size();
    if (n < 4) return kNaN;
    for (const auto& c : chains) {
        if (c.size() != n) throw ConfigError("chains must have equal length");
    }
    if (constant(chains)) return kNaN;

    std::vector<std::vector<double>> acov;
    std::vector<double> means;
    for (const auto& c : chains) {
        acov.push_back(autocovariance(c));
        means.push_back(mean_of(c));
    }
    const double nd = static_cast<double>(n);
    double W = 0.0;
    for (const auto& a : acov) W += a[0] * nd / (nd - 1.0);
    W /= static_cast<double>(M);
    double between = 0.0;
    if (M > 1) {
        const double grand = std::accumulate(means.begin(), means.end(), 0.0) / static_cast<double>(M);
        for (double m : means) between += (m - grand) * (m - grand);
        between /= static_cast<double>(M - 1);
    }
    const double var_plus = W * (nd - 1.0) / nd + between;
    if (!(var_plus > 0.0) || !std::isfinite(var_plus)) return kNaN;

    auto rho = [&](std::size_t lag) {
        double s = 0.0;
        for (const auto& a : acov) s += a[lag];
        return 1.0 - (W - s / static_cast<double>(M)) / var_plus;
    };

    // Geyer: sum pairs while positive, forcing them to be non-increasing.
    double tau = -1.0;
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
        double pair = rho(2 * k) + rho(2 * k + 1);
        if (pair <= 0.0) break;
        pair = std::min(pair, prev);
        prev = pair;
        tau += 2.0 * pair;
    }
    tau = std::max(tau, 1.0 / std::log10(static_cast<double>(M) * nd));
    return static_cast<double>(M) * nd / tau;
}

double split_rhat(const std::vector<std::span<const double>>& chains) {
    if (chains.empty()) throw ConfigError("split_rhat needs at least one chain");
    if (constant(chains)) return kNaN;
    std::vector<std::span<const double>> halves;
    for (const auto& c : chains) {
        const std::size_t h = c.size() / 2;
        if (h < 2) return kNaN;
        halves.push_back(c.subspan(0, h));
        halves.push_back(c.subspan(c.size() - h, h));
    }
    const double n = static_cast<double>(halves.front().size());
    const double M = static_cast<double>(halves.size());
    double W = 0.0, grand = 0.0;
    std::vector<double> means;
    for (const auto& h : halves) {
        const double mu = mean_of(h);
        double s = 0.0;
        for (double x : h) s += (x - mu) * (x - mu);
        W += s / (n - 1.0);
        means.push_back(mu);
        grand += mu;
    }
    W /= M;
    grand /= M;
    double B = 0.0;
    for (double mu : means) B += (mu - grand) * (mu - grand);
    B *= n / (M - 1.0);
    if (!(W > 0.0)) return kNaN;
    const double var_plus = (n - 1.0) / n * W + B / n;
    return std::sqrt(var_plus / W);
}

double ks_p_value(double d, std::size_t n) {
    const double sn = std::sqrt(static_cast<double>(n));
    const double lambda = (sn + 0.12 + 0.11 / sn) * d;
    if (lambda < 0.2) return 1.0;
    double sum = 0.0;
    for (int j = 1; j <= 100; ++j) {
        const double term = std::exp(-2.0 * j * j * lambda * lambda);
        sum += (j % 2 == 1 ? 2.0 : -2.0) * term;
        if (term < 1e-16) break;
    }
    return std::clamp(sum, 0.0, 1.0);
}

ValidationReport validation_checks(const MortalityDataset& data, const ModelParams& params) {
    const int T = data.years();
    const int K = data.dims().causes;
    const CauseAggregates agg = cause_aggregates(data, params);
    ValidationReport rep;
    rep.years = T;
    rep.map_series.assign(static_cast<std::size_t>(K), std::vector<double>(static_cast<std::size_t>(T)));
    for (int k = 1; k <= K; ++k) {
        for (int t = 1; t <= T; ++t) {
            rep.map_series[k - 1][t - 1] = map_risk_factor(agg.n(k, t), agg.rho(k, t), params.sigma2(k)).mode;
        }
    }

    const double band = 2.0 / std::sqrt(static_cast<double>(T));
    for (int k = 1; k <= K; ++k) {
        const double r = lag1_autocorrelation(rep.map_series[k - 1]);
        rep.serial.push_back({k, r, band, std::isfinite(r) && std::abs(r) > band});
    }

    if (T > 2) {
        const boost::math::students_t dist(static_cast<double>(T - 2));
        for (int a = 1; a <= K; ++a) {
            for (int b = a + 1; b <= K; ++b) {
                CrossCorrelationCheck c{a, b, pearson(rep.map_series[a - 1], rep.map_series[b - 1]), 0.0, 1.0, false};
                const double r2 = std::min(c.correlation * c.correlation, 1.0 - 1e-15);
                c.t_statistic = c.correlation * std::sqrt(static_cast<double>(T - 2) / (1.0 - r2));
                c.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(c.t_statistic)));
                c.reject = c.p_value < 0.05;
                rep.cross.push_back(c);
            }
        }
    }

    for (int k = 1; k <= K; ++k) {
        std::vector<double> x = rep.map_series[k - 1];
        std::sort(x.begin(), x.end());
        const double s2 = params.sigma2(k);
        const double shape = 1.0 / s2;
        const double n = static_cast<double>(x.size());
        double d = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double F = x[i] > 0.0 ? boost::math::gamma_p(shape, x[i] * shape) : 0.0;
            d = std::max({d, static_cast<double>(i + 1) / n - F, F - static_cast<double>(i) / n});
        }
        rep.gamma_fit.push_back({k, s2, d, ks_p_value(d, x.size())});
    }
    return rep;
}

DiagnosticsReport diagnose(const std::vector<PosteriorSamples>& chains) {
    if (chains.empty()) throw ConfigError("diagnostics need at least one chain");
    const std::size_t n = chains.front().n_draws();
    for (const auto& c : chains) {
        if (c.names != chains.front().names) throw ConfigError("chains have different parameter layouts");
        if (c.n_draws() < kMinDraws) throw ConfigError("diagnostics need at least 100 draws per chain");
        if (c.n_draws() != n) throw ConfigError("chains have different lengths");
    }
    DiagnosticsReport rep;
    rep.n_chains = chains.size();
    rep.n_draws = n;
    const std::size_t P = chains.front().n_coords();
    for (std::size_t j = 0; j < P; ++j) {
        std::vector<std::vector<double>> cols;
        for (const auto& c : chains) cols.push_back(c.column(j));
        std::vector<std::span<const double>> spans(cols.begin(), cols.end());

        ParamDiagnostics d;
        d.name = chains.front().names[j];
        double lag = 0.0;
        for (std::size_t c = 0; c < chains.size(); ++c) {
            if (j < chains[c].acceptance_rate.size()) d.acceptance_rate += chains[c].acceptance_rate[j];
            lag += lag1_autocorrelation(spans[c]);
        }
        d.acceptance_rate /= static_cast<double>(chains.size());
        d.lag1_autocorrelation = lag / static_cast<double>(chains.size());
        d.ess = effective_sample_size(spans);
        d.rhat = split_rhat(spans);
        d.degenerate = !std::isfinite(d.ess) || !std::isfinite(d.rhat);
        if (d.degenerate) {
            d.ess = kNaN;
            d.rhat = kNaN;
            d.lag1_autocorrelation = kNaN;
        }
        rep.params.push_back(d);
    }
    return rep;
}

DiagnosticsReport diagnose(const std::vector<PosteriorSamples>& chains, const MortalityDataset& data) {
    DiagnosticsReport rep = diagnose(chains);
    rep.validation = validation_checks(data, posterior_mean(pool_samples(chains)));
    rep.has_validation = true;
    return rep;
}

void to_json(nlohmann::json& j, const DiagnosticsReport& report) {
    j = nlohmann::json::object();
    j["n_chains"] = report.n_chains;
    j["n_draws"] = report.n_draws;
    auto num = [](double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); };
    nlohmann::json params = nlohmann::json::array();
    for (const auto& p : report.params) {
        params.push_back({{"name", p.name},
                          {"acceptance_rate", num(p.acceptance_rate)},
                          {"lag1_autocorrelation", num(p.lag1_autocorrelation)},
                          {"ess", num(p.ess)},
                          {"rhat", num(p.rhat)},
                          {"degenerate", p.degenerate}});
    }
    j["parameters"] = params;
    if (!report.has_validation) return;
    const auto& v = report.validation;
    nlohmann::json val;
    val["years"] = v.years;
    val["map_risk_factors"] = v.map_series;
    for (const auto& s : v.serial) {
        val["serial_correlation"].push_back(
            {{"cause", s.cause}, {"lag1", num(s.lag1)}, {"band", s.band}, {"significant", s.significant}});
    }
    val["cross_correlation"] = nlohmann::json::array();
    for (const auto& c : v.cross) {
        val["cross_correlation"].push_back({{"cause_a", c.cause_a},
                                            {"cause_b", c.cause_b},
                                            {"correlation", num(c.correlation)},
                                            {"t_statistic", num(c.t_statistic)},
                                            {"p_value", num(c.p_value)},
                                            {"reject_5pct", c.reject}});
    }
    for (const auto& g : v.gamma_fit) {
        val["gamma_ks"].push_back(
            {{"cause", g.cause}, {"sigma2", g.sigma2}, {"statistic", g.ks_statistic}, {"p_value", g.p_value}});
    }
    j["validation"] = val;
}

} // namespace crmort
