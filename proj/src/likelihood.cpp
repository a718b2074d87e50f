#include "crmort/likelihood.hpp"

#include <cmath>
#include <numeric>

#include "crmort/error.hpp"

namespace crmort {

namespace {

// Above this gamma shape lnG differences go through Stirling's series to avoid cancellation.
constexpr double kStirlingShape = 100.0;

// lnG(x) - [(x - 1/2) ln x - x + ln(2 pi)/2], valid for x >= ~10.
double stirling_correction(double x) {
    const double x2 = x * x;
    return (1.0 / 12.0 - (1.0 / 360.0 - (1.0 / 1260.0 - 1.0 / (1680.0 * x2)) / x2) / x2) / x;
}

double n_log_rho(std::int64_t n, double rho) {
    if (n == 0) return 0.0;
    if (rho <= 0.0) return kDegenerateLogLikelihood;
    return static_cast<double>(n) * std::log(rho);
}

} // namespace

double poisson_log_pmf(std::int64_t n, double rho) {
    if (n < 0 || !(rho >= 0.0)) throw ConfigError("poisson_log_pmf requires n >= 0 and rho >= 0");
    return n_log_rho(n, rho) - rho - std::lgamma(static_cast<double>(n) + 1.0);
}

double mixture_shape_part(std::int64_t n, double sigma2) {
    const double r = 1.0 / sigma2;
    const double nd = static_cast<double>(n);
    if (r >= kStirlingShape) {
        return (r + nd - 0.5) * std::log1p(nd / r) - nd + stirling_correction(r + nd) - stirling_correction(r);
    }
    return std::lgamma(r + nd) - std::lgamma(r);
}

double mixture_rate_part(std::int64_t n, double rho, double sigma2) {
    const double r = 1.0 / sigma2;
    const double nd = static_cast<double>(n);
    if (r >= kStirlingShape) return -(r + nd) * std::log1p(rho / r);
    return -r * std::log1p(sigma2 * rho) - nd * std::log(r + rho);
}

double gamma_mixture_term(std::int64_t n, double rho, double sigma2) {
    return mixture_shape_part(n, sigma2) + mixture_rate_part(n, rho, sigma2);
}

double mixed_poisson_log_pmf(std::int64_t n, double rho, double sigma2) {
    if (n < 0 || !(rho >= 0.0) || !(sigma2 > 0.0) || !std::isfinite(rho) || !std::isfinite(sigma2)) {
        throw ConfigError("mixed_poisson_log_pmf requires n >= 0, rho >= 0 and sigma2 > 0");
    }
    const double lr = n_log_rho(n, rho);
    if (lr == kDegenerateLogLikelihood) return lr;
    return gamma_mixture_term(n, rho, sigma2) + lr - std::lgamma(static_cast<double>(n) + 1.0);
}

double log_likelihood_year(const MortalityDataset& data, const ModelParams& params, int t) {
    const ModelDims& dims = data.dims();
    if (!(params.dims == dims)) throw ConfigError("parameter and dataset dimensions differ");
    const std::size_t nk = dims.n_causes_total();
    std::vector<double> rho_cell(dims.n_cells() * nk);
    std::vector<double> w(nk);
    for (std::size_t c = 0; c < dims.n_cells(); ++c) {
        const double m = static_cast<double>(data.population(c, t));
        const double q = death_probability(c, t, params);
        cause_weights(c, t, params, w);
        for (std::size_t k = 0; k < nk; ++k) rho_cell[c * nk + k] = m * q * w[k];
    }

    double total = 0.0;
    // idiosyncratic cause: independent Poisson per cell
    for (std::size_t c = 0; c < dims.n_cells(); ++c) {
        const std::int64_t n = data.deaths(c, 0, t);
        const double lr = n_log_rho(n, rho_cell[c * nk]);
        if (lr == kDegenerateLogLikelihood) return lr;
        total += lr - rho_cell[c * nk] - std::lgamma(static_cast<double>(n) + 1.0);
    }
    for (int k = 1; k <= dims.causes; ++k) {
        std::int64_t n_k = 0;
        double rho_k = 0.0;
        double cells = 0.0;
        for (std::size_t c = 0; c < dims.n_cells(); ++c) {
            const std::int64_t n = data.deaths(c, k, t);
            const double rho = rho_cell[c * nk + static_cast<std::size_t>(k)];
            const double lr = n_log_rho(n, rho);
            if (lr == kDegenerateLogLikelihood) return lr;
            cells += lr - std::lgamma(static_cast<double>(n) + 1.0);
            n_k += n;
            rho_k += rho;
        }
        total += gamma_mixture_term(n_k, rho_k, params.sigma2(k)) + cells;
    }
    return total;
}

double log_likelihood(const MortalityDataset& data, const ModelParams& params) {
    double total = 0.0;
    for (int t = 1; t <= data.years(); ++t) {
        const double year = log_likelihood_year(data, params, t);
        if (year == kDegenerateLogLikelihood) return year;
        total += year;
    }
    return total;
}

RiskFactorEstimate map_risk_factor(std::int64_t n_k, double rho_k, double sigma2_k) {
    if (n_k < 0 || !(rho_k >= 0.0) || !(sigma2_k > 0.0)) {
        throw ConfigError("map_risk_factor requires n >= 0, rho >= 0, sigma2 > 0");
    }
    const double r = 1.0 / sigma2_k;
    const double rate = r + rho_k;
    const double shape = r + static_cast<double>(n_k);
    return RiskFactorEstimate{std::max(0.0, (shape - 1.0) / rate), shape / rate};
}

ModelParams init_params_moment_matching(const MortalityDataset& data) {
    return init_params_moment_matching(data, ModelParams::zeros(data.dims()));
}

ModelParams init_params_moment_matching(const MortalityDataset& data, const ModelParams& constants) {
    const ModelDims& dims = data.dims();
    if (!(constants.dims == dims)) throw ConfigError("parameter and dataset dimensions differ");
    if (data.years() < 2) throw DataError("moment matching needs T >= 2 years of data");
    const int T = data.years();
    ModelParams p = constants;

    for (std::size_t c = 0; c < dims.n_cells(); ++c) {
        const std::string cell = cell_key(cell_at(dims, c));
        // weights: log cause fractions relative to cause 0, +0.5 smoothing
        double idio = 0.5;
        for (int t = 1; t <= T; ++t) idio += static_cast<double>(data.deaths(c, 0, t));
        for (int k = 0; k <= dims.causes; ++k) {
            double n = 0.5;
            for (int t = 1; t <= T; ++t) n += static_cast<double>(data.deaths(c, k, t));
            p.u(c, k) = std::log(n / idio);
            p.v(c, k) = 0.0;
        }

        // alpha, beta: least squares of inverse-Laplace crude rates on the trend
        std::vector<double> xs, ys;
        for (int t = 1; t <= T; ++t) {
            const double m = static_cast<double>(data.population(c, t));
            if (m <= 0.0) continue;
            const double rate = (static_cast<double>(data.total_deaths(c, t)) + 0.5) / (m + 1.0);
            xs.push_back(trend_reduction(p.death_prob[c].trend, t));
            ys.push_back(laplace_quantile(rate));
        }
        if (xs.empty()) throw DataError("cell " + cell + " has zero population in every year");
        const double n = static_cast<double>(xs.size());
        const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
        const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
        double sxx = 0.0, sxy = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            sxx += (xs[i] - mx) * (xs[i] - mx);
            sxy += (xs[i] - mx) * (ys[i] - my);
        }
        const double beta = sxx > 0.0 ? sxy / sxx : 0.0;
        p.death_prob[c].alpha = my - beta * mx;
        p.death_prob[c].beta = beta;
    }

    // sigma2: variance of observed/expected ratios (rescaled to mean one) minus the Poisson part
    const CauseAggregates agg = cause_aggregates(data, p);
    for (int k = 1; k <= dims.causes; ++k) {
        std::vector<double> ratio;
        double poisson = 0.0;
        for (int t = 1; t <= T; ++t) {
            const double rho = agg.rho(k, t);
            if (rho <= 0.0) continue;
            ratio.push_back(static_cast<double>(agg.n(k, t)) / rho);
            poisson += 1.0 / rho;
        }
        double s2 = kMomentSigma2Floor;
        if (ratio.size() >= 2) {
            const double cnt = static_cast<double>(ratio.size());
            const double mean = std::accumulate(ratio.begin(), ratio.end(), 0.0) / cnt;
            if (mean > 0.0) {
                double var = 0.0;
                for (double r : ratio) var += (r / mean - 1.0) * (r / mean - 1.0);
                var /= cnt - 1.0;
                s2 = std::max(kMomentSigma2Floor, var - poisson / cnt / mean);
            }
        }
        p.sigma2(k) = std::min(s2, 50.0);
    }
    p.validate();
    return p;
}

} // namespace crmort
