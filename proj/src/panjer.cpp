#include "crmort/panjer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "crmort/csv.hpp"
#include "crmort/error.hpp"

namespace crmort {

namespace {

constexpr int kRescaleExponent = 500;
constexpr std::size_t kMaxRecursionLength = 50'000'000;

std::string sci(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", x);
    return buf;
}

void finish(LossPMF& pmf) {
    pmf.truncation_mass = std::max(0.0, 1.0 - pmf.mass());
    if (pmf.truncation_mass > kTruncationTolerance) {
        pmf.warning = "loss distribution truncated at " + std::to_string(pmf.n_max()) + " units with tail mass " +
                      sci(pmf.truncation_mass);
    }
}

} // namespace

void Portfolio::validate(const ModelDims& dims) const {
    if (policies.empty()) throw DataError("portfolio is empty");
    if (!(loss_unit > 0.0) || !std::isfinite(loss_unit)) throw ConfigError("loss_unit must be > 0");
    for (const auto& p : policies) {
        check_cell(dims, p.cell);
        if (p.exposure < 1) throw DataError("policy exposure must be >= 1 loss unit");
        if (p.count < 1) throw DataError("policy count must be >= 1");
    }
}

std::int64_t Portfolio::max_exposure() const {
    std::int64_t m = 0;
    for (const auto& p : policies) m = std::max(m, p.exposure);
    return m;
}

Portfolio read_portfolio_csv(const std::string& path, double loss_unit, int year) {
    const csv::Table table = csv::read_file(path);
    Portfolio pf;
    pf.loss_unit = loss_unit;
    pf.year = year;
    if (!(loss_unit > 0.0)) throw ConfigError("loss_unit must be > 0");
    const std::size_t cell_col = table.column("cell");
    const bool units = table.has_column("exposure_units");
    if (!units && !table.has_column("exposure_amount")) {
        throw DataError(path + ": needs an exposure_units or exposure_amount column");
    }
    const std::size_t exp_col = table.column(units ? "exposure_units" : "exposure_amount");
    const bool has_count = table.has_column("count");
    const std::size_t count_col = has_count ? table.column("count") : 0;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::string where = path + ":" + std::to_string(table.line_numbers[r]);
        Policy p;
        try {
            p.cell = parse_cell_key(csv::trim(row[cell_col]));
        } catch (const Error& e) {
            throw DataError(where + ": " + e.what());
        }
        if (units) {
            p.exposure = csv::parse_int(row[exp_col], where);
        } else {
            const double amount = csv::parse_double(row[exp_col], where);
            if (!(amount > 0.0)) throw DataError(where + ": exposure_amount must be > 0");
            const double u = amount / loss_unit;
            p.exposure = static_cast<std::int64_t>(std::ceil(u - 1e-9 * std::max(1.0, u)));
        }
        p.count = has_count ? csv::parse_int(row[count_col], where) : 1;
        if (p.exposure < 1 || p.count < 1) throw DataError(where + ": exposure and count must be >= 1");
        pf.policies.push_back(p);
    }
    if (pf.policies.empty()) throw DataError(path + ": portfolio is empty");
    return pf;
}

SectorSeverity sector_severity(const Portfolio& portfolio, const ModelParams& params, CauseId k, double t) {
    const ModelDims& dims = params.dims;
    if (k < 0 || k > dims.causes) throw ConfigError("cause index out of range");
    SectorSeverity s;
    s.cause = k;
    s.severity.assign(static_cast<std::size_t>(portfolio.max_exposure()) + 1, 0.0);
    std::vector<double> w(dims.n_causes_total());
    for (const auto& p : portfolio.policies) {
        const std::size_t c = cell_offset(dims, p.cell);
        cause_weights(c, t, params, w);
        const double intensity = static_cast<double>(p.count) * death_probability(c, t, params) * w[k];
        s.severity[static_cast<std::size_t>(p.exposure)] += intensity;
        s.lambda += intensity;
    }
    if (s.lambda > 0.0) {
        for (double& x : s.severity) x /= s.lambda;
    }
    return s;
}

NegBinCounting negbin_from_mixture(double lambda, double sigma2) {
    if (!(lambda >= 0.0) || !(sigma2 > 0.0)) throw ConfigError("negative binomial needs lambda >= 0 and sigma2 > 0");
    return NegBinCounting{1.0 / sigma2, sigma2 * lambda / (1.0 + sigma2 * lambda)};
}

double LossPMF::mass() const { return std::accumulate(prob.begin(), prob.end(), 0.0); }

double LossPMF::mean() const {
    double m = 0.0;
    for (std::size_t n = 1; n < prob.size(); ++n) m += static_cast<double>(n) * prob[n];
    return m;
}

double LossPMF::variance() const {
    const double mu = mean();
    double v = 0.0;
    for (std::size_t n = 0; n < prob.size(); ++n) v += (static_cast<double>(n) - mu) * (static_cast<double>(n) - mu) * prob[n];
    return v;
}

LossPMF compound_panjer(const Counting& counting, const std::vector<double>& severity, std::size_t n_max) {
    if (severity.empty() || severity[0] != 0.0) throw ConfigError("severity must put zero mass on loss 0");
    double a = 0.0, b = 0.0, logf0 = 0.0;
    if (const auto* pc = std::get_if<PoissonCounting>(&counting)) {
        if (!(pc->lambda >= 0.0) || !std::isfinite(pc->lambda)) throw ConfigError("Poisson lambda must be >= 0");
        b = pc->lambda;
        logf0 = -pc->lambda;
    } else {
        const auto& nb = std::get<NegBinCounting>(counting);
        if (!(nb.r > 0.0) || !(nb.p >= 0.0 && nb.p < 1.0)) throw ConfigError("negative binomial needs r > 0, 0 <= p < 1");
        a = nb.p;
        b = (nb.r - 1.0) * nb.p;
        logf0 = nb.r * std::log1p(-nb.p);
    }

    LossPMF out;
    out.prob.assign(n_max + 1, 0.0);
    std::vector<double>& f = out.prob;
    // true value = f[n] * 2^scale
    int scale = static_cast<int>(std::floor(logf0 / std::log(2.0)));
    f[0] = std::exp(logf0 - scale * std::log(2.0));
    const std::size_t J = severity.size() - 1;
    for (std::size_t n = 1; n <= n_max; ++n) {
        const double nd = static_cast<double>(n);
        double s = 0.0;
        for (std::size_t j = 1; j <= std::min(n, J); ++j) {
            if (severity[j] == 0.0) continue;
            s += (a + b * static_cast<double>(j) / nd) * severity[j] * f[n - j];
        }
        f[n] = s;
        if (s > std::ldexp(1.0, kRescaleExponent)) {
            for (std::size_t i = 0; i <= n; ++i) f[i] = std::ldexp(f[i], -kRescaleExponent);
            scale += kRescaleExponent;
        }
    }
    for (double& x : f) x = std::ldexp(x, scale);
    finish(out);
    return out;
}

LossPMF convolve(const LossPMF& a, const LossPMF& b, std::size_t n_max) {
    LossPMF out;
    out.prob.assign(n_max + 1, 0.0);
    for (std::size_t i = 0; i < a.prob.size() && i <= n_max; ++i) {
        if (a.prob[i] == 0.0) continue;
        const std::size_t lim = std::min(b.prob.size() - 1, n_max - i);
        for (std::size_t j = 0; j <= lim; ++j) out.prob[i + j] += a.prob[i] * b.prob[j];
    }
    finish(out);
    return out;
}

LossMoments analytic_loss_moments(const Portfolio& portfolio, const ModelParams& params, double t) {
    LossMoments m;
    for (int k = 0; k <= params.dims.causes; ++k) {
        const SectorSeverity s = sector_severity(portfolio, params, k, t);
        double m1 = 0.0, m2 = 0.0;
        for (std::size_t j = 1; j < s.severity.size(); ++j) {
            m1 += static_cast<double>(j) * s.severity[j];
            m2 += static_cast<double>(j * j) * s.severity[j];
        }
        m.mean += s.lambda * m1;
        m.variance += s.lambda * m2;
        if (k > 0) m.variance += params.sigma2(k) * (s.lambda * m1) * (s.lambda * m1);
    }
    return m;
}

std::size_t default_n_max(const Portfolio& portfolio, const ModelParams& params, double t) {
    const LossMoments m = analytic_loss_moments(portfolio, params, t);
    const double n = std::ceil(m.mean + 40.0 * std::sqrt(m.variance)) + static_cast<double>(portfolio.max_exposure());
    if (!(n < static_cast<double>(kMaxRecursionLength))) {
        throw ConfigError("portfolio needs a recursion longer than " + std::to_string(kMaxRecursionLength) +
                          " units; use a coarser loss_unit");
    }
    return static_cast<std::size_t>(n);
}

LossPMF portfolio_loss(const Portfolio& portfolio, const ModelParams& params, double t, std::size_t n_max,
                       const std::vector<CauseId>& order) {
    portfolio.validate(params.dims);
    if (n_max == 0) n_max = default_n_max(portfolio, params, t);
    std::vector<CauseId> causes = order;
    if (causes.empty()) {
        for (int k = 1; k <= params.dims.causes; ++k) causes.push_back(k);
    }
    std::vector<CauseId> check = causes;
    std::sort(check.begin(), check.end());
    for (std::size_t i = 0; i < check.size(); ++i) {
        if (check[i] != static_cast<CauseId>(i) + 1 || static_cast<int>(check.size()) != params.dims.causes) {
            throw ConfigError("sector order must be a permutation of 1..K");
        }
    }

    LossPMF total;
    total.prob.assign(n_max + 1, 0.0);
    total.prob[0] = 1.0;
    const SectorSeverity idio = sector_severity(portfolio, params, 0, t);
    if (!idio.empty()) total = compound_panjer(PoissonCounting{idio.lambda}, idio.severity, n_max);
    std::string warning = total.warning;
    for (CauseId k : causes) {
        const SectorSeverity s = sector_severity(portfolio, params, k, t);
        if (s.empty()) continue;
        const LossPMF sector = compound_panjer(negbin_from_mixture(s.lambda, params.sigma2(k)), s.severity, n_max);
        if (warning.empty() && sector.truncated()) warning = sector.warning;
        total = convolve(total, sector, n_max);
    }
    if (total.warning.empty() && !warning.empty()) total.warning = warning;
    return total;
}

RiskMeasures risk_measures(const LossPMF& pmf, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("risk measure level must lie in (0,1)");
    if (pmf.prob.empty()) throw ConfigError("empty loss distribution");
    double cdf = 0.0;
    std::size_t var = pmf.n_max();
    bool found = false;
    for (std::size_t n = 0; n < pmf.prob.size(); ++n) {
        cdf += pmf.prob[n];
        if (cdf >= alpha) {
            var = n;
            found = true;
            break;
        }
    }
    if (!found) throw TruncationError("loss distribution does not reach the requested level " + sci(alpha));
    double tail = 0.0;
    for (std::size_t n = pmf.prob.size(); n-- > var + 1;) tail += static_cast<double>(n) * pmf.prob[n];
    const double es = (tail + static_cast<double>(var) * (cdf - alpha)) / (1.0 - alpha);
    return RiskMeasures{alpha, static_cast<std::int64_t>(var), std::max(es, static_cast<double>(var))};
}

void write_loss_csv(const LossPMF& pmf, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << "loss_units,probability\n";
    for (std::size_t n = 0; n < pmf.prob.size(); ++n) out << n << ',' << csv::format_double(pmf.prob[n]) << '\n';
}

} // namespace crmort
