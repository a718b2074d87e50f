#include <catch_amalgamated.hpp>

#include <cmath>

#include <boost/math/distributions/poisson.hpp>

#include "crmort/error.hpp"
#include "crmort/likelihood.hpp"
#include "crmort/panjer.hpp"
#include "support.hpp"

using namespace crmort;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Portfolio mixed_portfolio() {
    Portfolio pf;
    pf.policies = {{CellIndex{1, Gender::female}, 3, 40},
                   {CellIndex{2, Gender::male}, 1, 25},
                   {CellIndex{3, Gender::male}, 5, 10},
                   {CellIndex{3, Gender::female}, 2, 60}};
    return pf;
}

ModelParams loss_params() {
    ModelParams p = testing::reference_params(3, 3);
    for (auto& dp : p.death_prob) dp.alpha += 4.0; // q of a few percent
    p.sigma2(1) = 0.05;
    p.sigma2(2) = 0.2;
    p.sigma2(3) = 0.01;
    return p;
}

} // namespace

TEST_CASE("sector severities", "[panjer]") {
    const Portfolio pf = mixed_portfolio();
    const ModelParams p = loss_params();
    double lambda = 0.0;
    for (int k = 0; k <= 3; ++k) {
        const SectorSeverity s = sector_severity(pf, p, k, 10.0);
        CHECK(s.cause == k);
        CHECK(s.severity[0] == 0.0);
        REQUIRE(s.severity.size() == 6);
        double mass = 0.0;
        for (double x : s.severity) mass += x;
        CHECK_THAT(mass, WithinAbs(1.0, 1e-14));
        CHECK(s.severity[4] == 0.0);
        lambda += s.lambda;
    }
    double expected = 0.0;
    for (const auto& pol : pf.policies) expected += static_cast<double>(pol.count) * death_probability(pol.cell, 10.0, p);
    CHECK_THAT(lambda, WithinRel(expected, 1e-13));
    CHECK_THROWS_AS(sector_severity(pf, p, 4, 10.0), ConfigError);

    const auto nb = negbin_from_mixture(3.0, 0.25);
    CHECK(nb.r == 4.0);
    CHECK_THAT(nb.p, WithinRel(0.75 / 1.75, 1e-15));
}

TEST_CASE("compound Poisson with unit severity is Poisson", "[panjer]") {
    const std::vector<double> unit{0.0, 1.0};
    for (double lambda : {0.3, 7.5, 2000.0}) {
        const std::size_t n_max = static_cast<std::size_t>(lambda + 60.0 * std::sqrt(lambda) + 50.0);
        const LossPMF pmf = compound_panjer(PoissonCounting{lambda}, unit, n_max);
        CHECK_FALSE(pmf.truncated());
        CHECK_THAT(pmf.mass(), WithinAbs(1.0, 1e-10));
        CHECK_THAT(pmf.mean(), WithinRel(lambda, 1e-10));
        boost::math::poisson_distribution<double> pois(lambda);
        for (std::size_t n = 0; n <= n_max; n += std::max<std::size_t>(1, n_max / 50)) {
            const double ref = boost::math::pdf(pois, static_cast<double>(n));
            if (ref > 1e-300) CHECK_THAT(pmf.prob[n], WithinRel(ref, 1e-9));
        }
    }
}

TEST_CASE("negative binomial sector matches the mixed Poisson pmf", "[panjer]") {
    const std::vector<double> unit{0.0, 1.0};
    for (double s2 : {0.01, 0.3, 2.0}) {
        for (double lambda : {0.5, 40.0}) {
            const LossPMF pmf = compound_panjer(negbin_from_mixture(lambda, s2), unit, 4000);
            for (std::size_t n = 0; n < 200; ++n) {
                const double ref = std::exp(mixed_poisson_log_pmf(static_cast<std::int64_t>(n), lambda, s2));
                if (ref > 1e-280) REQUIRE_THAT(pmf.prob[n], WithinRel(ref, 1e-12));
            }
        }
    }
    // vanishing variance collapses to Poisson
    const LossPMF nb = compound_panjer(negbin_from_mixture(12.0, 1e-10), unit, 200);
    const LossPMF po = compound_panjer(PoissonCounting{12.0}, unit, 200);
    for (std::size_t n = 0; n < 60; ++n) CHECK_THAT(nb.prob[n], WithinRel(po.prob[n], 1e-6));
}

TEST_CASE("compound distributions with general severity", "[panjer]") {
    const std::vector<double> sev{0.0, 0.5, 0.0, 0.3, 0.2};
    const double m1 = 0.5 + 0.9 + 0.8, m2 = 0.5 + 2.7 + 3.2;
    const LossPMF po = compound_panjer(PoissonCounting{4.0}, sev, 400);
    CHECK_THAT(po.mass(), WithinAbs(1.0, 1e-12));
    CHECK_THAT(po.mean(), WithinRel(4.0 * m1, 1e-10));
    CHECK_THAT(po.variance(), WithinRel(4.0 * m2, 1e-8));
    const auto nbc = negbin_from_mixture(4.0, 0.5);
    const LossPMF nb = compound_panjer(nbc, sev, 800);
    CHECK_THAT(nb.mean(), WithinRel(4.0 * m1, 1e-10));
    CHECK_THAT(nb.variance(), WithinRel(4.0 * m2 + 0.5 * 16.0 * m1 * m1, 1e-8));
    // P(S = 1) = P(N = 1) f_1
    CHECK_THAT(po.prob[1], WithinRel(4.0 * std::exp(-4.0) * 0.5, 1e-14));
    CHECK_THROWS_AS(compound_panjer(PoissonCounting{1.0}, {0.5, 0.5}, 10), ConfigError);
}

TEST_CASE("portfolio loss distribution", "[panjer]") {
    const Portfolio pf = mixed_portfolio();
    const ModelParams p = loss_params();
    const LossPMF pmf = portfolio_loss(pf, p, 10.0);
    CHECK_FALSE(pmf.truncated());
    CHECK_THAT(pmf.mass(), WithinAbs(1.0, 1e-10));
    const LossMoments m = analytic_loss_moments(pf, p, 10.0);
    CHECK_THAT(pmf.mean(), WithinRel(m.mean, 1e-8));
    CHECK_THAT(pmf.variance(), WithinRel(m.variance, 1e-6));

    const LossPMF swapped = portfolio_loss(pf, p, 10.0, pmf.n_max(), {3, 1, 2});
    REQUIRE(swapped.prob.size() == pmf.prob.size());
    for (std::size_t n = 0; n < pmf.prob.size(); ++n) CHECK_THAT(swapped.prob[n], WithinAbs(pmf.prob[n], 1e-12));
    CHECK_THROWS_AS(portfolio_loss(pf, p, 10.0, 0, {1, 1, 2}), ConfigError);
    CHECK_THROWS_AS(portfolio_loss(pf, p, 10.0, 0, {1, 2}), ConfigError);

    const LossPMF cut = portfolio_loss(pf, p, 10.0, 5);
    CHECK(cut.truncated());
    CHECK(cut.truncation_mass > kTruncationTolerance);
    CHECK_THROWS_AS(risk_measures(cut, 0.9999), TruncationError);

    CHECK_THROWS_AS(portfolio_loss(Portfolio{}, p, 10.0), DataError);
}

TEST_CASE("large portfolios do not underflow", "[panjer]") {
    Portfolio pf;
    pf.policies = {{CellIndex{3, Gender::male}, 1, 100000}};
    ModelParams p = loss_params();
    const LossPMF pmf = portfolio_loss(pf, p, 10.0);
    CHECK_THAT(pmf.mass(), WithinAbs(1.0, 1e-9));
    const LossMoments m = analytic_loss_moments(pf, p, 10.0);
    CHECK(m.mean > 1000.0);
    CHECK_THAT(pmf.mean(), WithinRel(m.mean, 1e-8));
}

TEST_CASE("value at risk and expected shortfall", "[panjer]") {
    LossPMF pmf;
    pmf.prob = {0.5, 0.3, 0.2};
    auto r = risk_measures(pmf, 0.5);
    CHECK(r.var == 0);
    CHECK_THAT(r.es, WithinAbs(1.4, 1e-14));
    r = risk_measures(pmf, 0.6);
    CHECK(r.var == 1);
    CHECK_THAT(r.es, WithinAbs(1.5, 1e-14));
    r = risk_measures(pmf, 0.9);
    CHECK(r.var == 2);
    CHECK_THAT(r.es, WithinAbs(2.0, 1e-12));
    CHECK_THROWS_AS(risk_measures(pmf, 1.0), ConfigError);
    CHECK_THROWS_AS(risk_measures(pmf, 0.0), ConfigError);
    CHECK_THROWS_AS(risk_measures(pmf, 1.5), ConfigError);

    const LossPMF loss = portfolio_loss(mixed_portfolio(), loss_params(), 10.0);
    double last_var = -1.0, last_es = -1.0;
    for (double a : {0.5, 0.9, 0.95, 0.99, 0.995, 0.999}) {
        const auto rm = risk_measures(loss, a);
        double cdf = 0.0;
        for (std::int64_t n = 0; n <= rm.var; ++n) cdf += loss.prob[n];
        CHECK(cdf >= a);
        CHECK(cdf - loss.prob[rm.var] < a);
        CHECK(rm.es >= static_cast<double>(rm.var));
        CHECK(static_cast<double>(rm.var) >= last_var);
        CHECK(rm.es >= last_es);
        last_var = static_cast<double>(rm.var);
        last_es = rm.es;
    }
}

TEST_CASE("portfolio CSV", "[panjer]") {
    const auto dir = testing::temp_dir("portfolio");
    testing::spit(dir / "a.csv", "cell,count,exposure_units\nf1,40,3\nm2,25,1\n");
    const Portfolio a = read_portfolio_csv((dir / "a.csv").string(), 1000.0, 2011);
    REQUIRE(a.policies.size() == 2);
    CHECK(a.policies[0].cell == CellIndex{1, Gender::female});
    CHECK(a.policies[0].count == 40);
    CHECK(a.policies[1].exposure == 1);
    CHECK(a.year == 2011);

    testing::spit(dir / "b.csv", "cell,exposure_amount\nm9,2500\nf3,3000\n");
    const Portfolio b = read_portfolio_csv((dir / "b.csv").string(), 1000.0, 2011);
    CHECK(b.policies[0].exposure == 3);
    CHECK(b.policies[1].exposure == 3);
    CHECK(b.policies[1].count == 1);

    testing::spit(dir / "c.csv", "cell,count\nm9,1\n");
    CHECK_THROWS_AS(read_portfolio_csv((dir / "c.csv").string(), 1000.0, 2011), DataError);
    testing::spit(dir / "d.csv", "cell,exposure_units\nx9,1\n");
    CHECK_THROWS_AS(read_portfolio_csv((dir / "d.csv").string(), 1000.0, 2011), DataError);
    testing::spit(dir / "e.csv", "cell,exposure_units\nm9,0\n");
    CHECK_THROWS_AS(read_portfolio_csv((dir / "e.csv").string(), 1000.0, 2011), DataError);
    CHECK_THROWS_AS(read_portfolio_csv((dir / "missing.csv").string(), 1000.0, 2011), IoError);

    testing::spit(dir / "out.csv", "");
    LossPMF pmf;
    pmf.prob = {0.75, 0.25};
    write_loss_csv(pmf, (dir / "out.csv").string());
    CHECK(testing::slurp(dir / "out.csv") == "loss_units,probability\n0,0.75\n1,0.25\n");
}
