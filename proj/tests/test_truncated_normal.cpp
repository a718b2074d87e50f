#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "crmort/error.hpp"
#include "crmort/truncated_normal.hpp"

using namespace crmort;
using Catch::Matchers::WithinAbs;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

double normal_log_density(double x) { return -0.5 * x * x - 0.5 * std::log(2.0 * std::numbers::pi); }
} // namespace

TEST_CASE("untruncated draws", "[truncnorm]") {
    Rng rng = make_rng(1);
    const int N = 1000000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < N; ++i) {
        const double x = truncated_normal_sample(0.0, 1.0, -kInf, kInf, rng);
        sum += x;
        sum2 += x * x;
    }
    CHECK(std::abs(sum / N) < 4.0 / std::sqrt(N));
    CHECK(std::abs(sum2 / N - 1.0) < 4.0 * std::sqrt(2.0 / N));
}

TEST_CASE("half-normal draws", "[truncnorm]") {
    Rng rng = make_rng(2);
    const int N = 1000000;
    double sum = 0.0;
    bool positive = true;
    for (int i = 0; i < N; ++i) {
        const double x = truncated_normal_sample(0.0, 1.0, 0.0, kInf, rng);
        positive = positive && x > 0.0;
        sum += x;
    }
    CHECK(positive);
    CHECK(std::abs(sum / N / std::sqrt(2.0 / std::numbers::pi) - 1.0) < 0.01);
}

TEST_CASE("draws respect tight and far-tail supports", "[truncnorm]") {
    Rng rng = make_rng(3);
    for (int i = 0; i < 10000; ++i) {
        const double a = truncated_normal_sample(0.0, 1.0, 40.0, 41.0, rng);
        CHECK((a > 40.0 && a < 41.0));
        const double b = truncated_normal_sample(5.0, 0.1, -kInf, 0.0, rng);
        CHECK(b < 0.0);
        const double c = truncated_normal_sample(1.0, 1e-9, 0.0, kInf, rng);
        CHECK(c > 0.0);
    }
    CHECK_THROWS_AS(truncated_normal_sample(0.0, 1.0, 1.0, 1.0, rng), ConfigError);
    CHECK_THROWS_AS(truncated_normal_sample(0.0, 1.0, 2.0, 1.0, rng), ConfigError);
    CHECK_THROWS_AS(truncated_normal_sample(0.0, 0.0, 0.0, 1.0, rng), ConfigError);
}

TEST_CASE("truncated normal log density", "[truncnorm]") {
    for (double x : {-3.0, -0.5, 0.0, 2.2}) {
        CHECK_THAT(truncated_normal_log_density(x, 0.0, 1.0, -kInf, kInf), WithinAbs(normal_log_density(x), 1e-15));
    }
    CHECK_THAT(truncated_normal_log_density(1.0, 0.0, 1.0, 0.0, kInf),
               WithinAbs(normal_log_density(1.0) + std::log(2.0), 1e-15));
    CHECK(truncated_normal_log_density(-1.0, 0.0, 1.0, 0.0, kInf) == -kInf);
    CHECK(truncated_normal_log_density(0.0, 0.0, 1.0, 0.0, kInf) == -kInf);

    struct Case {
        double mean, sd, lo, hi;
    };
    for (const Case& c : {Case{0.0, 1.0, -1.0, 2.0}, Case{3.0, 0.5, 0.0, 3.2}, Case{-2.0, 1.0, 0.0, 1.0},
                          Case{0.0, 1.0, 10.0, 12.0}, Case{0.3, 2.0, -0.5, 0.5}}) {
        auto f = [&](double x) { return std::exp(truncated_normal_log_density(x, c.mean, c.sd, c.lo, c.hi)); };
        const double mass = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, c.lo, c.hi, 20, 1e-14);
        CHECK_THAT(mass, WithinAbs(1.0, 1e-8));
    }
    auto half = [](double x) { return std::exp(truncated_normal_log_density(x, 0.4, 0.7, 0.0, kInf)); };
    boost::math::quadrature::tanh_sinh<double> ts;
    CHECK_THAT(ts.integrate(half, 0.0, kInf), WithinAbs(1.0, 1e-8));
}
