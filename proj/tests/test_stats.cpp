#include <cmath>
#include <vector>

#include "doctest.h"
#include "ggr/rng.hpp"
#include "ggr/stats.hpp"

using namespace ggr;

// Reference values computed with mpmath at 30 digits.
TEST_CASE("regularized incomplete beta matches reference values") {
    struct Ref {
        double a, b, x, value;
    };
    const Ref refs[] = {
        {0.5, 0.5, 0.3, 0.36901011956554538},
        {2.0, 3.0, 0.5, 0.6875},
        {5.0, 1.5, 0.9, 0.77617213431621567},
        {0.5, 2.0, 0.0314, 0.26301863011201316},
        {10.0, 10.0, 0.5, 0.5},
        {2.0, 0.5, 0.22857142857142856, 0.021311641128756724},
        {8.0, 2.0, 0.95, 0.92878860380468739},
        {0.5, 4.5, 0.01, 0.23012500010786338},
    };
    for (const auto& r : refs)
        CHECK(stats::reg_inc_beta(r.a, r.b, r.x) == doctest::Approx(r.value).epsilon(1e-12));
    CHECK(stats::reg_inc_beta(2.0, 3.0, 0.0) == 0.0);
    CHECK(stats::reg_inc_beta(2.0, 3.0, 1.0) == 1.0);
}

TEST_CASE("regularized incomplete gamma matches reference values") {
    struct Ref {
        double a, x, value;
    };
    const Ref refs[] = {
        {0.5, 1.0, 0.84270079294971487},  {1.0, 2.0, 0.86466471676338731},
        {2.5, 0.5, 0.037434226752703631}, {5.0, 5.0, 0.55950671493478759},
        {0.5, 8.0, 0.99993665751633376},  {10.0, 3.0, 0.0011024881301154797},
        {3.0, 15.0, 0.99996069155181552}, {0.5, 0.02, 0.15851941887820605},
    };
    for (const auto& r : refs) {
        CHECK(stats::reg_lower_gamma(r.a, r.x) == doctest::Approx(r.value).epsilon(1e-12));
        CHECK(stats::reg_upper_gamma(r.a, r.x) == doctest::Approx(1.0 - r.value).epsilon(1e-10));
    }
}

TEST_CASE("upper-tail helpers match the frozen references") {
    // F(1,4) at 13.5 and chi2(1) at 2.0
    CHECK(stats::f_upper_tail(13.5, 1, 4) == doctest::Approx(0.021311641128756724).epsilon(1e-10));
    CHECK(stats::chi2_upper_tail(2.0, 1) == doctest::Approx(0.15729920705028513).epsilon(1e-10));
    CHECK(stats::f_upper_tail(0.0, 1, 4) == 1.0);
    CHECK(stats::chi2_upper_tail(0.0, 1) == 1.0);
}

TEST_CASE("percentile uses linear interpolation") {
    std::vector<double> v{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    CHECK(stats::percentile_sorted(v, 50.0) == doctest::Approx(5.5));
    CHECK(stats::percentile_sorted(v, 10.0) == doctest::Approx(1.9));
    CHECK(stats::percentile_sorted(v, 25.0) == doctest::Approx(3.25));
    CHECK(stats::percentile_sorted(v, 0.0) == 1.0);
    CHECK(stats::percentile_sorted(v, 100.0) == 10.0);
}

TEST_CASE("moments: constants and affine maps") {
    std::vector<double> c{4.2, 4.2, 4.2, 4.2};
    CHECK(stats::mean(c) == doctest::Approx(4.2));
    CHECK(stats::sd_population(c) == 0.0);
    CHECK(stats::skewness(c) == 0.0);
    CHECK(stats::excess_kurtosis(c) == 0.0);

    Rng rng(11);
    std::vector<double> x(500), y(500);
    for (size_t i = 0; i < x.size(); ++i) {
        x[i] = rng.normal();
        y[i] = 3.0 * x[i] - 7.0;
    }
    CHECK(stats::mean(y) == doctest::Approx(3.0 * stats::mean(x) - 7.0).epsilon(1e-12));
    CHECK(stats::sd_population(y) == doctest::Approx(3.0 * stats::sd_population(x)).epsilon(1e-12));
    CHECK(stats::skewness(y) == doctest::Approx(stats::skewness(x)).epsilon(1e-9));
    CHECK(stats::excess_kurtosis(y) == doctest::Approx(stats::excess_kurtosis(x)).epsilon(1e-9));
}

TEST_CASE("standard normal sample has near-zero skewness and excess kurtosis") {
    Rng rng(1234);
    std::vector<double> v(100000);
    for (double& x : v) x = rng.normal();
    CHECK(std::fabs(stats::excess_kurtosis(v)) < 0.1);
    CHECK(std::fabs(stats::skewness(v)) < 0.05);
}

TEST_CASE("rng determinism and uniformity basics") {
    Rng a(99), b(99);
    for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
    Rng c(7);
    double lo = 1.0, hi = 0.0, sum = 0.0;
    for (int i = 0; i < 20000; ++i) {
        const double u = c.uniform();
        lo = std::min(lo, u);
        hi = std::max(hi, u);
        sum += u;
    }
    CHECK(lo >= 0.0);
    CHECK(hi < 1.0);
    CHECK(sum / 20000.0 == doctest::Approx(0.5).epsilon(0.02));
    CHECK(Rng::mix(1, 2) != Rng::mix(2, 1));
}
