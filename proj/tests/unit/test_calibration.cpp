#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "retscreen/calibration.hpp"
#include "retscreen/error.hpp"

using namespace retscreen;
using namespace retscreen::calibration;

TEST_CASE("transform_score examples") {
    CHECK(transform_score(0.1, 0.1, 0.5) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(transform_score(0.0, 0.1, 0.5) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(transform_score(1.0, 0.1, 0.5) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(transform_score(0.55, 0.1, 0.5) - 0.75) < 1e-12);
    CHECK(std::abs(transform_score(0.05, 0.1, 0.5) - 0.25) < 1e-12);
}

TEST_CASE("transform_score rejects degenerate thresholds") {
    CHECK_THROWS_AS(transform_score(0.3, 0.0, 0.5), Error);
    CHECK_THROWS_AS(transform_score(0.3, 1.0, 0.5), Error);
}

TEST_CASE("transform_score preserves order and the decision") {
    std::mt19937_64 gen(17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 2000; ++i) {
        double p1 = u(gen), p2 = u(gen);
        if (p1 > p2) std::swap(p1, p2);
        const double t = 0.01 + 0.98 * u(gen);
        const double tp = 0.01 + 0.98 * u(gen);
        const double s1 = transform_score(p1, t, tp);
        const double s2 = transform_score(p2, t, tp);
        CHECK(s1 <= s2);
        CHECK((s1 >= tp) == (p1 >= t));
        CHECK(s1 >= 0.0);
        CHECK(s2 <= 2.0 * tp + 1e-12);
        CHECK(s1 == doctest::Approx(oracle::transform(p1, t, tp)).epsilon(1e-12));
    }
}

TEST_CASE("combine_referral_score takes the maximum") {
    CHECK(combine_referral_score(0.7, 0.2) == 0.7);
    CHECK(combine_referral_score(0.2, 0.8) == 0.8);
    CHECK(combine_referral_score(0.5, 0.5) == 0.5);
}

TEST_CASE("pool adjacent violators hand cases") {
    const std::vector<double> a{0, 1, 0};
    const auto fa = pool_adjacent_violators(a);
    REQUIRE(fa.size() == 3);
    CHECK(fa[0] == 0.0);
    CHECK(fa[1] == 0.5);
    CHECK(fa[2] == 0.5);

    const std::vector<double> b{0, 0, 1, 1};
    CHECK(pool_adjacent_violators(b) == b);

    const std::vector<double> c{1, 0};
    const auto fc = pool_adjacent_violators(c);
    CHECK(fc[0] == 0.5);
    CHECK(fc[1] == 0.5);
}

TEST_CASE("isotonic calibrator fitted values on sorted labels") {
    const std::vector<double> s{0.1, 0.2, 0.3};
    const std::vector<int> y{0, 1, 0};
    const auto cal = fit_isotonic_calibrator(s, y);
    REQUIRE(cal.knots.size() == 3);
    CHECK(cal.knots[0].value == 0.0);
    CHECK(cal.knots[1].value == 0.5);
    CHECK(cal.knots[2].value == 0.5);
    CHECK(cal(0.0) == 0.0);
    CHECK(cal(1.0) == 0.5);
    CHECK(cal(0.15) == doctest::Approx(0.25));
}

TEST_CASE("isotonic fit beats random monotone candidates") {
    std::mt19937_64 gen(5);
    std::uniform_int_distribution<int> bit(0, 1);
    for (std::size_t n = 1; n <= 8; ++n) {
        std::vector<double> y(n);
        for (auto& v : y) v = bit(gen);
        const auto fit = pool_adjacent_violators(y);
        for (std::size_t i = 1; i < n; ++i) CHECK(fit[i - 1] <= fit[i]);
        const double best = oracle::squared_error(fit, y);
        for (int k = 0; k < 200; ++k) {
            CHECK(best <= oracle::squared_error(oracle::random_monotone(n, gen), y) + 1e-12);
        }
    }
}

TEST_CASE("single-class labels are unfittable") {
    const std::vector<double> s{0.2, 0.4, 0.6};
    const std::vector<int> ones{1, 1, 1};
    try {
        (void)fit_beta_calibrator(s, ones);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Unfittable);
    }
    CHECK_THROWS_AS(fit_isotonic_calibrator(s, ones), Error);
}

TEST_CASE("beta calibration matches a grid-search likelihood oracle") {
    const std::vector<double> s{0.25, 0.25, 0.25, 0.25, 0.75, 0.75, 0.75, 0.75};
    const std::vector<int> y{0, 0, 0, 1, 1, 1, 1, 0};
    const auto cal = fit_beta_calibrator(s, y);
    CHECK(cal(0.25) >= 0.20);
    CHECK(cal(0.25) <= 0.30);
    CHECK(cal(0.75) >= 0.70);
    CHECK(cal(0.75) <= 0.80);

    const auto grid = oracle::beta_grid_search(s, y);
    CHECK(cal(0.25) == doctest::Approx(oracle::beta_map(grid, 0.25)).epsilon(0.02));
    CHECK(cal(0.75) == doctest::Approx(oracle::beta_map(grid, 0.75)).epsilon(0.02));
    // the Newton fit must be at least as likely as the best grid point
    CHECK(beta_log_likelihood(cal, s, y) >= grid.loglik - 1e-9);
}

TEST_CASE("beta calibration on already calibrated data does not hurt") {
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> u(0.001, 0.999);
    std::vector<double> s(5000);
    std::vector<int> y(5000);
    for (std::size_t i = 0; i < s.size(); ++i) {
        s[i] = u(gen);
        y[i] = u(gen) < s[i] ? 1 : 0;
    }
    const auto cal = fit_beta_calibrator(s, y);
    std::vector<double> after(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) after[i] = cal(s[i]);
    CHECK(calibration_report(after, y).ece <= calibration_report(s, y).ece + 0.01);
}

TEST_CASE("beta calibrator is monotone with non-negative shapes") {
    BetaCalibrator c{2.0, 0.5, -0.3};
    double prev = -1.0;
    for (int i = 0; i <= 1000; ++i) {
        const double v = c(i / 1000.0);
        CHECK(v >= prev);
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        prev = v;
    }
}

TEST_CASE("calibration report examples") {
    {
        const std::vector<double> s{0.0, 0.0, 1.0, 1.0};
        const std::vector<int> y{0, 0, 1, 1};
        const auto r = calibration_report(s, y, 10);
        CHECK(r.ece == 0.0);
        CHECK(r.mce == 0.0);
        CHECK(r.brier == 0.0);
    }
    {
        const std::vector<double> s{0.9, 0.9};
        const std::vector<int> y{0, 0};
        const auto r = calibration_report(s, y, 1);
        CHECK(r.ece == doctest::Approx(0.9));
        CHECK(r.mce == doctest::Approx(0.9));
        CHECK(r.brier == doctest::Approx(0.81));
    }
    CHECK_THROWS_AS(calibration_report(std::vector<double>{}, std::vector<int>{}, 10), Error);
}

TEST_CASE("calibration report: ece bounded by mce and equal to the oracle") {
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> s(200);
        std::vector<int> y(200);
        for (std::size_t i = 0; i < s.size(); ++i) {
            s[i] = u(gen);
            y[i] = u(gen) < s[i] * s[i] ? 1 : 0;
        }
        const auto r = calibration_report(s, y, 10);
        CHECK(r.ece <= r.mce + 1e-12);
        CHECK(r.ece == doctest::Approx(oracle::ece(s, y, 10)).epsilon(1e-9));
    }
}

TEST_CASE("select_threshold examples") {
    {
        const std::vector<double> s{0.1, 0.2, 0.6, 0.9};
        const std::vector<int> y{0, 0, 1, 1};
        const auto c = select_threshold(s, y);
        CHECK(c.threshold == doctest::Approx(0.4));
        CHECK(c.mean_recall == 1.0);
    }
    {
        const std::vector<double> s{0.3, 0.5, 0.4, 0.8};
        const std::vector<int> y{0, 0, 1, 1};
        const auto c = select_threshold(s, y);
        CHECK(c.threshold == doctest::Approx(0.35));
        CHECK(c.mean_recall == doctest::Approx(0.75));
        CHECK(c.sensitivity == 1.0);
    }
    CHECK_THROWS_AS(select_threshold(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), Error);
}

TEST_CASE("select_threshold is optimal over all midpoints") {
    std::mt19937_64 gen(23);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 30; ++rep) {
        std::vector<double> s(25);
        std::vector<int> y(25);
        for (std::size_t i = 0; i < s.size(); ++i) {
            y[i] = i % 3 == 0 ? 1 : 0;
            s[i] = 0.4 * y[i] + 0.6 * u(gen);
        }
        const auto chosen = select_threshold(s, y);
        std::vector<double> sorted = s;
        std::sort(sorted.begin(), sorted.end());
        double best = 0.0;
        for (std::size_t i = 1; i < sorted.size(); ++i) {
            if (sorted[i] == sorted[i - 1]) continue;
            const double t = 0.5 * (sorted[i] + sorted[i - 1]);
            int tp = 0, tn = 0, pos = 0, neg = 0;
            for (std::size_t k = 0; k < s.size(); ++k) {
                (y[k] ? pos : neg)++;
                if (y[k] && s[k] >= t) ++tp;
                if (!y[k] && s[k] < t) ++tn;
            }
            best = std::max(best, 0.5 * (static_cast<double>(tp) / pos + static_cast<double>(tn) / neg));
        }
        CHECK(chosen.mean_recall == doctest::Approx(best).epsilon(1e-12));
    }
}

TEST_CASE("calibrate dispatches over the variant") {
    CHECK(calibrate(IdentityCalibrator{}, 0.3) == 0.3);
    CHECK(calibrate(BetaCalibrator{1.0, 1.0, 0.0}, 0.3) == doctest::Approx(0.3));
    IsotonicCalibrator iso{{{0.2, 0.1}, {0.8, 0.9}}};
    CHECK(calibrate(iso, 0.5) == doctest::Approx(0.5));
}
