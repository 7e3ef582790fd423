#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "retscreen/error.hpp"
#include "retscreen/metrics.hpp"

using namespace retscreen;
using namespace retscreen::metrics;

namespace {

// Pairwise-count AUC oracle.
double pairwise_auc(const std::vector<double>& s, const std::vector<int>& y) {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!y[i]) continue;
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (y[j]) continue;
            den += 1.0;
            num += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
        }
    }
    return num / den;
}

std::vector<int> repeat(std::initializer_list<std::pair<int, int>> runs) {
    std::vector<int> v;
    for (auto [value, count] : runs) v.insert(v.end(), count, value);
    return v;
}

}  // namespace

TEST_CASE("sensitivity and specificity") {
    ConfusionCounts c{9, 2, 1, 8};
    const auto s = sensitivity_specificity(c);
    CHECK(s.sensitivity == doctest::Approx(0.9));
    CHECK(s.specificity == doctest::Approx(0.8));

    const auto perfect = sensitivity_specificity({5, 0, 0, 5});
    CHECK(perfect.sensitivity == 1.0);
    CHECK(perfect.specificity == 1.0);

    // all-positive predictor on mixed data
    const std::vector<int> pred{1, 1, 1, 1};
    const std::vector<int> truth{1, 0, 1, 0};
    const auto ap = sensitivity_specificity(confusion(pred, truth));
    CHECK(ap.sensitivity == 1.0);
    CHECK(ap.specificity == 0.0);

    try {
        (void)sensitivity_specificity({0, 3, 0, 3});
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::UndefinedRate);
    }
}

TEST_CASE("cohen kappa") {
    const std::vector<int> a{0, 1, 2, 1, 0};
    CHECK(cohen_kappa(a, a) == 1.0);

    // 2x2 table a=40 (1,1), b=10 (1,0), c=5 (0,1), d=45 (0,0)
    const auto ra = repeat({{1, 40}, {1, 10}, {0, 5}, {0, 45}});
    const auto rb = repeat({{1, 40}, {0, 10}, {1, 5}, {0, 45}});
    CHECK(cohen_kappa(ra, rb) == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(cohen_kappa(rb, ra) == doctest::Approx(0.7).epsilon(1e-12));

    const std::vector<int> constant(5, 1);
    CHECK(cohen_kappa(constant, constant) == 1.0);

    CHECK_THROWS_AS(cohen_kappa(std::vector<int>{1, 0}, std::vector<int>{1}), Error);
}

TEST_CASE("kappa of independent raters is near zero") {
    std::mt19937_64 gen(12);
    std::bernoulli_distribution coin(0.4);
    std::vector<int> a(20000), b(20000);
    for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = coin(gen);
        b[i] = coin(gen);
    }
    CHECK(std::abs(cohen_kappa(a, b)) < 0.03);
}

TEST_CASE("kappa is symmetric on random data") {
    std::mt19937_64 gen(13);
    std::uniform_int_distribution<int> cls(0, 2);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<int> a(30), b(30);
        for (std::size_t i = 0; i < a.size(); ++i) {
            a[i] = cls(gen);
            b[i] = cls(gen);
        }
        CHECK(cohen_kappa(a, b) == doctest::Approx(cohen_kappa(b, a)).epsilon(1e-12));
        CHECK(cohen_kappa(a, b) < 1.0);
    }
}

TEST_CASE("AUC hand cases") {
    CHECK(auc_binary(std::vector<double>{0.9, 0.8, 0.3, 0.2}, std::vector<int>{1, 1, 0, 0}) == 1.0);
    CHECK(auc_binary(std::vector<double>{0.9, 0.6, 0.4, 0.2}, std::vector<int>{1, 0, 1, 0}) == 0.75);
    CHECK(auc_binary(std::vector<double>{0.5, 0.5, 0.5, 0.5}, std::vector<int>{1, 0, 1, 0}) == 0.5);
    CHECK_THROWS_AS(auc_binary(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), Error);
}

TEST_CASE("AUC matches the pairwise oracle and is transform invariant") {
    std::mt19937_64 gen(14);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 100; ++rep) {
        std::vector<double> s(40);
        std::vector<int> y(40);
        for (std::size_t i = 0; i < s.size(); ++i) {
            y[i] = i % 2;
            s[i] = std::round((0.3 * y[i] + 0.7 * u(gen)) * 20) / 20;  // coarse grid creates ties
        }
        const double auc = auc_binary(s, y);
        CHECK(auc == doctest::Approx(pairwise_auc(s, y)).epsilon(1e-12));
        std::vector<double> t(s.size());
        for (std::size_t i = 0; i < s.size(); ++i) t[i] = oracle::transform(s[i], 0.1, 0.5);
        CHECK(auc_binary(t, y) == auc);
    }
}

TEST_CASE("weighted one-vs-rest AUC") {
    const std::vector<int> labels{0, 1, 2, 2, 1, 0, 2};
    std::vector<std::vector<double>> onehot;
    for (int l : labels) {
        std::vector<double> row(3, 0.0);
        row[l] = 1.0;
        onehot.push_back(row);
    }
    CHECK(weighted_ovr_auc(onehot, labels, 3) == 1.0);

    std::vector<std::vector<double>> uniform(labels.size(), std::vector<double>(3, 1.0 / 3));
    CHECK(weighted_ovr_auc(uniform, labels, 3) == 0.5);

    // two classes, column 1 holds p and column 0 holds 1 - p
    const std::vector<int> y2{1, 0, 1, 0, 0, 1};
    const std::vector<double> p{0.9, 0.6, 0.4, 0.2, 0.7, 0.55};
    std::vector<std::vector<double>> m;
    for (double v : p) m.push_back({1.0 - v, v});
    CHECK(weighted_ovr_auc(m, y2, 2) == doctest::Approx(auc_binary(p, y2)).epsilon(1e-12));

    CHECK_THROWS_AS(weighted_ovr_auc(onehot, labels, 4), Error);
}

TEST_CASE("positive and negative agreement") {
    const std::vector<int> ai{1, 1, 1, 1, 0, 0};
    const std::vector<int> human{1, 1, 1, 0, 0, 0};
    const auto s = positive_negative_agreement(ai, human);
    CHECK(s.pa == 0.75);
    CHECK(s.na == 1.0);
    REQUIRE(s.kappa.has_value());
    CHECK(*s.kappa == doctest::Approx(cohen_kappa(ai, human)));

    const auto same = positive_negative_agreement(ai, ai);
    CHECK(same.pa == 1.0);
    CHECK(same.na == 1.0);
    CHECK(same.kappa == 1.0);

    const std::vector<int> zeros(4, 0);
    const std::vector<int> mixed{1, 0, 1, 0};
    const auto none = positive_negative_agreement(zeros, mixed);
    CHECK_FALSE(none.pa.has_value());
    CHECK(none.na == 0.5);
}

TEST_CASE("bootstrap intervals") {
    BootstrapOptions opt;
    opt.resamples = 500;
    opt.seed = 3;

    const std::vector<double> data{0, 0, 1, 1};
    auto mean = [](const std::vector<double>& v) -> std::optional<double> {
        double s = 0.0;
        for (double x : v) s += x;
        return s / v.size();
    };
    const auto ci = bootstrap_ci(data, mean, opt);
    CHECK(ci.point == 0.5);
    CHECK(ci.lo <= 0.5);
    CHECK(ci.hi >= 0.5);
    CHECK(ci.lo >= 0.0);
    CHECK(ci.hi <= 1.0);

    const auto constant = bootstrap_ci(data, [](const std::vector<double>&) -> std::optional<double> { return 0.3; },
                                       opt);
    CHECK(constant.lo == 0.3);
    CHECK(constant.hi == 0.3);

    const auto again = bootstrap_ci(data, mean, opt);
    CHECK(again.lo == ci.lo);
    CHECK(again.hi == ci.hi);
}

TEST_CASE("bootstrap interval narrows with more data") {
    std::mt19937_64 gen(21);
    std::bernoulli_distribution hit(0.85);
    std::vector<int> small(100), large(200);
    for (auto& v : small) v = hit(gen);
    for (std::size_t i = 0; i < large.size(); ++i) large[i] = small[i % small.size()];
    auto rate = [](const std::vector<int>& v) -> std::optional<double> {
        double s = 0.0;
        for (int x : v) s += x;
        return s / v.size();
    };
    BootstrapOptions opt;
    opt.seed = 1;
    const auto a = bootstrap_ci(small, rate, opt);
    const auto b = bootstrap_ci(large, rate, opt);
    CHECK(b.hi - b.lo < a.hi - a.lo);
}

TEST_CASE("bootstrap redraws undefined resamples and gives up when mostly undefined") {
    // sensitivity over (pred, truth) units with a single positive: most resamples lack it
    std::vector<std::pair<int, int>> units(50, {0, 0});
    units[0] = {1, 1};
    auto sens = [](const std::vector<std::pair<int, int>>& v) -> std::optional<double> {
        int pos = 0, tp = 0;
        for (auto [p, t] : v) {
            pos += t;
            tp += p && t;
        }
        if (pos == 0) return std::nullopt;
        return static_cast<double>(tp) / pos;
    };
    BootstrapOptions opt;
    opt.resamples = 200;
    const auto ci = bootstrap_ci(units, sens, opt);
    CHECK(ci.lo == 1.0);

    // defined only when every unit is drawn: true on the full data, almost never on a resample
    std::vector<int> ids(30);
    std::iota(ids.begin(), ids.end(), 0);
    auto complete = [](const std::vector<int>& v) -> std::optional<double> {
        std::vector<int> sorted = v;
        std::sort(sorted.begin(), sorted.end());
        if (std::unique(sorted.begin(), sorted.end()) - sorted.begin() != static_cast<long>(v.size())) {
            return std::nullopt;
        }
        return 1.0;
    };
    try {
        (void)bootstrap_ci(ids, complete, opt);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::UndefinedRate);
    }
}

TEST_CASE("quantile and median") {
    CHECK(median({3.0, 1.0, 2.0}) == 2.0);
    CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
    CHECK(quantile({0.0, 10.0}, 0.25) == 2.5);
}

TEST_CASE("rates stay in the unit interval") {
    std::mt19937_64 gen(30);
    std::bernoulli_distribution coin(0.5);
    for (int rep = 0; rep < 100; ++rep) {
        std::vector<int> a(12), b(12);
        for (std::size_t i = 0; i < a.size(); ++i) {
            a[i] = coin(gen);
            b[i] = coin(gen);
        }
        const auto s = positive_negative_agreement(a, b);
        if (s.pa) CHECK((*s.pa >= 0.0 && *s.pa <= 1.0));
        if (s.na) CHECK((*s.na >= 0.0 && *s.na <= 1.0));
    }
}
