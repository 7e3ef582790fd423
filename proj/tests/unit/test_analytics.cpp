#include <doctest.h>

#include <random>

#include "retscreen/analytics.hpp"
#include "retscreen/cohort.hpp"
#include "retscreen/error.hpp"
#include "retscreen/metrics.hpp"

using namespace retscreen;
using namespace retscreen::analytics;

namespace {

constexpr auto NR = ScreeningLabel::NonReferable;
constexpr auto DR = ScreeningLabel::ReferableDR;
constexpr auto NG = ScreeningLabel::NonGradable;

ScreeningEvent event(const std::string& id, const std::string& ts, std::optional<ScreeningLabel> ai,
                     std::optional<bool> gp, bool exam = false, std::optional<IcdrGrade> grade = std::nullopt,
                     const std::string& gp_id = "GP01") {
    ScreeningEvent e;
    e.study_id = id;
    e.timestamp = ts;
    e.gp_id = gp_id;
    if (ai) e.ai_proposal = AiProposalRecord{*ai != NR, {*ai, NR}};
    e.gp_refer = gp;
    if (exam || grade) e.second_level = SecondLevel{exam, grade};
    return e;
}

}  // namespace

TEST_CASE("annual summary of four studies") {
    const std::vector<ScreeningEvent> events{
        event("a", "2021-01-10T09:00:00Z", DR, true, true),
        event("b", "2021-02-10T09:00:00Z", NG, false),
        event("c", "2021-03-10T09:00:00Z", NR, false),
        event("d", "2021-04-10T09:00:00Z", NR, false),
        event("x", "2022-04-10T09:00:00Z", NR, false),
    };
    const auto s = annual_summary(events, 2021);
    CHECK(s.n_studies == 4);
    CHECK(s.ai_referral_rate == 0.5);
    CHECK(s.ai_dr_rate == 0.25);
    CHECK(s.ai_nongradable_rate == 0.25);
    CHECK(s.gp_referral_rate == 0.25);
    CHECK(s.exam_rate == 0.25);
    CHECK(s.kappa_gp_vs_ai.has_value());
    CHECK_THROWS_AS(annual_summary(events, 2019), Error);
    CHECK(years_present(events) == std::vector<int>{2021, 2022});
}

TEST_CASE("identical decisions give kappa one; no AI leaves kappa absent") {
    const std::vector<ScreeningEvent> same{
        event("a", "2021-01-01T00:00:00Z", DR, true),
        event("b", "2021-01-02T00:00:00Z", NR, false),
    };
    CHECK(annual_summary(same, 2021).kappa_gp_vs_ai == 1.0);

    const std::vector<ScreeningEvent> pre{
        event("a", "2018-01-01T00:00:00Z", std::nullopt, true),
        event("b", "2018-01-02T00:00:00Z", std::nullopt, false),
    };
    const auto s = annual_summary(pre, 2018);
    CHECK_FALSE(s.kappa_gp_vs_ai.has_value());
    CHECK(s.gp_referral_rate == 0.5);
    CHECK(s.n_with_ai == 0);
}

TEST_CASE("AI category rates add up on generated logs") {
    cohort::CohortConfig cfg;
    cfg.n_studies = 3000;
    cfg.nongradable_rate = 0.1;
    cfg.ai_missing_rate = 0.05;
    const auto events = cohort::generate_cohort(cfg, 77).events();
    for (int y : years_present(events)) {
        const auto s = annual_summary(events, y);
        CHECK(s.ai_dr_rate + s.ai_nongradable_rate == doctest::Approx(s.ai_referral_rate).epsilon(1e-12));
        for (double r : {s.gp_referral_rate, s.ai_referral_rate, s.ai_dr_rate, s.ai_nongradable_rate, s.exam_rate}) {
            CHECK(r >= 0.0);
            CHECK(r <= 1.0);
        }
    }
}

TEST_CASE("GP table example") {
    const std::vector<ScreeningEvent> events{
        event("a", "2021-01-01T00:00:00Z", DR, true, true),
        event("b", "2021-01-02T00:00:00Z", DR, false),
        event("c", "2021-01-03T00:00:00Z", NR, false),
        event("d", "2021-01-04T00:00:00Z", NR, false),
        event("e", "2021-01-05T00:00:00Z", DR, true, false, std::nullopt, "GP02"),
        event("f", "2021-01-06T00:00:00Z", NR, false, false, std::nullopt, "GP02"),
    };
    const auto rows = gp_table(events);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].gp_id == "GP01");
    CHECK(rows[0].n_studies == 4);
    CHECK(rows[0].pa == 0.5);
    CHECK(rows[0].na == 1.0);
    CHECK(rows[0].referred_rate == 0.25);
    CHECK(rows[0].exam_rate == 0.25);
    CHECK(rows[1].pa == 1.0);
    CHECK(rows[1].na == 1.0);
    CHECK(rows[1].kappa == 1.0);

    const auto windowed = gp_table(events, Period{"2021-01-05", std::nullopt});
    REQUIRE(windowed.size() == 1);
    CHECK(windowed[0].gp_id == "GP02");
}

TEST_CASE("GP table reproduces the metrics module") {
    cohort::CohortConfig cfg;
    cfg.n_studies = 2000;
    cfg.gp_profiles = {{"A", 0.85, 0.9, 0.3, 1.0}, {"B", 0.95, 0.8, 0.0, 2.0}};
    const auto events = cohort::generate_cohort(cfg, 5).events();
    for (const auto& row : gp_table(events)) {
        std::vector<int> ai, human;
        for (const auto& e : events) {
            if (e.gp_id != row.gp_id || !e.ai_proposal || !e.gp_refer) continue;
            ai.push_back(e.ai_proposal->refer);
            human.push_back(*e.gp_refer);
        }
        const auto ref = metrics::positive_negative_agreement(ai, human);
        CHECK(row.n_paired == ai.size());
        CHECK(row.pa == ref.pa);
        CHECK(row.na == ref.na);
        CHECK(row.kappa == ref.kappa);
    }
}

TEST_CASE("a trusting GP agrees more often with referral proposals") {
    cohort::CohortConfig cfg;
    cfg.n_studies = 4000;
    cfg.gp_profiles = {{"TRUSTING", 0.8, 0.9, 0.9, 1.0}, {"SKEPTIC", 0.8, 0.9, 0.0, 1.0}};
    const auto rows = gp_table(cohort::generate_cohort(cfg, 21).events());
    REQUIRE(rows.size() == 2);
    const auto& skeptic = rows[0].gp_id == "SKEPTIC" ? rows[0] : rows[1];
    const auto& trusting = rows[0].gp_id == "TRUSTING" ? rows[0] : rows[1];
    REQUIRE(trusting.pa.has_value());
    REQUIRE(skeptic.pa.has_value());
    CHECK(*trusting.pa > *skeptic.pa);
}

TEST_CASE("workload counterfactual") {
    const auto w = workload_counterfactual(22962, 3357, 6165);
    CHECK(w.current_visualizations == 26319);
    CHECK(w.autonomous_visualizations == 6165);
    CHECK(w.reduction_factor == doctest::Approx(4.27).epsilon(0.01 / 4.27));
    CHECK(w.referral_inflation == doctest::Approx(1.84).epsilon(0.01 / 1.84));

    const auto small = workload_counterfactual(100, 10, 10);
    CHECK(small.reduction_factor == 11.0);
    CHECK(small.referral_inflation == 1.0);

    const auto all = workload_counterfactual(50, 7, 50);
    CHECK(all.reduction_factor == doctest::Approx(57.0 / 50.0));

    try {
        (void)workload_counterfactual(10, 1, 0);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::UndefinedRate);
    }
}

TEST_CASE("workload identities hold on random counts") {
    std::mt19937_64 gen(40);
    std::uniform_int_distribution<long long> total(1, 100000);
    for (int rep = 0; rep < 200; ++rep) {
        const long long t = total(gen);
        const long long g = std::uniform_int_distribution<long long>(1, t)(gen);
        const long long a = std::uniform_int_distribution<long long>(1, t)(gen);
        const auto w = workload_counterfactual(t, g, a);
        CHECK(w.current_visualizations == t + g);
        CHECK(w.autonomous_visualizations == a);
        CHECK(w.reduction_factor == static_cast<double>(t + g) / a);
        CHECK(w.referral_inflation == static_cast<double>(a) / g);
    }
}

TEST_CASE("false-negative tally") {
    std::vector<ScreeningEvent> events;
    const std::array<int, 6> counts{150, 12, 2, 1, 0, 29};
    int n = 0;
    for (std::size_t g = 0; g < counts.size(); ++g) {
        for (int i = 0; i < counts[g]; ++i) {
            events.push_back(event("fn" + std::to_string(n++), "2021-05-01T00:00:00Z", NR, true, true,
                                   static_cast<IcdrGrade>(g)));
        }
    }
    events.push_back(event("ungraded", "2021-05-01T00:00:00Z", NR, true));
    events.push_back(event("tp", "2021-05-01T00:00:00Z", DR, true, true, IcdrGrade::Moderate));
    events.push_back(event("tn", "2021-05-01T00:00:00Z", NR, false));
    const auto tally = false_negative_breakdown(events);
    for (std::size_t g = 0; g < counts.size(); ++g) CHECK(tally.by_grade[g] == counts[g]);
    CHECK(tally.ungraded == 1);
    CHECK(tally.graded_total() == 194);

    const std::vector<ScreeningEvent> none{event("tn", "2021-05-01T00:00:00Z", NR, false)};
    const auto zero = false_negative_breakdown(none);
    CHECK(zero.graded_total() == 0);
    CHECK(zero.ungraded == 0);
}

TEST_CASE("drift check") {
    const std::vector<double> flat(24, 0.2);
    for (bool f : drift_check(flat)) CHECK_FALSE(f);

    std::vector<double> series{0.15, 0.16, 0.14, 0.15, 0.16, 0.14, 0.15, 0.16, 0.14, 0.15, 0.16, 0.14, 0.35};
    const auto flags = drift_check(series);
    CHECK(flags.back());
    for (std::size_t i = 0; i + 1 < flags.size(); ++i) CHECK_FALSE(flags[i]);

    const std::vector<double> wild{0.0, 1.0, 0.5};
    const auto early = drift_check(wild);
    CHECK_FALSE(early[0]);
    CHECK_FALSE(early[1]);
}

TEST_CASE("drift report over monthly AI rates") {
    std::vector<ScreeningEvent> events;
    int n = 0;
    for (int m = 1; m <= 12; ++m) {
        for (int i = 0; i < 20; ++i) {
            char ts[32];
            std::snprintf(ts, sizeof ts, "2021-%02d-%02dT00:00:00Z", m, 1 + i);
            const bool ng = m == 12 ? i < 12 : i < 1 + (m % 2);
            events.push_back(event("s" + std::to_string(n++), ts, ng ? NG : NR, false));
        }
    }
    const auto rows = drift_report(events);
    REQUIRE(rows.size() == 12);
    CHECK(rows[0].rates.month == "2021-01");
    CHECK(rows.back().nongradable_flag);
    CHECK(rows.back().referral_flag);
    CHECK_FALSE(rows[5].nongradable_flag);
}

TEST_CASE("median difference") {
    const std::vector<double> a{0.3, 0.5, 0.4, 0.6, 0.2};
    const std::vector<double> b{0.1, 0.1, 0.1, 0.1, 0.1};
    CHECK(median_difference(a, b) == doctest::Approx(0.3));
    // symmetric set around a centre
    const std::vector<double> c{2.0 - 0.5, 2.0 + 0.5, 2.0 - 1.5, 2.0 + 1.5, 2.0};
    const std::vector<double> zero(5, 0.0);
    CHECK(median_difference(c, zero) == 2.0);
    CHECK_THROWS_AS(median_difference(a, std::vector<double>{1.0}), Error);
}

TEST_CASE("timestamps and periods") {
    const auto e = event("a", "2021-03-04T10:00:00Z", NR, false);
    CHECK(e.year() == 2021);
    CHECK(e.month() == "2021-03");
    Period p{"2021-03", "2021-03"};
    CHECK(p.contains("2021-03-31T23:59:59Z"));
    CHECK_FALSE(p.contains("2021-04-01T00:00:00Z"));
    CHECK(Period{}.contains("1999-01-01"));
}
