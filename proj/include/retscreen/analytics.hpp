#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "retscreen/metrics.hpp"
#include "retscreen/study.hpp"

namespace retscreen::analytics {

/// Second-level ICDR grade; NotGradable when the specialist could not grade.
enum class IcdrGrade { NoDR = 0, Mild = 1, Moderate = 2, Severe = 3, Proliferative = 4, NotGradable = 5 };

inline constexpr std::size_t kIcdrGradeCount = 6;
std::string_view to_string(IcdrGrade grade);

struct AiProposalRecord {
    bool refer = false;
    std::vector<ScreeningLabel> categories;  // one per eye

    /// ReferableDR > NonGradable > NonReferable over eyes.
    [[nodiscard]] ScreeningLabel study_category() const;
    bool operator==(const AiProposalRecord&) const = default;
};

struct SecondLevel {
    bool exam_appointed = false;
    std::optional<IcdrGrade> grade;
    bool operator==(const SecondLevel&) const = default;
};

/// One screened study as it appears in the health record.
struct ScreeningEvent {
    std::string study_id;
    std::string timestamp;  // ISO-8601, e.g. 2021-03-04T10:00:00Z
    std::optional<std::string> gp_id;
    std::optional<AiProposalRecord> ai_proposal;  // absent before deployment / when unavailable
    std::optional<bool> gp_refer;
    std::optional<SecondLevel> second_level;
    bool pressure_referral = false;

    [[nodiscard]] int year() const;
    [[nodiscard]] std::string month() const;  // "YYYY-MM"
    bool operator==(const ScreeningEvent&) const = default;
};

struct AnnualSummary {
    int year = 0;
    std::size_t n_studies = 0;
    std::size_t n_with_ai = 0;
    std::size_t n_with_gp = 0;
    double gp_referral_rate = 0.0;     // over studies with a GP decision
    double ai_referral_rate = 0.0;     // over studies with an AI proposal
    double ai_dr_rate = 0.0;
    double ai_nongradable_rate = 0.0;
    double exam_rate = 0.0;            // over all studies of the year
    std::optional<double> kappa_gp_vs_ai;  // over studies with both
};

/// Throws Precondition when the year has no events.
AnnualSummary annual_summary(std::span<const ScreeningEvent> events, int year);

std::vector<int> years_present(std::span<const ScreeningEvent> events);

struct Period {
    std::optional<std::string> from;  // inclusive, compared on the timestamp prefix
    std::optional<std::string> to;    // inclusive

    [[nodiscard]] bool contains(const std::string& timestamp) const;
};

struct GpRow {
    std::string gp_id;
    std::size_t n_studies = 0;
    std::size_t n_paired = 0;  // studies with both AI proposal and GP decision
    std::optional<double> pa;
    std::optional<double> na;
    std::optional<double> kappa;
    double referred_rate = 0.0;  // relative to all studies screened by the GP
    double exam_rate = 0.0;
};

/// Per-GP agreement rows sorted by gp_id. Events without gp_id are ignored.
std::vector<GpRow> gp_table(std::span<const ScreeningEvent> events, const Period& period = {});

struct WorkloadCounterfactual {
    long long total_studies = 0;
    long long gp_referred = 0;
    long long ai_referred = 0;
    long long current_visualizations = 0;     // every study once, referred ones twice
    long long autonomous_visualizations = 0;  // only AI-referred studies
    double reduction_factor = 0.0;
    double referral_inflation = 0.0;
};

WorkloadCounterfactual workload_counterfactual(long long total, long long gp_referred, long long ai_referred);

/// Counterfactual over studies that have both an AI proposal and a GP decision.
WorkloadCounterfactual workload_from_events(std::span<const ScreeningEvent> events, const Period& period = {});

struct FalseNegativeTally {
    std::array<long long, kIcdrGradeCount> by_grade{};
    long long ungraded = 0;  // false negatives without a second-level grade
    [[nodiscard]] long long graded_total() const;
};

/// Studies the AI did not propose to refer but the GP referred.
FalseNegativeTally false_negative_breakdown(std::span<const ScreeningEvent> events, const Period& period = {});

/// Flags element i when |x_i - mean| > k * std over the trailing window
/// (up to `window` previous values). Fewer than min_history previous values
/// never flag.
std::vector<bool> drift_check(std::span<const double> series, double k = 3.0, std::size_t min_history = 3,
                              std::size_t window = 12);

struct MonthlyRates {
    std::string month;
    std::size_t n_with_ai = 0;
    double referral_rate = 0.0;
    double nongradable_rate = 0.0;
};

std::vector<MonthlyRates> monthly_ai_rates(std::span<const ScreeningEvent> events);

struct DriftRow {
    MonthlyRates rates;
    bool referral_flag = false;
    bool nongradable_flag = false;
};

std::vector<DriftRow> drift_report(std::span<const ScreeningEvent> events, double k = 3.0,
                                   std::size_t min_history = 3);

/// Median of element-wise differences a_i - b_i.
double median_difference(std::span<const double> a, std::span<const double> b);

/// Paired (ai_refer, gp_refer) vectors over events having both.
void paired_decisions(std::span<const ScreeningEvent> events, std::vector<int>& ai, std::vector<int>& human);

}  // namespace retscreen::analytics
