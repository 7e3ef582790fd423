#include "retscreen/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "retscreen/error.hpp"

namespace retscreen::analytics {

std::string_view to_string(IcdrGrade grade) {
    switch (grade) {
        case IcdrGrade::NoDR: return "no_dr";
        case IcdrGrade::Mild: return "mild";
        case IcdrGrade::Moderate: return "moderate";
        case IcdrGrade::Severe: return "severe";
        case IcdrGrade::Proliferative: return "proliferative";
        case IcdrGrade::NotGradable: return "not_gradable";
    }
    return "?";
}

ScreeningLabel AiProposalRecord::study_category() const {
    bool ng = false;
    for (auto c : categories) {
        if (c == ScreeningLabel::ReferableDR) return c;
        ng = ng || c == ScreeningLabel::NonGradable;
    }
    return ng ? ScreeningLabel::NonGradable : ScreeningLabel::NonReferable;
}

int ScreeningEvent::year() const {
    if (timestamp.size() < 4) fail(ErrorKind::Parse, "malformed timestamp '" + timestamp + "'");
    return std::stoi(timestamp.substr(0, 4));
}

std::string ScreeningEvent::month() const {
    if (timestamp.size() < 7) fail(ErrorKind::Parse, "malformed timestamp '" + timestamp + "'");
    return timestamp.substr(0, 7);
}

bool Period::contains(const std::string& ts) const {
    if (from && ts < *from) return false;
    if (to && ts.substr(0, to->size()) > *to) return false;
    return true;
}

void paired_decisions(std::span<const ScreeningEvent> events, std::vector<int>& ai, std::vector<int>& human) {
    ai.clear();
    human.clear();
    for (const auto& e : events) {
        if (e.ai_proposal && e.gp_refer) {
            ai.push_back(e.ai_proposal->refer ? 1 : 0);
            human.push_back(*e.gp_refer ? 1 : 0);
        }
    }
}

AnnualSummary annual_summary(std::span<const ScreeningEvent> events, int year) {
    std::vector<ScreeningEvent> in_year;
    for (const auto& e : events) {
        if (e.year() == year) in_year.push_back(e);
    }
    require(!in_year.empty(), "no screening events in " + std::to_string(year));

    AnnualSummary s;
    s.year = year;
    s.n_studies = in_year.size();
    std::size_t gp_ref = 0, ai_ref = 0, ai_dr = 0, ai_ng = 0, exams = 0;
    for (const auto& e : in_year) {
        if (e.gp_refer) {
            ++s.n_with_gp;
            gp_ref += *e.gp_refer ? 1 : 0;
        }
        if (e.ai_proposal) {
            ++s.n_with_ai;
            const auto cat = e.ai_proposal->study_category();
            ai_ref += cat != ScreeningLabel::NonReferable ? 1 : 0;
            ai_dr += cat == ScreeningLabel::ReferableDR ? 1 : 0;
            ai_ng += cat == ScreeningLabel::NonGradable ? 1 : 0;
        }
        if (e.second_level && e.second_level->exam_appointed) ++exams;
    }
    auto rate = [](std::size_t num, std::size_t den) { return den ? static_cast<double>(num) / den : 0.0; };
    s.gp_referral_rate = rate(gp_ref, s.n_with_gp);
    s.ai_referral_rate = rate(ai_ref, s.n_with_ai);
    s.ai_dr_rate = rate(ai_dr, s.n_with_ai);
    s.ai_nongradable_rate = rate(ai_ng, s.n_with_ai);
    s.exam_rate = rate(exams, s.n_studies);

    std::vector<int> ai, human;
    paired_decisions(in_year, ai, human);
    if (!ai.empty()) s.kappa_gp_vs_ai = metrics::cohen_kappa(ai, human);
    return s;
}

std::vector<int> years_present(std::span<const ScreeningEvent> events) {
    std::set<int> years;
    for (const auto& e : events) years.insert(e.year());
    return {years.begin(), years.end()};
}

std::vector<GpRow> gp_table(std::span<const ScreeningEvent> events, const Period& period) {
    std::map<std::string, std::vector<const ScreeningEvent*>> by_gp;
    for (const auto& e : events) {
        if (e.gp_id && period.contains(e.timestamp)) by_gp[*e.gp_id].push_back(&e);
    }
    std::vector<GpRow> rows;
    for (const auto& [gp, list] : by_gp) {
        GpRow row;
        row.gp_id = gp;
        row.n_studies = list.size();
        std::vector<int> ai, human;
        std::size_t referred = 0, exams = 0;
        for (const auto* e : list) {
            referred += e->gp_refer.value_or(false) ? 1 : 0;
            exams += e->second_level && e->second_level->exam_appointed ? 1 : 0;
            if (e->ai_proposal && e->gp_refer) {
                ai.push_back(e->ai_proposal->refer ? 1 : 0);
                human.push_back(*e->gp_refer ? 1 : 0);
            }
        }
        row.n_paired = ai.size();
        if (!ai.empty()) {
            const auto stats = metrics::positive_negative_agreement(ai, human);
            row.pa = stats.pa;
            row.na = stats.na;
            row.kappa = stats.kappa;
        }
        row.referred_rate = static_cast<double>(referred) / static_cast<double>(row.n_studies);
        row.exam_rate = static_cast<double>(exams) / static_cast<double>(row.n_studies);
        rows.push_back(std::move(row));
    }
    return rows;
}

WorkloadCounterfactual workload_counterfactual(long long total, long long gp_referred, long long ai_referred) {
    require(total >= 0 && gp_referred >= 0 && ai_referred >= 0, "workload counts must be non-negative");
    if (ai_referred == 0) fail(ErrorKind::UndefinedRate, "workload counterfactual undefined with zero AI referrals");
    WorkloadCounterfactual w;
    w.total_studies = total;
    w.gp_referred = gp_referred;
    w.ai_referred = ai_referred;
    w.current_visualizations = total + gp_referred;
    w.autonomous_visualizations = ai_referred;
    w.reduction_factor = static_cast<double>(w.current_visualizations) / static_cast<double>(ai_referred);
    w.referral_inflation = gp_referred > 0 ? static_cast<double>(ai_referred) / static_cast<double>(gp_referred)
                                           : std::numeric_limits<double>::infinity();
    return w;
}

WorkloadCounterfactual workload_from_events(std::span<const ScreeningEvent> events, const Period& period) {
    long long total = 0, gp = 0, ai = 0;
    for (const auto& e : events) {
        if (!e.ai_proposal || !e.gp_refer || !period.contains(e.timestamp)) continue;
        ++total;
        gp += *e.gp_refer ? 1 : 0;
        ai += e.ai_proposal->refer ? 1 : 0;
    }
    return workload_counterfactual(total, gp, ai);
}

long long FalseNegativeTally::graded_total() const {
    long long t = 0;
    for (auto v : by_grade) t += v;
    return t;
}

FalseNegativeTally false_negative_breakdown(std::span<const ScreeningEvent> events, const Period& period) {
    FalseNegativeTally tally;
    for (const auto& e : events) {
        if (!period.contains(e.timestamp)) continue;
        if (!e.ai_proposal || e.ai_proposal->refer || !e.gp_refer.value_or(false)) continue;
        if (e.second_level && e.second_level->grade) {
            ++tally.by_grade[static_cast<std::size_t>(*e.second_level->grade)];
        } else {
            ++tally.ungraded;
        }
    }
    return tally;
}

std::vector<bool> drift_check(std::span<const double> series, double k, std::size_t min_history, std::size_t window) {
    std::vector<bool> flags(series.size(), false);
    for (std::size_t i = 0; i < series.size(); ++i) {
        const std::size_t start = i > window ? i - window : 0;
        const std::size_t count = i - start;
        if (count < min_history || count == 0) continue;
        double mean = 0.0;
        for (std::size_t j = start; j < i; ++j) mean += series[j];
        mean /= static_cast<double>(count);
        double var = 0.0;
        for (std::size_t j = start; j < i; ++j) var += (series[j] - mean) * (series[j] - mean);
        const double sd = count > 1 ? std::sqrt(var / static_cast<double>(count - 1)) : 0.0;
        flags[i] = std::abs(series[i] - mean) > k * sd;
    }
    return flags;
}

std::vector<MonthlyRates> monthly_ai_rates(std::span<const ScreeningEvent> events) {
    std::map<std::string, std::array<std::size_t, 3>> counts;  // n, referred, non-gradable
    for (const auto& e : events) {
        if (!e.ai_proposal) continue;
        auto& c = counts[e.month()];
        const auto cat = e.ai_proposal->study_category();
        c[0] += 1;
        c[1] += cat != ScreeningLabel::NonReferable ? 1 : 0;
        c[2] += cat == ScreeningLabel::NonGradable ? 1 : 0;
    }
    std::vector<MonthlyRates> out;
    for (const auto& [month, c] : counts) {
        out.push_back({month, c[0], static_cast<double>(c[1]) / c[0], static_cast<double>(c[2]) / c[0]});
    }
    return out;
}

std::vector<DriftRow> drift_report(std::span<const ScreeningEvent> events, double k, std::size_t min_history) {
    const auto months = monthly_ai_rates(events);
    std::vector<double> referral, nongradable;
    for (const auto& m : months) {
        referral.push_back(m.referral_rate);
        nongradable.push_back(m.nongradable_rate);
    }
    const auto rf = drift_check(referral, k, min_history);
    const auto nf = drift_check(nongradable, k, min_history);
    std::vector<DriftRow> rows;
    for (std::size_t i = 0; i < months.size(); ++i) rows.push_back({months[i], rf[i], nf[i]});
    return rows;
}

double median_difference(std::span<const double> a, std::span<const double> b) {
    require(a.size() == b.size() && !a.empty(), "median_difference needs equal, non-empty series");
    std::vector<double> diff(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
    return metrics::median(std::move(diff));
}

}  // namespace retscreen::analytics
