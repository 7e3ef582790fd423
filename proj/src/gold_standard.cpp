#include "retscreen/gold_standard.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "retscreen/error.hpp"

namespace retscreen::gold {

GroundTruthEye consensus_label(std::span<const ScreeningLabel> labels, std::string eye_id) {
    require(labels.size() == 3, "consensus needs exactly three labels");
    GroundTruthEye out;
    out.eye_id = std::move(eye_id);
    if (labels[0] == labels[1] || labels[0] == labels[2]) {
        out.consensus = labels[0];
    } else if (labels[1] == labels[2]) {
        out.consensus = labels[1];
    } else {
        out.discarded = true;
    }
    return out;
}

Task parse_task(int id) {
    if (id < 1 || id > 3) fail(ErrorKind::Precondition, "unknown task id " + std::to_string(id));
    return static_cast<Task>(id);
}

std::vector<BinaryPair> build_task_dataset(std::span<const EvaluatedEye> eyes, Task task, double t_prime) {
    const int id = static_cast<int>(task);
    if (id < 1 || id > 3) fail(ErrorKind::Precondition, "unknown task id " + std::to_string(id));
    std::vector<BinaryPair> pairs;
    for (const auto& eye : eyes) {
        if (eye.truth.discarded) continue;
        const auto consensus = eye.truth.consensus;
        const auto category = eye.system_output.category;
        BinaryPair pair{eye.truth.eye_id, 0, 0};
        switch (task) {
            case Task::Referable:
                pair.truth = consensus != ScreeningLabel::NonReferable;
                pair.prediction = eye.system_output.referral_score >= t_prime;
                break;
            case Task::ReferableDR:
                if (consensus == ScreeningLabel::NonGradable) continue;
                pair.truth = consensus == ScreeningLabel::ReferableDR;
                pair.prediction = category == ScreeningLabel::ReferableDR;
                break;
            case Task::NonGradable:
                pair.truth = consensus == ScreeningLabel::NonGradable;
                pair.prediction = category == ScreeningLabel::NonGradable;
                break;
        }
        pairs.push_back(std::move(pair));
    }
    return pairs;
}

metrics::ConfusionCounts leave_one_out_expert_eval(std::span<const LabeledEye> eyes, int expert_index,
                                                   double t_prime) {
    require(expert_index >= 0 && expert_index < 3, "expert index must be 0, 1 or 2");
    metrics::ConfusionCounts counts;
    for (const auto& eye : eyes) {
        bool others[2];
        int k = 0;
        for (int e = 0; e < 3; ++e) {
            if (e != expert_index) others[k++] = eye.labels[e] != ScreeningLabel::NonReferable;
        }
        const bool truth = others[0] == others[1] ? others[0] : eye.system_output.referral_score >= t_prime;
        counts.add(eye.labels[expert_index] != ScreeningLabel::NonReferable, truth);
    }
    return counts;
}

BinaryPair study_level_referral(std::span<const BinaryPair> eyes) {
    require(!eyes.empty() && eyes.size() <= 2, "a study has one or two eyes");
    BinaryPair out{eyes.front().eye_id, 0, 0};
    for (const auto& e : eyes) {
        out.prediction |= e.prediction;
        out.truth |= e.truth;
    }
    return out;
}

long long robust_ceil(double value) {
    const double tol = 1e-9 * std::max(1.0, std::abs(value));
    return static_cast<long long>(std::ceil(value - tol));
}

SampleSize sample_size_for_sensitivity(double s, double d, double z, double prevalence) {
    require(s > 0.0 && s < 1.0, "expected sensitivity must lie in (0,1)");
    require(d > 0.0 && d < 1.0, "half width must lie in (0,1)");
    require(z > 0.0, "z must be positive");
    require(prevalence > 0.0 && prevalence <= 1.0, "prevalence must lie in (0,1]");
    SampleSize out;
    out.positives_needed = z * z * s * (1.0 - s) / (d * d);
    out.total = robust_ceil(out.positives_needed / prevalence);
    return out;
}

long long adjust_for_prevalence(long long n1, double prev1, double prev2) {
    require(n1 >= 0, "sample size must be non-negative");
    require(prev1 > 0.0 && prev1 <= 1.0 && prev2 > 0.0 && prev2 <= 1.0, "prevalences must lie in (0,1]");
    return robust_ceil(static_cast<double>(n1) * prev1 / prev2);
}

namespace {

std::optional<metrics::BootstrapCI> rate_ci(const std::vector<BinaryPair>& pairs, bool positive_class,
                                            const metrics::BootstrapOptions& options) {
    const auto stat = [&](std::span<const std::size_t> idx) -> std::optional<double> {
        std::size_t hits = 0, total = 0;
        for (auto i : idx) {
            if ((pairs[i].truth != 0) != positive_class) continue;
            ++total;
            hits += (pairs[i].prediction != 0) == positive_class ? 1 : 0;
        }
        if (total == 0) return std::nullopt;
        return static_cast<double>(hits) / static_cast<double>(total);
    };
    if (pairs.empty()) return std::nullopt;
    std::vector<std::size_t> all(pairs.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    if (!stat(all)) return std::nullopt;
    return metrics::bootstrap_ci(pairs.size(), stat, options);
}

double task_score(const EyeProposal& p, Task task) {
    switch (task) {
        case Task::Referable: return p.referral_score;
        case Task::ReferableDR: return p.dr_score_transformed;
        case Task::NonGradable: return p.non_gradability_score_transformed;
    }
    return p.referral_score;
}

}  // namespace

GoldReport evaluate_gold(std::span<const LabeledEye> eyes, double t_prime, const metrics::BootstrapOptions& options) {
    GoldReport report;
    report.n_eyes = eyes.size();
    std::vector<EvaluatedEye> evaluated;
    for (const auto& eye : eyes) {
        auto truth = consensus_label(eye.labels, eye.eye_id);
        report.n_discarded += truth.discarded ? 1 : 0;
        evaluated.push_back({std::move(truth), eye.system_output});
    }
    for (int id = 1; id <= 3; ++id) {
        const Task task = static_cast<Task>(id);
        TaskReport tr;
        tr.task = task;
        const auto pairs = build_task_dataset(evaluated, task, t_prime);
        tr.n = pairs.size();
        std::vector<double> scores;
        std::vector<int> truths;
        for (const auto& p : pairs) {
            tr.counts.add(p.prediction != 0, p.truth != 0);
            tr.positives += p.truth != 0 ? 1 : 0;
        }
        for (const auto& e : evaluated) {
            if (e.truth.discarded) continue;
            if (task == Task::ReferableDR && e.truth.consensus == ScreeningLabel::NonGradable) continue;
            scores.push_back(task_score(e.system_output, task));
            truths.push_back(task == Task::Referable      ? e.truth.consensus != ScreeningLabel::NonReferable
                             : task == Task::ReferableDR ? e.truth.consensus == ScreeningLabel::ReferableDR
                                                          : e.truth.consensus == ScreeningLabel::NonGradable);
        }
        tr.sensitivity = rate_ci(pairs, true, options);
        tr.specificity = rate_ci(pairs, false, options);
        if (tr.positives > 0 && tr.positives < tr.n) tr.auc = metrics::auc_binary(scores, truths);
        report.tasks.push_back(std::move(tr));
    }
    for (int e = 0; e < 3; ++e) report.experts[e] = leave_one_out_expert_eval(eyes, e, t_prime);

    // Study-level referral: OR over the eyes sharing a study id.
    const auto task1 = build_task_dataset(evaluated, Task::Referable, t_prime);
    std::map<std::string, std::vector<BinaryPair>> by_study;
    std::map<std::string, std::string> study_of;
    for (const auto& eye : eyes) {
        if (eye.study_id) study_of[eye.eye_id] = *eye.study_id;
    }
    for (const auto& p : task1) {
        const auto it = study_of.find(p.eye_id);
        if (it != study_of.end()) by_study[it->second].push_back(p);
    }
    if (!by_study.empty()) {
        std::vector<BinaryPair> studies;
        for (auto& [id, pairs] : by_study) {
            if (pairs.size() > 2) fail(ErrorKind::Precondition, "study " + id + " has more than two eyes");
            auto s = study_level_referral(pairs);
            s.eye_id = id;
            studies.push_back(std::move(s));
        }
        report.study_sensitivity = rate_ci(studies, true, options);
        report.study_specificity = rate_ci(studies, false, options);
    }
    return report;
}

}  // namespace retscreen::gold
