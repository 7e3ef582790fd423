#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "retscreen/metrics.hpp"
#include "retscreen/study.hpp"

namespace retscreen::gold {

/// An eye labelled independently by three experts, with the system output.
struct LabeledEye {
    std::string eye_id;
    std::optional<std::string> study_id;
    std::array<ScreeningLabel, 3> labels{};
    EyeProposal system_output;
};

struct GroundTruthEye {
    std::string eye_id;
    ScreeningLabel consensus = ScreeningLabel::NonReferable;
    bool discarded = false;  // all three labels distinct
};

/// Majority of three; discarded when all three differ.
GroundTruthEye consensus_label(std::span<const ScreeningLabel> labels, std::string eye_id = {});

enum class Task {
    Referable = 1,       // referable for any reason
    ReferableDR = 2,     // more than mild DR; non-gradable consensus excluded
    NonGradable = 3,     // not gradable for screening
};

Task parse_task(int id);

struct BinaryPair {
    std::string eye_id;
    int prediction = 0;
    int truth = 0;
};

struct EvaluatedEye {
    GroundTruthEye truth;
    EyeProposal system_output;
};

/// Binarises consensus and system output for one task. Discarded eyes are
/// skipped. Task 1 uses referral_score >= t'; tasks 2 and 3 use the category.
std::vector<BinaryPair> build_task_dataset(std::span<const EvaluatedEye> eyes, Task task,
                                           double decision_boundary = 0.5);

/// Scores expert `expert_index` against the other two: their binary referral
/// verdict when they agree, otherwise the system's referral.
metrics::ConfusionCounts leave_one_out_expert_eval(std::span<const LabeledEye> eyes, int expert_index,
                                                   double decision_boundary = 0.5);

/// OR over the eyes of one study, separately for truth and prediction.
BinaryPair study_level_referral(std::span<const BinaryPair> eyes);

/// Normal-approximation sample size to estimate sensitivity S within +-d:
/// positives = z^2 S (1 - S) / d^2, total = ceil(positives / prevalence).
struct SampleSize {
    double positives_needed = 0.0;
    long long total = 0;
};

SampleSize sample_size_for_sensitivity(double expected_sensitivity, double half_width, double z, double prevalence);

/// Size of a re-sampled set with prevalence prev2 holding the same expected
/// positive count: ceil(n1 * prev1 / prev2).
long long adjust_for_prevalence(long long n1, double prev1, double prev2);

struct TaskReport {
    Task task = Task::Referable;
    std::size_t n = 0;
    std::size_t positives = 0;
    metrics::ConfusionCounts counts;
    std::optional<metrics::BootstrapCI> sensitivity;  // absent when undefined on the data
    std::optional<metrics::BootstrapCI> specificity;
    std::optional<double> auc;  // on the task's continuous score
};

struct GoldReport {
    std::size_t n_eyes = 0;
    std::size_t n_discarded = 0;
    std::vector<TaskReport> tasks;                           // tasks 1..3
    std::array<metrics::ConfusionCounts, 3> experts{};       // leave-one-out, task 1
    std::optional<metrics::BootstrapCI> study_sensitivity;   // study-level referral, when study ids exist
    std::optional<metrics::BootstrapCI> study_specificity;
};

/// Per-task sensitivity/specificity with percentile-bootstrap intervals over
/// eyes, AUC on referral / DR / non-gradability scores, and expert rows.
GoldReport evaluate_gold(std::span<const LabeledEye> eyes, double decision_boundary,
                         const metrics::BootstrapOptions& options = {});

/// Ceiling that ignores floating-point dust just above an integer.
long long robust_ceil(double value);

}  // namespace retscreen::gold
