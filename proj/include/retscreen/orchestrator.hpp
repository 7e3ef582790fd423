#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "retscreen/attribution.hpp"
#include "retscreen/calibration.hpp"
#include "retscreen/inference.hpp"
#include "retscreen/study.hpp"

namespace retscreen::orchestrator {

struct OrchestratorConfig {
    double decision_boundary = 0.5;      // t'
    double dr_threshold = 0.1;           // on the calibrated DR probability
    double gradability_threshold = 0.5;  // on the calibrated non-gradability probability
    calibration::Calibrator dr_calibrator = calibration::IdentityCalibrator{};
    calibration::Calibrator gradability_calibrator = calibration::IdentityCalibrator{};
    attribution::ClusterParams clustering;
    int ig_steps = 20;
    bool annotate = true;

    void validate() const;
};

struct ImageFieldScores {
    std::string image_id;
    int acquisition_index = 0;
    FieldScores scores;
};

struct FieldSelection {
    std::string central;
    std::optional<std::string> nasal;
};

/// Central = argmax P(Central); nasal = argmax P(Nasal) over the remaining
/// images. A single image is the central field with no nasal pick. Ties go to
/// the lowest acquisition index.
FieldSelection select_fields(std::span<const ImageFieldScores> candidates);

/// Transformed (post-calibration, post-remap) scores of one eye.
struct TransformedScores {
    double dr_central = 0.0;
    std::optional<double> dr_nasal;
    double non_gradability = 0.0;
};

/// Category/score rule: ReferableDR when the worst DR score reaches t',
/// otherwise NonGradable when the non-gradability score does, otherwise
/// NonReferable. Annotations and selections are left empty.
EyeProposal decide_eye(const TransformedScores& scores, double decision_boundary);

EyeProposal screen_eye(const EyeStudy& study, const inference::InferenceBackend& backend,
                       const OrchestratorConfig& config);

/// refer = any eye's referral_score >= t'. Accepts one or two eyes.
StudyProposal screen_study(const std::string& study_id, std::span<const EyeProposal> eyes,
                           double decision_boundary);

StudyProposal screen_study(const Study& study, const inference::InferenceBackend& backend,
                           const OrchestratorConfig& config);

}  // namespace retscreen::orchestrator
