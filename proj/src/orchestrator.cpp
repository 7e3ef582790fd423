#include "retscreen/orchestrator.hpp"

#include <algorithm>

#include "retscreen/error.hpp"

namespace retscreen::orchestrator {

void OrchestratorConfig::validate() const {
    auto open_unit = [](double v) { return v > 0.0 && v < 1.0; };
    if (!open_unit(decision_boundary) || !open_unit(dr_threshold) || !open_unit(gradability_threshold)) {
        fail(ErrorKind::Config, "orchestrator thresholds must lie in (0,1)");
    }
    if (ig_steps < 1) fail(ErrorKind::Config, "ig_steps must be >= 1");
    clustering.validate();
}

namespace {

// Index of the best candidate for `field`, skipping `exclude`.
std::size_t argmax_field(std::span<const ImageFieldScores> c, FieldCategory field, std::size_t exclude) {
    std::size_t best = c.size();
    for (std::size_t i = 0; i < c.size(); ++i) {
        if (i == exclude) continue;
        if (best == c.size() || c[i].scores[field] > c[best].scores[field] ||
            (c[i].scores[field] == c[best].scores[field] && c[i].acquisition_index < c[best].acquisition_index)) {
            best = i;
        }
    }
    return best;
}

}  // namespace

FieldSelection select_fields(std::span<const ImageFieldScores> candidates) {
    require(!candidates.empty(), "select_fields needs at least one image");
    if (candidates.size() == 1) {
        return {candidates.front().image_id, std::nullopt};
    }
    const auto central = argmax_field(candidates, FieldCategory::Central, candidates.size());
    const auto nasal = argmax_field(candidates, FieldCategory::Nasal, central);
    return {candidates[central].image_id, candidates[nasal].image_id};
}

EyeProposal decide_eye(const TransformedScores& scores, double t_prime) {
    EyeProposal p;
    p.dr_score_transformed = std::max(scores.dr_central, scores.dr_nasal.value_or(scores.dr_central));
    p.non_gradability_score_transformed = scores.non_gradability;
    p.referral_score = calibration::combine_referral_score(p.dr_score_transformed, p.non_gradability_score_transformed);
    if (p.dr_score_transformed >= t_prime) {
        p.category = ScreeningLabel::ReferableDR;
    } else if (p.non_gradability_score_transformed >= t_prime) {
        p.category = ScreeningLabel::NonGradable;
    } else {
        p.category = ScreeningLabel::NonReferable;
    }
    return p;
}

EyeProposal screen_eye(const EyeStudy& study, const inference::InferenceBackend& backend,
                       const OrchestratorConfig& config) {
    config.validate();
    const auto violations = validate_study(study);
    if (!violations.empty()) {
        fail(ErrorKind::Precondition, "invalid eye study " + study.eye_id + ": " + violations.front());
    }

    try {
        std::vector<ImageFieldScores> fields;
        fields.reserve(study.images.size());
        if (study.images.size() > 1) {
            for (const auto& img : study.images) {
                fields.push_back({img.image_id, img.acquisition_index, backend.classify_field(img.pixels)});
            }
        } else {
            // A lone image is taken as the central field whatever it looks like.
            fields.push_back({study.images.front().image_id, study.images.front().acquisition_index, {}});
        }
        const auto selection = select_fields(fields);
        auto image_by_id = [&](const std::string& id) -> const FundusImage& {
            return *std::find_if(study.images.begin(), study.images.end(),
                                 [&](const FundusImage& f) { return f.image_id == id; });
        };

        auto transform_dr = [&](const FundusImage& img) {
            const double calibrated = calibration::calibrate(config.dr_calibrator, backend.score_dr(img.pixels));
            return calibration::transform_score(std::clamp(calibrated, 0.0, 1.0), config.dr_threshold,
                                                config.decision_boundary);
        };

        const auto& central = image_by_id(selection.central);
        TransformedScores scores;
        scores.dr_central = transform_dr(central);
        if (selection.nasal) scores.dr_nasal = transform_dr(image_by_id(*selection.nasal));
        // Gradability is judged on the central field only.
        const double ng_calibrated =
            calibration::calibrate(config.gradability_calibrator, backend.score_gradability(central.pixels));
        scores.non_gradability = calibration::transform_score(std::clamp(ng_calibrated, 0.0, 1.0),
                                                              config.gradability_threshold, config.decision_boundary);

        EyeProposal proposal = decide_eye(scores, config.decision_boundary);
        proposal.eye_id = study.eye_id;
        proposal.laterality = study.laterality;
        proposal.selected_central = selection.central;
        proposal.selected_nasal = selection.nasal;

        if (proposal.category == ScreeningLabel::ReferableDR && config.annotate && backend.supports_gradients()) {
            // Annotate the field that produced the worst DR score.
            const bool nasal_worse = scores.dr_nasal && *scores.dr_nasal > scores.dr_central;
            const auto& target = nasal_worse ? image_by_id(*selection.nasal) : central;
            const auto map = attribution::integrated_gradients(backend, target.pixels,
                                                               inference::OutputSelector::DrProbability,
                                                               config.ig_steps);
            proposal.annotations = attribution::annotate(map, config.clustering);
        }
        return proposal;
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Transport) {
            fail(ErrorKind::Unavailable, std::string("screening unavailable: ") + e.what());
        }
        throw;
    }
}

StudyProposal screen_study(const std::string& study_id, std::span<const EyeProposal> eyes, double t_prime) {
    require(!eyes.empty() && eyes.size() <= 2, "a study proposal holds one or two eyes");
    StudyProposal out;
    out.study_id = study_id;
    out.eyes.assign(eyes.begin(), eyes.end());
    out.refer = std::any_of(eyes.begin(), eyes.end(), [t_prime](const EyeProposal& e) {
        return e.referral_score >= t_prime;
    });
    return out;
}

StudyProposal screen_study(const Study& study, const inference::InferenceBackend& backend,
                           const OrchestratorConfig& config) {
    const auto violations = validate_study(study);
    if (!violations.empty()) {
        fail(ErrorKind::Precondition, "invalid study " + study.study_id + ": " + violations.front());
    }
    std::vector<EyeProposal> eyes;
    for (const auto& eye : study.eyes) eyes.push_back(screen_eye(eye, backend, config));
    return screen_study(study.study_id, eyes, config.decision_boundary);
}

}  // namespace retscreen::orchestrator
