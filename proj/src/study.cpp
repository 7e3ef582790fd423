#include "retscreen/study.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "retscreen/error.hpp"

namespace retscreen {

std::string_view to_string(Laterality laterality) {
    return laterality == Laterality::Left ? "L" : "R";
}

Laterality parse_laterality(std::string_view text) {
    if (text == "L" || text == "left" || text == "Left") return Laterality::Left;
    if (text == "R" || text == "right" || text == "Right") return Laterality::Right;
    fail(ErrorKind::Parse, "unknown laterality '" + std::string(text) + "'");
}

std::string_view to_string(FieldCategory category) {
    switch (category) {
        case FieldCategory::Central: return "Central";
        case FieldCategory::Nasal: return "Nasal";
        case FieldCategory::ODUp: return "ODUp";
        case FieldCategory::ODDown: return "ODDown";
        case FieldCategory::NoOD: return "NoOD";
        case FieldCategory::Temporal: return "Temporal";
        case FieldCategory::Composite: return "Composite";
    }
    return "?";
}

FieldCategory parse_field_category(std::string_view text) {
    for (auto c : kFieldCategories) {
        if (to_string(c) == text) return c;
    }
    fail(ErrorKind::Parse, "unknown field category '" + std::string(text) + "'");
}

FieldCategory FieldScores::argmax() const {
    const auto it = std::max_element(probs.begin(), probs.end());
    return kFieldCategories[static_cast<std::size_t>(it - probs.begin())];
}

bool FieldScores::is_valid() const {
    double sum = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0 && p <= 1.0)) return false;
        sum += p;
    }
    return std::abs(sum - 1.0) <= 1e-6;
}

std::string_view to_string(ScreeningLabel label) {
    switch (label) {
        case ScreeningLabel::NonReferable: return "NonReferable";
        case ScreeningLabel::ReferableDR: return "ReferableDR";
        case ScreeningLabel::NonGradable: return "NonGradable";
    }
    return "?";
}

std::string_view to_short_code(ScreeningLabel label) {
    switch (label) {
        case ScreeningLabel::NonReferable: return "NR";
        case ScreeningLabel::ReferableDR: return "R_DR";
        case ScreeningLabel::NonGradable: return "NG";
    }
    return "?";
}

ScreeningLabel parse_screening_label(std::string_view text) {
    for (auto label : {ScreeningLabel::NonReferable, ScreeningLabel::ReferableDR, ScreeningLabel::NonGradable}) {
        if (text == to_string(label) || text == to_short_code(label)) return label;
    }
    fail(ErrorKind::Parse, "unknown screening label '" + std::string(text) + "'");
}

ScreeningLabel study_category(const StudyProposal& proposal) {
    bool any_ng = false;
    for (const auto& eye : proposal.eyes) {
        if (eye.category == ScreeningLabel::ReferableDR) return ScreeningLabel::ReferableDR;
        any_ng = any_ng || eye.category == ScreeningLabel::NonGradable;
    }
    return any_ng ? ScreeningLabel::NonGradable : ScreeningLabel::NonReferable;
}

std::vector<std::string> validate_study(const EyeStudy& study) {
    std::vector<std::string> violations;
    if (study.images.empty()) {
        violations.emplace_back("empty image list");
        return violations;
    }
    std::set<int> indices;
    std::set<std::string> ids;
    bool laterality_reported = false;
    for (const auto& img : study.images) {
        const std::string name = img.image_id.empty() ? std::string("<unnamed>") : img.image_id;
        if (img.image_id.empty()) {
            violations.emplace_back("image without identifier");
        } else if (!ids.insert(img.image_id).second) {
            violations.push_back("duplicate image id " + name);
        }
        if (img.laterality != study.laterality && !laterality_reported) {
            violations.emplace_back("laterality mismatch");
            laterality_reported = true;
        }
        if (img.pixels.width < kMinImageSide || img.pixels.height < kMinImageSide) {
            violations.push_back("image " + name + " smaller than 64x64");
        }
        if (img.pixels.data.size() != img.pixels.pixel_count() * 3) {
            violations.push_back("image " + name + " is not 3-channel");
        }
        if (img.acquisition_index < 0) {
            violations.push_back("image " + name + " has negative acquisition index");
        } else if (!indices.insert(img.acquisition_index).second) {
            violations.push_back("duplicate acquisition index " + std::to_string(img.acquisition_index));
        }
    }
    return violations;
}

std::vector<std::string> validate_study(const Study& study) {
    std::vector<std::string> violations;
    if (study.study_id.empty()) violations.emplace_back("missing study id");
    if (study.eyes.empty() || study.eyes.size() > 2) {
        violations.emplace_back("a study holds one or two eyes");
    }
    if (study.eyes.size() == 2 && study.eyes[0].laterality == study.eyes[1].laterality) {
        violations.emplace_back("two eyes with the same laterality");
    }
    for (const auto& eye : study.eyes) {
        for (auto& v : validate_study(eye)) {
            violations.push_back(std::string(to_string(eye.laterality)) + ": " + v);
        }
    }
    return violations;
}

std::vector<std::string> validate_proposal(const EyeProposal& p, double t_prime) {
    std::vector<std::string> violations;
    const double expected = std::max(p.dr_score_transformed, p.non_gradability_score_transformed);
    if (p.referral_score != expected) {
        violations.emplace_back("referral_score is not the max of the transformed scores");
    }
    const bool referable = p.referral_score >= t_prime;
    if (referable != (p.category != ScreeningLabel::NonReferable)) {
        violations.emplace_back("category disagrees with referral_score");
    }
    if (!p.annotations.empty() && p.category != ScreeningLabel::ReferableDR) {
        violations.emplace_back("annotations on a non-DR eye");
    }
    return violations;
}

}  // namespace retscreen
