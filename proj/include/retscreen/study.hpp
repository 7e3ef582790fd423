#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "retscreen/image.hpp"

namespace retscreen {

enum class Laterality { Left, Right };

std::string_view to_string(Laterality laterality);  // "L" / "R"
Laterality parse_laterality(std::string_view text);

/// Fundus field taxonomy used by the field classifier.
enum class FieldCategory { Central, Nasal, ODUp, ODDown, NoOD, Temporal, Composite };

inline constexpr std::size_t kFieldCategoryCount = 7;
inline constexpr std::array<FieldCategory, kFieldCategoryCount> kFieldCategories = {
    FieldCategory::Central, FieldCategory::Nasal,    FieldCategory::ODUp,     FieldCategory::ODDown,
    FieldCategory::NoOD,    FieldCategory::Temporal, FieldCategory::Composite,
};

std::string_view to_string(FieldCategory category);
FieldCategory parse_field_category(std::string_view text);

/// Probability vector over the seven field categories, indexed by enum value.
struct FieldScores {
    std::array<double, kFieldCategoryCount> probs{};

    [[nodiscard]] double operator[](FieldCategory c) const { return probs[static_cast<std::size_t>(c)]; }
    double& operator[](FieldCategory c) { return probs[static_cast<std::size_t>(c)]; }
    [[nodiscard]] FieldCategory argmax() const;
    /// True if every entry is in [0,1] and the sum is within 1e-6 of 1.
    [[nodiscard]] bool is_valid() const;

    bool operator==(const FieldScores&) const = default;
};

struct FundusImage {
    std::string image_id;
    RgbImage pixels;
    Laterality laterality = Laterality::Left;
    int acquisition_index = 0;
    std::optional<std::string> source_tag;

    bool operator==(const FundusImage&) const = default;
};

inline constexpr int kMinImageSide = 64;

struct EyeStudy {
    std::string eye_id;
    Laterality laterality = Laterality::Left;
    std::vector<FundusImage> images;

    bool operator==(const EyeStudy&) const = default;
};

/// A screening request: one or two eyes of the same patient session.
struct Study {
    std::string study_id;
    std::vector<EyeStudy> eyes;

    bool operator==(const Study&) const = default;
};

struct RawScores {
    double dr_prob = 0.0;
    double non_gradability_prob = 0.0;
};

/// Screening outcome for an eye, also used as the expert label vocabulary.
enum class ScreeningLabel { NonReferable, ReferableDR, NonGradable };

std::string_view to_string(ScreeningLabel label);        // "NonReferable" ...
std::string_view to_short_code(ScreeningLabel label);    // "NR" / "R_DR" / "NG"
ScreeningLabel parse_screening_label(std::string_view text);  // accepts either form

struct AnnotationCircle {
    double cx = 0.0;
    double cy = 0.0;
    double r = 0.0;

    bool operator==(const AnnotationCircle&) const = default;
};

struct EyeProposal {
    std::string eye_id;
    Laterality laterality = Laterality::Left;
    ScreeningLabel category = ScreeningLabel::NonReferable;
    double referral_score = 0.0;
    double dr_score_transformed = 0.0;
    double non_gradability_score_transformed = 0.0;
    std::optional<std::string> selected_central;
    std::optional<std::string> selected_nasal;
    std::vector<AnnotationCircle> annotations;

    bool operator==(const EyeProposal&) const = default;
};

struct StudyProposal {
    std::string study_id;
    std::vector<EyeProposal> eyes;
    bool refer = false;

    bool operator==(const StudyProposal&) const = default;
};

/// Study-level category: ReferableDR if any eye is, else NonGradable if any
/// eye is, else NonReferable.
ScreeningLabel study_category(const StudyProposal& proposal);

/// All invariant violations of an eye study; empty means valid.
std::vector<std::string> validate_study(const EyeStudy& study);
std::vector<std::string> validate_study(const Study& study);

/// Invariant violations of an emitted eye proposal against boundary t'.
std::vector<std::string> validate_proposal(const EyeProposal& proposal, double decision_boundary);

}  // namespace retscreen
