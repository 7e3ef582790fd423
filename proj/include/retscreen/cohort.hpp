#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "retscreen/analytics.hpp"
#include "retscreen/rng.hpp"
#include "retscreen/study.hpp"

namespace retscreen::cohort {

// Seeded generator of screening-programme logs used as test fixtures.

struct GpProfile {
    std::string gp_id;
    double sensitivity = 0.9;  // P(refer | referable truth) when deciding alone
    double specificity = 0.9;
    double ai_trust = 0.0;     // P(copy the AI proposal) when one is shown
    double weight = 1.0;       // relative share of studies
};

struct CohortConfig {
    std::size_t n_studies = 1000;
    int start_year = 2018;
    int end_year = 2023;
    int deployment_year = 2020;      // AI proposals exist from this year on
    std::vector<GpProfile> gp_profiles{GpProfile{"GP01"}};
    double prevalence = 0.07;        // referable DR
    double nongradable_rate = 0.05;
    double quality_drift = 0.0;      // added to nongradable_rate linearly over the period
    double ai_sensitivity = 0.95;
    double ai_specificity = 0.8;
    double ai_missing_rate = 0.0;    // post-deployment studies without an AI grade
    double pressure_referral_rate = 0.0;
    bool with_images = false;
    int image_size = 128;

    /// Throws Config on out-of-range probabilities or an empty GP list.
    void validate() const;
};

struct LatentTruth {
    bool referable_dr = false;
    bool non_gradable = false;
    Laterality affected_eye = Laterality::Right;

    [[nodiscard]] bool referable() const { return referable_dr || non_gradable; }
    bool operator==(const LatentTruth&) const = default;
};

struct CohortRecord {
    analytics::ScreeningEvent event;
    LatentTruth truth;
    std::size_t gp_index = 0;
};

struct Cohort {
    std::vector<CohortRecord> records;

    [[nodiscard]] std::vector<analytics::ScreeningEvent> events() const;
};

Cohort generate_cohort(const CohortConfig& config, std::uint64_t seed);

/// GP referral decision: copies `ai_refer` with probability ai_trust,
/// otherwise samples from sensitivity / specificity against the truth.
bool gp_decide(const GpProfile& profile, const LatentTruth& truth, std::optional<bool> ai_refer, Rng& rng);

/// Second-level outcome of a GP-referred study, consistent with the truth.
analytics::SecondLevel second_level_for(const LatentTruth& truth, Rng& rng);

/// Two-eye, two-field synthetic study whose pixels reflect the latent truth:
/// lesions in the affected eye for referable DR, washed-out frames when
/// non-gradable.
Study render_study(const std::string& study_id, const LatentTruth& truth, int image_size, std::uint64_t seed);

}  // namespace retscreen::cohort
