#include "retscreen/cohort.hpp"

#include <cstdio>

#include "retscreen/error.hpp"
#include "retscreen/synthetic.hpp"

namespace retscreen::cohort {
namespace {

void check_probability(double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) fail(ErrorKind::Config, std::string(name) + " must lie in [0,1]");
}

std::string timestamp_for(std::size_t i, std::size_t n, int start_year, int end_year) {
    const std::size_t months = static_cast<std::size_t>(end_year - start_year + 1) * 12;
    const double pos = static_cast<double>(i) * static_cast<double>(months) / static_cast<double>(n);
    const auto month_index = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(month_index);
    const int year = start_year + static_cast<int>(month_index / 12);
    const int month = static_cast<int>(month_index % 12) + 1;
    const int minutes = static_cast<int>(frac * 28.0 * 24.0 * 60.0);
    const int day = 1 + minutes / (24 * 60);
    const int hour = (minutes / 60) % 24;
    const int minute = minutes % 60;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:00Z", year, month, day, hour, minute);
    return buf;
}

std::size_t pick_gp(const std::vector<GpProfile>& gps, Rng& rng) {
    double total = 0.0;
    for (const auto& g : gps) total += g.weight;
    double u = rng.uniform() * total;
    for (std::size_t k = 0; k < gps.size(); ++k) {
        if (u < gps[k].weight) return k;
        u -= gps[k].weight;
    }
    return gps.size() - 1;
}

}  // namespace

void CohortConfig::validate() const {
    if (n_studies == 0) fail(ErrorKind::Config, "n_studies must be positive");
    if (end_year < start_year) fail(ErrorKind::Config, "end_year precedes start_year");
    if (gp_profiles.empty()) fail(ErrorKind::Config, "at least one GP profile is required");
    check_probability(prevalence, "prevalence");
    check_probability(nongradable_rate, "nongradable_rate");
    check_probability(nongradable_rate + quality_drift, "nongradable_rate + quality_drift");
    check_probability(ai_sensitivity, "ai_sensitivity");
    check_probability(ai_specificity, "ai_specificity");
    check_probability(ai_missing_rate, "ai_missing_rate");
    check_probability(pressure_referral_rate, "pressure_referral_rate");
    if (image_size < kMinImageSide) fail(ErrorKind::Config, "image_size must be at least 64");
    double weight = 0.0;
    for (const auto& g : gp_profiles) {
        if (g.gp_id.empty()) fail(ErrorKind::Config, "GP profile without gp_id");
        check_probability(g.sensitivity, "gp sensitivity");
        check_probability(g.specificity, "gp specificity");
        check_probability(g.ai_trust, "gp ai_trust");
        if (!(g.weight >= 0.0)) fail(ErrorKind::Config, "gp weight must be non-negative");
        weight += g.weight;
    }
    if (!(weight > 0.0)) fail(ErrorKind::Config, "GP weights sum to zero");
}

std::vector<analytics::ScreeningEvent> Cohort::events() const {
    std::vector<analytics::ScreeningEvent> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(r.event);
    return out;
}

bool gp_decide(const GpProfile& profile, const LatentTruth& truth, std::optional<bool> ai_refer, Rng& rng) {
    // Draw both variates unconditionally so the stream does not depend on branches.
    const double trust_draw = rng.uniform();
    const double own_draw = rng.uniform();
    if (ai_refer && trust_draw < profile.ai_trust) return *ai_refer;
    return truth.referable() ? own_draw < profile.sensitivity : own_draw >= profile.specificity;
}

analytics::SecondLevel second_level_for(const LatentTruth& truth, Rng& rng) {
    analytics::SecondLevel sl;
    const double u = rng.uniform();
    if (truth.referable_dr) {
        sl.grade = static_cast<analytics::IcdrGrade>(2 + static_cast<int>(u * 3.0));
    } else if (truth.non_gradable) {
        sl.grade = analytics::IcdrGrade::NotGradable;
    } else {
        sl.grade = u < 0.85 ? analytics::IcdrGrade::NoDR : analytics::IcdrGrade::Mild;
    }
    sl.exam_appointed = truth.referable();
    return sl;
}

Cohort generate_cohort(const CohortConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng(seed);
    Cohort cohort;
    cohort.records.reserve(config.n_studies);
    const double span = static_cast<double>(config.n_studies);
    for (std::size_t i = 0; i < config.n_studies; ++i) {
        CohortRecord rec;
        auto& e = rec.event;
        char id[32];
        std::snprintf(id, sizeof id, "S%06zu", i + 1);
        e.study_id = id;
        e.timestamp = timestamp_for(i, config.n_studies, config.start_year, config.end_year);

        const double ng_rate = config.nongradable_rate + config.quality_drift * static_cast<double>(i) / span;
        rec.truth.referable_dr = rng.bernoulli(config.prevalence);
        rec.truth.non_gradable = rng.bernoulli(ng_rate);
        rec.truth.affected_eye = rng.bernoulli(0.5) ? Laterality::Left : Laterality::Right;

        rec.gp_index = pick_gp(config.gp_profiles, rng);
        e.gp_id = config.gp_profiles[rec.gp_index].gp_id;

        const bool deployed = e.year() >= config.deployment_year;
        const bool missing = rng.bernoulli(config.ai_missing_rate);
        const double ai_draw = rng.uniform();
        const double fp_kind = rng.uniform();
        if (deployed && !missing) {
            analytics::AiProposalRecord ai;
            ai.refer = rec.truth.referable() ? ai_draw < config.ai_sensitivity : ai_draw >= config.ai_specificity;
            ScreeningLabel cat = ScreeningLabel::NonReferable;
            if (ai.refer) {
                if (rec.truth.referable_dr) cat = ScreeningLabel::ReferableDR;
                else if (rec.truth.non_gradable) cat = ScreeningLabel::NonGradable;
                else cat = fp_kind < 0.5 ? ScreeningLabel::ReferableDR : ScreeningLabel::NonGradable;
            }
            const bool left_affected = rec.truth.affected_eye == Laterality::Left;
            ai.categories = {left_affected ? cat : ScreeningLabel::NonReferable,
                             left_affected ? ScreeningLabel::NonReferable : cat};
            e.ai_proposal = std::move(ai);
        }

        const auto ai_refer = e.ai_proposal ? std::optional<bool>(e.ai_proposal->refer) : std::nullopt;
        e.gp_refer = gp_decide(config.gp_profiles[rec.gp_index], rec.truth, ai_refer, rng);
        const auto second = second_level_for(rec.truth, rng);
        if (*e.gp_refer) e.second_level = second;
        e.pressure_referral = !*e.gp_refer && rng.bernoulli(config.pressure_referral_rate);
        cohort.records.push_back(std::move(rec));
    }
    return cohort;
}

Study render_study(const std::string& study_id, const LatentTruth& truth, int image_size, std::uint64_t seed) {
    Study study;
    study.study_id = study_id;
    int acquisition = 0;
    for (auto lat : {Laterality::Left, Laterality::Right}) {
        EyeStudy eye;
        eye.laterality = lat;
        eye.eye_id = study_id + "-" + std::string(to_string(lat));
        const bool affected = lat == truth.affected_eye;
        for (auto field : {SyntheticField::Central, SyntheticField::Nasal}) {
            SyntheticFundusSpec spec;
            spec.size = image_size;
            spec.field = field;
            spec.mirrored = lat == Laterality::Left;
            spec.seed = splitmix64(seed ^ static_cast<std::uint64_t>(acquisition + 1));
            if (truth.referable_dr && affected) spec.lesions = 12;
            if (truth.non_gradable && affected) {
                spec.contrast = 0.08;
                spec.blur_sigma = 3.0;
            }
            FundusImage im;
            im.laterality = lat;
            im.acquisition_index = acquisition;
            im.image_id = eye.eye_id + "-" + std::to_string(acquisition) + ".png";
            im.pixels = make_synthetic_fundus(spec);
            eye.images.push_back(std::move(im));
            ++acquisition;
        }
        study.eyes.push_back(std::move(eye));
    }
    return study;
}

}  // namespace retscreen::cohort
