#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "retscreen/analytics.hpp"
#include "retscreen/calibration.hpp"
#include "retscreen/cohort.hpp"
#include "retscreen/gold_standard.hpp"
#include "retscreen/metrics.hpp"
#include "retscreen/study.hpp"

namespace retscreen::io {

using Json = nlohmann::json;

// Proposal schema:
// {"study_id","refer","eyes":[{"laterality","category","referral_score","dr_score",
//   "non_gradability_score","selected_central","selected_nasal","annotations":[{"cx","cy","r"}]}]}
Json to_json(const AnnotationCircle& circle);
Json to_json(const EyeProposal& eye);
Json to_json(const StudyProposal& proposal);
EyeProposal eye_proposal_from_json(const Json& j, const std::string& study_id = {});
StudyProposal study_proposal_from_json(const Json& j);

/// Canonical compact text; byte-identical for equal proposals.
std::string dump_proposal(const StudyProposal& proposal);

struct SidecarImage {
    std::string file;
    int acquisition_index = 0;
};

struct SidecarEye {
    Laterality laterality = Laterality::Left;
    std::vector<SidecarImage> images;
};

struct Sidecar {
    std::string study_id;
    std::vector<SidecarEye> eyes;
};

/// Throws Parse on malformed documents.
Sidecar sidecar_from_json(const Json& j);
Json to_json(const Sidecar& sidecar);

/// Builds a Study from a sidecar whose files live in `directory`. A missing
/// file fails with Precondition naming it. Eye ids are "<study_id>-L|R".
Study load_study(const Sidecar& sidecar, const std::filesystem::path& directory);

/// Same, from raw bytes keyed by file name.
Study assemble_study(const Sidecar& sidecar, const std::vector<std::pair<std::string, std::vector<std::uint8_t>>>& files);

Study load_study_dir(const std::filesystem::path& directory);  // expects sidecar.json inside

/// Writes sidecar.json and one PNG per image (named by image_id).
void save_study_dir(const Study& study, const std::filesystem::path& directory);

Sidecar sidecar_of(const Study& study);

Json to_json(const calibration::Calibrator& calibrator);
calibration::Calibrator calibrator_from_json(const Json& j);

Json to_json(const calibration::OperatingPoint& op);
calibration::OperatingPoint operating_point_from_json(const Json& j);

// {"eye_id","labels":["R_DR","NR","NG"],"system":{eye proposal}, "study_id"?}
gold::LabeledEye labeled_eye_from_json(const Json& j);
Json to_json(const gold::LabeledEye& eye);

Json to_json(const analytics::ScreeningEvent& event);
analytics::ScreeningEvent screening_event_from_json(const Json& j);

Json to_json(const metrics::BootstrapCI& ci, const std::string& metric);

// Programme-analytics report shapes, shared by the HTTP stats routes and the CLI.
Json to_json(const analytics::AnnualSummary& summary);
Json to_json(const analytics::GpRow& row);
Json to_json(const analytics::WorkloadCounterfactual& workload);
Json to_json(const analytics::FalseNegativeTally& tally);
Json to_json(const analytics::DriftRow& row);

/// Table with header gp_id,n_studies,pa,na,kappa,referred_rate,exam_rate.
std::string gp_table_csv(const std::vector<analytics::GpRow>& rows);

Json to_json(const gold::GoldReport& report);

Json to_json(const cohort::CohortConfig& config);
/// Unknown keys are ignored; missing keys keep defaults. Throws Config.
cohort::CohortConfig cohort_config_from_json(const Json& j);

Json to_json(const cohort::LatentTruth& truth);

/// Reads every non-blank line as a JSON document.
std::vector<Json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& rows);

Json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& j);

/// "cx,cy,r" header followed by one row per circle.
std::string annotations_csv(const std::vector<AnnotationCircle>& circles);

}  // namespace retscreen::io
