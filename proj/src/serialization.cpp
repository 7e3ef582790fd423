#include "retscreen/serialization.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "retscreen/error.hpp"

namespace retscreen::io {
namespace {

const Json& field(const Json& j, const char* key) {
    if (!j.is_object()) fail(ErrorKind::Parse, std::string("expected an object holding '") + key + "'");
    const auto it = j.find(key);
    if (it == j.end()) fail(ErrorKind::Parse, std::string("missing field '") + key + "'");
    return *it;
}

template <typename T>
T get(const Json& j, const char* key) {
    try {
        return field(j, key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Parse, std::string("field '") + key + "': " + e.what());
    }
}

std::optional<std::string> optional_string(const Json& j, const char* key) {
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) fail(ErrorKind::Parse, std::string("field '") + key + "' must be a string or null");
    return it->get<std::string>();
}

template <typename Fn>
auto parsing(const std::string& what, Fn fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Precondition) fail(ErrorKind::Parse, what + ": " + e.what());
        throw;
    }
}

Json nullable(const std::optional<std::string>& s) { return s ? Json(*s) : Json(nullptr); }

}  // namespace

Json to_json(const AnnotationCircle& c) { return Json{{"cx", c.cx}, {"cy", c.cy}, {"r", c.r}}; }

Json to_json(const EyeProposal& eye) {
    Json annotations = Json::array();
    for (const auto& c : eye.annotations) annotations.push_back(to_json(c));
    Json j;
    j["laterality"] = std::string(to_string(eye.laterality));
    j["category"] = std::string(to_string(eye.category));
    j["referral_score"] = eye.referral_score;
    j["dr_score"] = eye.dr_score_transformed;
    j["non_gradability_score"] = eye.non_gradability_score_transformed;
    j["selected_central"] = nullable(eye.selected_central);
    j["selected_nasal"] = nullable(eye.selected_nasal);
    j["annotations"] = std::move(annotations);
    return j;
}

Json to_json(const StudyProposal& p) {
    Json eyes = Json::array();
    for (const auto& e : p.eyes) eyes.push_back(to_json(e));
    Json j;
    j["study_id"] = p.study_id;
    j["refer"] = p.refer;
    j["eyes"] = std::move(eyes);
    return j;
}

EyeProposal eye_proposal_from_json(const Json& j, const std::string& study_id) {
    return parsing("eye proposal", [&] {
        EyeProposal e;
        e.laterality = parse_laterality(get<std::string>(j, "laterality"));
        e.category = parse_screening_label(get<std::string>(j, "category"));
        e.referral_score = get<double>(j, "referral_score");
        e.dr_score_transformed = get<double>(j, "dr_score");
        e.non_gradability_score_transformed = get<double>(j, "non_gradability_score");
        e.selected_central = optional_string(j, "selected_central");
        e.selected_nasal = optional_string(j, "selected_nasal");
        if (const auto it = j.find("annotations"); it != j.end()) {
            for (const auto& a : *it) e.annotations.push_back({get<double>(a, "cx"), get<double>(a, "cy"), get<double>(a, "r")});
        }
        if (const auto it = j.find("eye_id"); it != j.end() && it->is_string()) {
            e.eye_id = it->get<std::string>();
        } else if (!study_id.empty()) {
            e.eye_id = study_id + "-" + std::string(to_string(e.laterality));
        }
        return e;
    });
}

StudyProposal study_proposal_from_json(const Json& j) {
    StudyProposal p;
    p.study_id = get<std::string>(j, "study_id");
    p.refer = get<bool>(j, "refer");
    for (const auto& e : field(j, "eyes")) p.eyes.push_back(eye_proposal_from_json(e, p.study_id));
    return p;
}

std::string dump_proposal(const StudyProposal& proposal) { return to_json(proposal).dump(); }

Sidecar sidecar_from_json(const Json& j) {
    return parsing("sidecar", [&] {
        Sidecar s;
        s.study_id = get<std::string>(j, "study_id");
        if (s.study_id.empty()) fail(ErrorKind::Parse, "sidecar: empty study_id");
        const auto& eyes = field(j, "eyes");
        if (!eyes.is_array() || eyes.empty() || eyes.size() > 2) {
            fail(ErrorKind::Parse, "sidecar: 'eyes' must list one or two eyes");
        }
        for (const auto& e : eyes) {
            SidecarEye eye;
            eye.laterality = parse_laterality(get<std::string>(e, "laterality"));
            const auto& images = field(e, "images");
            if (!images.is_array()) fail(ErrorKind::Parse, "sidecar: 'images' must be an array");
            for (const auto& im : images) {
                eye.images.push_back({get<std::string>(im, "file"), get<int>(im, "acquisition_index")});
            }
            s.eyes.push_back(std::move(eye));
        }
        return s;
    });
}

Json to_json(const Sidecar& s) {
    Json eyes = Json::array();
    for (const auto& e : s.eyes) {
        Json images = Json::array();
        for (const auto& im : e.images) images.push_back({{"file", im.file}, {"acquisition_index", im.acquisition_index}});
        eyes.push_back({{"laterality", std::string(to_string(e.laterality))}, {"images", std::move(images)}});
    }
    return Json{{"study_id", s.study_id}, {"eyes", std::move(eyes)}};
}

namespace {

template <typename Loader>
Study build_study(const Sidecar& sidecar, Loader&& load) {
    Study study;
    study.study_id = sidecar.study_id;
    for (const auto& se : sidecar.eyes) {
        EyeStudy eye;
        eye.laterality = se.laterality;
        eye.eye_id = sidecar.study_id + "-" + std::string(to_string(se.laterality));
        for (const auto& im : se.images) {
            FundusImage f;
            f.image_id = im.file;
            f.laterality = se.laterality;
            f.acquisition_index = im.acquisition_index;
            f.pixels = load(im.file);
            eye.images.push_back(std::move(f));
        }
        study.eyes.push_back(std::move(eye));
    }
    const auto problems = validate_study(study);
    if (!problems.empty()) {
        std::string msg = "invalid study " + study.study_id + ":";
        for (const auto& p : problems) msg += " " + p + ";";
        fail(ErrorKind::Precondition, msg);
    }
    return study;
}

}  // namespace

Study load_study(const Sidecar& sidecar, const std::filesystem::path& directory) {
    return build_study(sidecar, [&](const std::string& file) {
        const auto path = directory / file;
        if (!std::filesystem::exists(path)) fail(ErrorKind::Precondition, "missing image file " + file);
        return read_image(path);
    });
}

Study assemble_study(const Sidecar& sidecar,
                     const std::vector<std::pair<std::string, std::vector<std::uint8_t>>>& files) {
    return build_study(sidecar, [&](const std::string& file) {
        for (const auto& [name, bytes] : files) {
            if (name == file) return decode_image(bytes);
        }
        fail(ErrorKind::Precondition, "missing image file " + file);
    });
}

Study load_study_dir(const std::filesystem::path& directory) {
    return load_study(sidecar_from_json(read_json_file(directory / "sidecar.json")), directory);
}

Sidecar sidecar_of(const Study& study) {
    Sidecar s;
    s.study_id = study.study_id;
    for (const auto& eye : study.eyes) {
        SidecarEye se;
        se.laterality = eye.laterality;
        for (const auto& im : eye.images) se.images.push_back({im.image_id, im.acquisition_index});
        s.eyes.push_back(std::move(se));
    }
    return s;
}

void save_study_dir(const Study& study, const std::filesystem::path& directory) {
    std::filesystem::create_directories(directory);
    for (const auto& eye : study.eyes) {
        for (const auto& im : eye.images) write_png(im.pixels, directory / im.image_id);
    }
    write_json_file(directory / "sidecar.json", to_json(sidecar_of(study)));
}

Json to_json(const calibration::Calibrator& calibrator) {
    return std::visit(
        [](const auto& c) -> Json {
            using T = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<T, calibration::BetaCalibrator>) {
                return Json{{"type", "beta"}, {"a", c.a}, {"b", c.b}, {"c", c.c}};
            } else if constexpr (std::is_same_v<T, calibration::IsotonicCalibrator>) {
                Json knots = Json::array();
                for (const auto& k : c.knots) knots.push_back(Json::array({k.score, k.value}));
                return Json{{"type", "isotonic"}, {"knots", std::move(knots)}};
            } else {
                return Json{{"type", "identity"}};
            }
        },
        calibrator);
}

calibration::Calibrator calibrator_from_json(const Json& j) {
    if (j.is_null()) return calibration::IdentityCalibrator{};
    const auto type = get<std::string>(j, "type");
    if (type == "identity") return calibration::IdentityCalibrator{};
    if (type == "beta") return calibration::BetaCalibrator{get<double>(j, "a"), get<double>(j, "b"), get<double>(j, "c")};
    if (type == "isotonic") {
        calibration::IsotonicCalibrator iso;
        for (const auto& k : field(j, "knots")) {
            if (!k.is_array() || k.size() != 2) fail(ErrorKind::Parse, "isotonic knot must be [score, value]");
            iso.knots.push_back({k[0].get<double>(), k[1].get<double>()});
        }
        if (iso.knots.empty()) fail(ErrorKind::Parse, "isotonic calibrator without knots");
        return iso;
    }
    fail(ErrorKind::Parse, "unknown calibrator type '" + type + "'");
}

Json to_json(const calibration::OperatingPoint& op) {
    return Json{{"t_dr", op.t_dr}, {"t_ng", op.t_ng}, {"t_prime", op.t_prime}};
}

calibration::OperatingPoint operating_point_from_json(const Json& j) {
    calibration::OperatingPoint op;
    op.t_dr = j.value("t_dr", op.t_dr);
    op.t_ng = j.value("t_ng", op.t_ng);
    op.t_prime = j.value("t_prime", op.t_prime);
    return op;
}

gold::LabeledEye labeled_eye_from_json(const Json& j) {
    return parsing("labeled eye", [&] {
        gold::LabeledEye eye;
        eye.eye_id = get<std::string>(j, "eye_id");
        eye.study_id = optional_string(j, "study_id");
        const auto& labels = field(j, "labels");
        if (!labels.is_array() || labels.size() != 3) fail(ErrorKind::Parse, "labels must hold three entries");
        for (std::size_t i = 0; i < 3; ++i) eye.labels[i] = parse_screening_label(labels[i].get<std::string>());
        eye.system_output = eye_proposal_from_json(field(j, "system"));
        eye.system_output.eye_id = eye.eye_id;
        return eye;
    });
}

Json to_json(const gold::LabeledEye& eye) {
    Json labels = Json::array();
    for (auto l : eye.labels) labels.push_back(std::string(to_short_code(l)));
    Json j{{"eye_id", eye.eye_id}, {"labels", std::move(labels)}, {"system", to_json(eye.system_output)}};
    if (eye.study_id) j["study_id"] = *eye.study_id;
    return j;
}

Json to_json(const analytics::ScreeningEvent& e) {
    Json j;
    j["study_id"] = e.study_id;
    j["timestamp"] = e.timestamp;
    j["gp_id"] = nullable(e.gp_id);
    if (e.ai_proposal) {
        Json cats = Json::array();
        for (auto c : e.ai_proposal->categories) cats.push_back(std::string(to_short_code(c)));
        j["ai_proposal"] = {{"refer", e.ai_proposal->refer}, {"categories", std::move(cats)}};
    } else {
        j["ai_proposal"] = nullptr;
    }
    j["gp_decision"] = e.gp_refer ? Json{{"refer", *e.gp_refer}} : Json(nullptr);
    if (e.second_level) {
        Json grade = nullptr;
        if (e.second_level->grade) {
            grade = *e.second_level->grade == analytics::IcdrGrade::NotGradable
                        ? Json("NG")
                        : Json(static_cast<int>(*e.second_level->grade));
        }
        j["second_level"] = {{"exam_appointed", e.second_level->exam_appointed}, {"icdr_grade", grade}};
    } else {
        j["second_level"] = nullptr;
    }
    j["pressure_referral"] = e.pressure_referral;
    return j;
}

analytics::ScreeningEvent screening_event_from_json(const Json& j) {
    return parsing("screening event", [&] {
        analytics::ScreeningEvent e;
        e.study_id = get<std::string>(j, "study_id");
        e.timestamp = get<std::string>(j, "timestamp");
        e.gp_id = optional_string(j, "gp_id");
        if (const auto it = j.find("ai_proposal"); it != j.end() && !it->is_null()) {
            analytics::AiProposalRecord ai;
            ai.refer = get<bool>(*it, "refer");
            if (const auto c = it->find("categories"); c != it->end()) {
                for (const auto& s : *c) ai.categories.push_back(parse_screening_label(s.get<std::string>()));
            }
            e.ai_proposal = std::move(ai);
        }
        if (const auto it = j.find("gp_decision"); it != j.end() && !it->is_null()) {
            e.gp_refer = get<bool>(*it, "refer");
        }
        if (const auto it = j.find("second_level"); it != j.end() && !it->is_null()) {
            analytics::SecondLevel sl;
            sl.exam_appointed = get<bool>(*it, "exam_appointed");
            if (const auto g = it->find("icdr_grade"); g != it->end() && !g->is_null()) {
                if (g->is_string()) {
                    const auto s = g->get<std::string>();
                    if (s != "NG") fail(ErrorKind::Parse, "icdr_grade must be 0-4 or \"NG\"");
                    sl.grade = analytics::IcdrGrade::NotGradable;
                } else {
                    const int v = g->get<int>();
                    if (v < 0 || v > 4) fail(ErrorKind::Parse, "icdr_grade must be 0-4 or \"NG\"");
                    sl.grade = static_cast<analytics::IcdrGrade>(v);
                }
            }
            e.second_level = sl;
        }
        e.pressure_referral = j.value("pressure_referral", false);
        return e;
    });
}

Json to_json(const metrics::BootstrapCI& ci, const std::string& metric) {
    return Json{{"metric", metric}, {"point", ci.point}, {"ci_lo", ci.lo},  {"ci_hi", ci.hi},
                {"n", ci.n},         {"seed", ci.seed},   {"resamples", ci.resamples}, {"confidence", ci.confidence}};
}

namespace {

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

std::string csv_number(const std::optional<double>& v) {
    if (!v) return "";
    std::ostringstream out;
    out.precision(10);
    out << *v;
    return out.str();
}

}  // namespace

Json to_json(const analytics::AnnualSummary& s) {
    return Json{{"year", s.year},
                {"n_studies", s.n_studies},
                {"n_with_ai", s.n_with_ai},
                {"n_with_gp", s.n_with_gp},
                {"gp_referral_rate", s.gp_referral_rate},
                {"ai_referral_rate", s.ai_referral_rate},
                {"ai_dr_rate", s.ai_dr_rate},
                {"ai_nongradable_rate", s.ai_nongradable_rate},
                {"exam_rate", s.exam_rate},
                {"kappa_gp_vs_ai", optional_number(s.kappa_gp_vs_ai)}};
}

Json to_json(const analytics::GpRow& r) {
    return Json{{"gp_id", r.gp_id},
                {"n_studies", r.n_studies},
                {"n_paired", r.n_paired},
                {"pa", optional_number(r.pa)},
                {"na", optional_number(r.na)},
                {"kappa", optional_number(r.kappa)},
                {"referred_rate", r.referred_rate},
                {"exam_rate", r.exam_rate}};
}

Json to_json(const analytics::WorkloadCounterfactual& w) {
    return Json{{"total_studies", w.total_studies},
                {"gp_referred", w.gp_referred},
                {"ai_referred", w.ai_referred},
                {"current_visualizations", w.current_visualizations},
                {"autonomous_visualizations", w.autonomous_visualizations},
                {"reduction_factor", w.reduction_factor},
                {"referral_inflation", std::isfinite(w.referral_inflation) ? Json(w.referral_inflation) : Json(nullptr)}};
}

Json to_json(const analytics::FalseNegativeTally& t) {
    Json by_grade = Json::object();
    for (std::size_t g = 0; g < analytics::kIcdrGradeCount; ++g) {
        by_grade[std::string(analytics::to_string(static_cast<analytics::IcdrGrade>(g)))] = t.by_grade[g];
    }
    return Json{{"by_grade", by_grade}, {"graded_total", t.graded_total()}, {"ungraded", t.ungraded}};
}

Json to_json(const analytics::DriftRow& r) {
    return Json{{"month", r.rates.month},
                {"n_with_ai", r.rates.n_with_ai},
                {"referral_rate", r.rates.referral_rate},
                {"nongradable_rate", r.rates.nongradable_rate},
                {"referral_flag", r.referral_flag},
                {"nongradable_flag", r.nongradable_flag}};
}

std::string gp_table_csv(const std::vector<analytics::GpRow>& rows) {
    std::ostringstream out;
    out.precision(10);
    out << "gp_id,n_studies,pa,na,kappa,referred_rate,exam_rate\n";
    for (const auto& r : rows) {
        out << r.gp_id << ',' << r.n_studies << ',' << csv_number(r.pa) << ',' << csv_number(r.na) << ','
            << csv_number(r.kappa) << ',' << r.referred_rate << ',' << r.exam_rate << '\n';
    }
    return out.str();
}

namespace {

Json ci_json(const std::optional<metrics::BootstrapCI>& ci) {
    if (!ci) return nullptr;
    return Json{{"point", ci->point}, {"ci_lo", ci->lo}, {"ci_hi", ci->hi}, {"point_outside", ci->point_outside}};
}

Json counts_json(const metrics::ConfusionCounts& c) {
    return Json{{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn}};
}

}  // namespace

Json to_json(const gold::GoldReport& r) {
    Json tasks = Json::array();
    for (const auto& t : r.tasks) {
        tasks.push_back({{"task", static_cast<int>(t.task)},
                         {"n", t.n},
                         {"positives", t.positives},
                         {"counts", counts_json(t.counts)},
                         {"sensitivity", ci_json(t.sensitivity)},
                         {"specificity", ci_json(t.specificity)},
                         {"auc", optional_number(t.auc)}});
    }
    Json experts = Json::array();
    for (std::size_t e = 0; e < r.experts.size(); ++e) {
        const auto& c = r.experts[e];
        Json row{{"expert", e + 1}, {"counts", counts_json(c)}};
        row["sensitivity"] = c.tp + c.fn ? Json(static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn)) : Json(nullptr);
        row["specificity"] = c.tn + c.fp ? Json(static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp)) : Json(nullptr);
        experts.push_back(std::move(row));
    }
    return Json{{"n_eyes", r.n_eyes},
                {"n_discarded", r.n_discarded},
                {"tasks", tasks},
                {"experts", experts},
                {"study_sensitivity", ci_json(r.study_sensitivity)},
                {"study_specificity", ci_json(r.study_specificity)}};
}

Json to_json(const cohort::CohortConfig& c) {
    Json gps = Json::array();
    for (const auto& g : c.gp_profiles) {
        gps.push_back({{"gp_id", g.gp_id},
                       {"sensitivity", g.sensitivity},
                       {"specificity", g.specificity},
                       {"ai_trust", g.ai_trust},
                       {"weight", g.weight}});
    }
    return Json{{"n_studies", c.n_studies},
                {"start_year", c.start_year},
                {"end_year", c.end_year},
                {"deployment_year", c.deployment_year},
                {"gp_profiles", gps},
                {"prevalence", c.prevalence},
                {"nongradable_rate", c.nongradable_rate},
                {"quality_drift", c.quality_drift},
                {"ai_sensitivity", c.ai_sensitivity},
                {"ai_specificity", c.ai_specificity},
                {"ai_missing_rate", c.ai_missing_rate},
                {"pressure_referral_rate", c.pressure_referral_rate},
                {"with_images", c.with_images},
                {"image_size", c.image_size}};
}

cohort::CohortConfig cohort_config_from_json(const Json& j) {
    cohort::CohortConfig c;
    try {
        if (!j.is_object()) fail(ErrorKind::Config, "cohort config must be an object");
        c.n_studies = j.value("n_studies", c.n_studies);
        if (const auto it = j.find("years"); it != j.end()) {
            if (!it->is_array() || it->size() != 2) fail(ErrorKind::Config, "years must be [start, end]");
            c.start_year = (*it)[0].get<int>();
            c.end_year = (*it)[1].get<int>();
        }
        c.start_year = j.value("start_year", c.start_year);
        c.end_year = j.value("end_year", c.end_year);
        c.deployment_year = j.value("deployment_year", c.deployment_year);
        if (const auto it = j.find("gp_profiles"); it != j.end()) {
            c.gp_profiles.clear();
            for (const auto& g : *it) {
                cohort::GpProfile p;
                p.gp_id = g.at("gp_id").get<std::string>();
                p.sensitivity = g.value("sensitivity", p.sensitivity);
                p.specificity = g.value("specificity", p.specificity);
                p.ai_trust = g.value("ai_trust", p.ai_trust);
                p.weight = g.value("weight", p.weight);
                c.gp_profiles.push_back(std::move(p));
            }
        }
        c.prevalence = j.value("prevalence", c.prevalence);
        c.nongradable_rate = j.value("nongradable_rate", c.nongradable_rate);
        c.quality_drift = j.value("quality_drift", c.quality_drift);
        c.ai_sensitivity = j.value("ai_sensitivity", c.ai_sensitivity);
        c.ai_specificity = j.value("ai_specificity", c.ai_specificity);
        c.ai_missing_rate = j.value("ai_missing_rate", c.ai_missing_rate);
        c.pressure_referral_rate = j.value("pressure_referral_rate", c.pressure_referral_rate);
        c.with_images = j.value("with_images", c.with_images);
        c.image_size = j.value("image_size", c.image_size);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Config, std::string("cohort config: ") + e.what());
    }
    c.validate();
    return c;
}

Json to_json(const cohort::LatentTruth& t) {
    return Json{{"referable_dr", t.referable_dr},
                {"non_gradable", t.non_gradable},
                {"affected_eye", std::string(to_string(t.affected_eye))}};
}

std::vector<Json> read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
    std::vector<Json> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            rows.push_back(Json::parse(line));
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorKind::Parse, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return rows;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& rows) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
    for (const auto& r : rows) out << r.dump() << '\n';
}

Json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Parse, path.string() + ": " + e.what());
    }
}

void write_json_file(const std::filesystem::path& path, const Json& j) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
    out << j.dump(2) << '\n';
}

std::string annotations_csv(const std::vector<AnnotationCircle>& circles) {
    std::ostringstream out;
    out.precision(10);
    out << "cx,cy,r\n";
    for (const auto& c : circles) out << c.cx << ',' << c.cy << ',' << c.r << '\n';
    return out.str();
}

}  // namespace retscreen::io
