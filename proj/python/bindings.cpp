#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "retscreen/analytics.hpp"
#include "retscreen/attribution.hpp"
#include "retscreen/calibration.hpp"
#include "retscreen/config.hpp"
#include "retscreen/enhancement.hpp"
#include "retscreen/error.hpp"
#include "retscreen/gold_standard.hpp"
#include "retscreen/inference.hpp"
#include "retscreen/metrics.hpp"
#include "retscreen/orchestrator.hpp"
#include "retscreen/serialization.hpp"
#include "retscreen/synthetic.hpp"

namespace py = pybind11;
using namespace retscreen;

namespace {

using ImageArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

RgbImage to_image(const ImageArray& array) {
    const auto info = array.request();
    if (info.ndim != 3 || info.shape[2] != 3) throw py::value_error("image must have shape (H, W, 3)");
    RgbImage img(static_cast<int>(info.shape[1]), static_cast<int>(info.shape[0]));
    std::memcpy(img.data.data(), info.ptr, img.data.size());
    return img;
}

py::array_t<std::uint8_t> to_array(const RgbImage& img) {
    py::array_t<std::uint8_t> out({img.height, img.width, 3});
    std::memcpy(out.mutable_data(), img.data.data(), img.data.size());
    return out;
}

py::object to_python(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

py::dict report_dict(const calibration::CalibrationReport& r) {
    py::list bins;
    for (const auto& b : r.bins) {
        bins.append(py::dict(py::arg("count") = b.count, py::arg("mean_prob") = b.mean_prob,
                             py::arg("frac_positive") = b.frac_positive));
    }
    return py::dict(py::arg("ece") = r.ece, py::arg("mce") = r.mce, py::arg("brier") = r.brier, py::arg("bins") = bins);
}

py::dict workload_dict(const analytics::WorkloadCounterfactual& w) {
    return py::dict(py::arg("total_studies") = w.total_studies, py::arg("gp_referred") = w.gp_referred,
                    py::arg("ai_referred") = w.ai_referred,
                    py::arg("current_visualizations") = w.current_visualizations,
                    py::arg("autonomous_visualizations") = w.autonomous_visualizations,
                    py::arg("reduction_factor") = w.reduction_factor,
                    py::arg("referral_inflation") = w.referral_inflation);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Retinal screening toolkit: calibration, metrics, enhancement, screening and attribution";

    static py::handle error_type = py::exception<Error>(m, "RetscreenError", PyExc_ValueError).release();
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::object instance = py::reinterpret_borrow<py::object>(error_type)(e.what());
            instance.attr("kind") = std::string(to_string(e.kind()));
            PyErr_SetObject(error_type.ptr(), instance.ptr());
        }
    });

    // calibration
    m.def("transform_score", &calibration::transform_score, py::arg("p"), py::arg("threshold"),
          py::arg("boundary") = 0.5, "Piecewise-linear map sending threshold to boundary and keeping 0 fixed.");
    m.def("combine_referral_score", &calibration::combine_referral_score, py::arg("dr_score"),
          py::arg("non_gradability_score"));

    py::class_<calibration::BetaCalibrator>(m, "BetaCalibrator")
        .def(py::init<double, double, double>(), py::arg("a") = 1.0, py::arg("b") = 1.0, py::arg("c") = 0.0)
        .def_readwrite("a", &calibration::BetaCalibrator::a)
        .def_readwrite("b", &calibration::BetaCalibrator::b)
        .def_readwrite("c", &calibration::BetaCalibrator::c)
        .def("__call__", &calibration::BetaCalibrator::operator(), py::arg("p"))
        .def("__repr__", [](const calibration::BetaCalibrator& c) {
            return "BetaCalibrator(a=" + std::to_string(c.a) + ", b=" + std::to_string(c.b) + ", c=" + std::to_string(c.c) + ")";
        });

    py::class_<calibration::IsotonicCalibrator>(m, "IsotonicCalibrator")
        .def(py::init([](const std::vector<std::pair<double, double>>& knots) {
                 calibration::IsotonicCalibrator c;
                 for (const auto& [s, v] : knots) c.knots.push_back({s, v});
                 return c;
             }),
             py::arg("knots"))
        .def_property_readonly("knots",
                               [](const calibration::IsotonicCalibrator& c) {
                                   std::vector<std::pair<double, double>> out;
                                   for (const auto& k : c.knots) out.emplace_back(k.score, k.value);
                                   return out;
                               })
        .def("__call__", &calibration::IsotonicCalibrator::operator(), py::arg("p"));

    m.def(
        "fit_beta_calibrator",
        [](const std::vector<double>& s, const std::vector<int>& y) { return calibration::fit_beta_calibrator(s, y); },
        py::arg("scores"), py::arg("labels"));
    m.def(
        "fit_isotonic_calibrator",
        [](const std::vector<double>& s, const std::vector<int>& y) { return calibration::fit_isotonic_calibrator(s, y); },
        py::arg("scores"), py::arg("labels"));
    m.def(
        "pool_adjacent_violators",
        [](const std::vector<double>& v, const std::vector<double>& w) { return calibration::pool_adjacent_violators(v, w); },
        py::arg("values"), py::arg("weights") = std::vector<double>{});
    m.def(
        "calibration_report",
        [](const std::vector<double>& s, const std::vector<int>& y, int bins) {
            return report_dict(calibration::calibration_report(s, y, bins));
        },
        py::arg("scores"), py::arg("labels"), py::arg("n_bins") = 10);
    m.def(
        "select_threshold",
        [](const std::vector<double>& s, const std::vector<int>& y) {
            const auto c = calibration::select_threshold(s, y);
            return py::dict(py::arg("threshold") = c.threshold, py::arg("mean_recall") = c.mean_recall,
                            py::arg("sensitivity") = c.sensitivity, py::arg("specificity") = c.specificity);
        },
        py::arg("scores"), py::arg("labels"));

    // metrics
    m.def(
        "auc_binary",
        [](const std::vector<double>& s, const std::vector<int>& y) { return metrics::auc_binary(s, y); },
        py::arg("scores"), py::arg("labels"));
    m.def("weighted_ovr_auc", [](const std::vector<std::vector<double>>& scores, const std::vector<int>& y,
                                 int k) { return metrics::weighted_ovr_auc(scores, y, k); },
          py::arg("score_matrix"), py::arg("labels"), py::arg("num_classes"));
    m.def(
        "cohen_kappa",
        [](const std::vector<int>& a, const std::vector<int>& b) { return metrics::cohen_kappa(a, b); },
        py::arg("labels_a"), py::arg("labels_b"));
    m.def(
        "sensitivity_specificity",
        [](const std::vector<int>& pred, const std::vector<int>& truth) {
            const auto r = metrics::sensitivity_specificity(metrics::confusion(pred, truth));
            return std::make_pair(r.sensitivity, r.specificity);
        },
        py::arg("predictions"), py::arg("truths"));
    m.def(
        "positive_negative_agreement",
        [](const std::vector<int>& ai, const std::vector<int>& human) {
            const auto r = metrics::positive_negative_agreement(ai, human);
            return py::dict(py::arg("pa") = r.pa, py::arg("na") = r.na, py::arg("kappa") = r.kappa,
                            py::arg("ai_positive") = r.ai_positive, py::arg("ai_negative") = r.ai_negative,
                            py::arg("n") = r.n);
        },
        py::arg("ai"), py::arg("human"));
    m.def(
        "bootstrap_ci",
        [](std::size_t n, const std::function<std::optional<double>(std::vector<std::size_t>)>& statistic,
           int resamples, double confidence, std::uint64_t seed) {
            const auto r = metrics::bootstrap_ci(
                n, [&](std::span<const std::size_t> idx) { return statistic({idx.begin(), idx.end()}); },
                {resamples, confidence, seed});
            return py::dict(py::arg("point") = r.point, py::arg("lo") = r.lo, py::arg("hi") = r.hi,
                            py::arg("confidence") = r.confidence, py::arg("resamples") = r.resamples,
                            py::arg("seed") = r.seed);
        },
        py::arg("n_units"), py::arg("statistic"), py::arg("resamples") = 2000, py::arg("confidence") = 0.95,
        py::arg("seed") = 0, "Percentile bootstrap; statistic receives a list of resampled unit indices.");

    // sizing and workload
    m.def("adjust_for_prevalence", &gold::adjust_for_prevalence, py::arg("n1"), py::arg("prev1"), py::arg("prev2"));
    m.def(
        "sample_size_for_sensitivity",
        [](double se, double d, double z, double prev) {
            const auto s = gold::sample_size_for_sensitivity(se, d, z, prev);
            return py::dict(py::arg("positives_needed") = s.positives_needed, py::arg("total") = s.total);
        },
        py::arg("expected_sensitivity"), py::arg("half_width"), py::arg("z"), py::arg("prevalence"));
    m.def(
        "workload_counterfactual",
        [](long long total, long long gp, long long ai) {
            return workload_dict(analytics::workload_counterfactual(total, gp, ai));
        },
        py::arg("total"), py::arg("gp_referred"), py::arg("ai_referred"));

    // images
    m.def(
        "synthetic_fundus",
        [](int size, const std::string& field, int lesions, double contrast, double blur, bool mirrored,
           std::uint64_t seed) {
            SyntheticFundusSpec spec;
            spec.size = size;
            if (field == "central") spec.field = SyntheticField::Central;
            else if (field == "nasal") spec.field = SyntheticField::Nasal;
            else if (field == "none") spec.field = SyntheticField::NoDisc;
            else throw py::value_error("field must be central, nasal or none");
            spec.lesions = lesions;
            spec.contrast = contrast;
            spec.blur_sigma = blur;
            spec.mirrored = mirrored;
            spec.seed = seed;
            return to_array(make_synthetic_fundus(spec));
        },
        py::arg("size") = 256, py::arg("field") = "central", py::arg("lesions") = 0, py::arg("contrast") = 1.0,
        py::arg("blur") = 0.0, py::arg("mirrored") = false, py::arg("seed") = 0);
    m.def(
        "enhance",
        [](const ImageArray& image, std::pair<int, int> tiles, double clip, double lo, double hi) {
            enhancement::EnhanceParams p;
            p.clahe = {tiles.first, tiles.second, clip};
            p.stretch = {lo, hi};
            p.clahe.validate();
            return to_array(enhancement::enhance(to_image(image), p));
        },
        py::arg("image"), py::arg("tiles") = std::make_pair(8, 8), py::arg("clip") = 2.0, py::arg("lo") = 1.0,
        py::arg("hi") = 99.0);
    m.def(
        "locate_fundus",
        [](const ImageArray& image) {
            const auto g = enhancement::locate_fundus(to_image(image));
            return py::dict(py::arg("cx") = g.cx, py::arg("cy") = g.cy, py::arg("r") = g.r,
                            py::arg("bbox") = py::make_tuple(g.x0, g.y0, g.x1, g.y1), py::arg("fallback") = g.fallback);
        },
        py::arg("image"));
    m.def("read_image", [](const std::string& path) { return to_array(read_image(path)); }, py::arg("path"));
    m.def(
        "write_png", [](const ImageArray& image, const std::string& path) { write_png(to_image(image), path); },
        py::arg("image"), py::arg("path"));

    // inference and screening
    m.def(
        "score_image",
        [](const ImageArray& image, const std::string& backend, std::uint64_t seed) {
            const auto b = inference::make_backend(backend, seed);
            const auto img = to_image(image);
            const auto fields = b->classify_field(img);
            py::dict field_probs;
            for (auto c : kFieldCategories) field_probs[py::str(std::string(to_string(c)))] = fields[c];
            return py::dict(py::arg("dr") = b->score_dr(img), py::arg("non_gradability") = b->score_gradability(img),
                            py::arg("fields") = field_probs);
        },
        py::arg("image"), py::arg("backend") = "heuristic", py::arg("seed") = 0);
    m.def(
        "screen_study_dir",
        [](const std::string& directory, const std::string& config_path, const std::string& backend) {
            auto cfg = config_path.empty() ? AppConfig{} : load_config(config_path);
            if (!backend.empty()) cfg.backend = backend;
            const auto b = inference::make_backend(cfg.backend, cfg.seed, {cfg.timeout, cfg.remote_retries});
            return to_python(io::to_json(orchestrator::screen_study(io::load_study_dir(directory), *b, cfg.orchestrator())));
        },
        py::arg("directory"), py::arg("config") = "", py::arg("backend") = "",
        "Screens one study folder (sidecar.json plus images) and returns the proposal.");

    // attribution
    m.def(
        "integrated_gradients",
        [](const ImageArray& image, std::uint64_t seed, int steps) {
            const inference::AnalyticStubModel model(seed);
            const auto map = attribution::integrated_gradients(model, to_image(image),
                                                               inference::OutputSelector::DrProbability, steps);
            py::array_t<double> out({map.height, map.width});
            std::copy(map.values.begin(), map.values.end(), out.mutable_data());
            return out;
        },
        py::arg("image"), py::arg("seed") = 0, py::arg("steps") = 20,
        "Attribution map of the analytic model's DR probability against a black baseline.");
    m.def(
        "cluster_points",
        [](const std::vector<std::pair<double, double>>& pts, double eps, int min_size) {
            std::vector<attribution::Point> points;
            for (const auto& [x, y] : pts) points.push_back({x, y});
            attribution::ClusterParams params;
            params.eps = eps;
            params.min_size = min_size;
            return attribution::cluster_points(points, params).labels;
        },
        py::arg("points"), py::arg("eps") = 23.0, py::arg("min_size") = 4, "Cluster label per point, -1 for noise.");
    m.def(
        "annotate",
        [](const ImageArray& image, std::uint64_t seed, int steps, double eps, int min_size, double percentile) {
            const inference::AnalyticStubModel model(seed);
            const auto map = attribution::integrated_gradients(model, to_image(image),
                                                               inference::OutputSelector::DrProbability, steps);
            attribution::ClusterParams params;
            params.eps = eps;
            params.min_size = min_size;
            params.salience_percentile = percentile;
            py::list out;
            for (const auto& c : attribution::annotate(map, params)) {
                out.append(py::dict(py::arg("cx") = c.cx, py::arg("cy") = c.cy, py::arg("r") = c.r));
            }
            return out;
        },
        py::arg("image"), py::arg("seed") = 0, py::arg("steps") = 20, py::arg("eps") = 23.0, py::arg("min_size") = 4,
        py::arg("percentile") = 99.5);
}
