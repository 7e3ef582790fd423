#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include "retscreen/analytics.hpp"
#include "retscreen/attribution.hpp"
#include "retscreen/calibration.hpp"
#include "retscreen/cohort.hpp"
#include "retscreen/config.hpp"
#include "retscreen/enhancement.hpp"
#include "retscreen/error.hpp"
#include "retscreen/gold_standard.hpp"
#include "retscreen/http_server.hpp"
#include "retscreen/inference.hpp"
#include "retscreen/orchestrator.hpp"
#include "retscreen/serialization.hpp"
#include "retscreen/service.hpp"

namespace fs = std::filesystem;
using namespace retscreen;
using Json = nlohmann::json;

namespace {

struct ScoreTable {
    std::vector<double> scores;
    std::vector<int> labels;
};

// CSV with a header containing "score" and "label" columns.
ScoreTable read_scores_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) fail(ErrorKind::Parse, path.string() + ": empty file");
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) header.push_back(cell);
    }
    int score_col = -1, label_col = -1;
    for (int i = 0; i < static_cast<int>(header.size()); ++i) {
        if (header[i] == "score") score_col = i;
        if (header[i] == "label") label_col = i;
    }
    if (score_col < 0 || label_col < 0) fail(ErrorKind::Parse, path.string() + ": header needs score and label columns");
    ScoreTable t;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        const auto needed = static_cast<std::size_t>(std::max(score_col, label_col));
        if (cells.size() <= needed) fail(ErrorKind::Parse, path.string() + ":" + std::to_string(lineno) + ": short row");
        try {
            t.scores.push_back(std::stod(cells[score_col]));
            t.labels.push_back(std::stoi(cells[label_col]));
        } catch (const std::exception&) {
            fail(ErrorKind::Parse, path.string() + ":" + std::to_string(lineno) + ": not a number");
        }
    }
    return t;
}

AppConfig load_or_default(const std::string& path) {
    return path.empty() ? AppConfig{} : load_config(path);
}

void print_json(const Json& j) { std::cout << j.dump(2) << '\n'; }

std::vector<fs::path> study_dirs(const fs::path& root) {
    if (fs::exists(root / "sidecar.json")) return {root};
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (entry.is_directory() && fs::exists(entry.path() / "sidecar.json")) dirs.push_back(entry.path());
    }
    std::sort(dirs.begin(), dirs.end());
    return dirs;
}

std::atomic<service::HttpServer*> g_server{nullptr};

void handle_signal(int) {
    if (auto* s = g_server.load()) s->stop();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Retinal screening toolkit: enhancement, screening proposals, calibration and programme analytics"};
    app.require_subcommand(1);

    // screen
    std::string screen_in, screen_out, screen_config, screen_backend;
    auto* screen = app.add_subcommand("screen", "Screen every study directory under INPUT and write proposals as JSONL");
    screen->add_option("input", screen_in, "Directory holding study folders (each with sidecar.json)")->required();
    screen->add_option("-o,--out", screen_out, "Output JSONL (stdout when omitted)");
    screen->add_option("-c,--config", screen_config, "Config JSON");
    screen->add_option("--backend", screen_backend, "Override backend: analytic | heuristic | remote:<url>");

    // enhance
    std::string enh_in, enh_out, enh_tiles = "8x8";
    double enh_clip = 2.0, enh_lo = 1.0, enh_hi = 99.0;
    auto* enhance = app.add_subcommand("enhance", "Crop, stretch and CLAHE-enhance one fundus image");
    enhance->add_option("input", enh_in)->required();
    enhance->add_option("output", enh_out)->required();
    enhance->add_option("--tiles", enh_tiles, "CLAHE tile grid, RxC")->capture_default_str();
    enhance->add_option("--clip", enh_clip, "CLAHE clip limit")->capture_default_str();
    enhance->add_option("--lo", enh_lo, "Lower percentile")->capture_default_str();
    enhance->add_option("--hi", enh_hi, "Upper percentile")->capture_default_str();

    // annotate
    std::string ann_in, ann_out, ann_backend = "analytic", ann_target = "dr_prob";
    std::uint64_t ann_seed = 0;
    int ann_steps = 20;
    attribution::ClusterParams ann_params;
    auto* annotate = app.add_subcommand("annotate", "Integrated Gradients + clustering: lesion circles as CSV");
    annotate->add_option("input", ann_in)->required();
    annotate->add_option("-o,--out", ann_out, "CSV output (stdout when omitted)");
    annotate->add_option("--backend", ann_backend, "Gradient-capable backend")->capture_default_str();
    annotate->add_option("--seed", ann_seed)->capture_default_str();
    annotate->add_option("--target", ann_target, "dr_prob | dr_logit | ng_prob | ng_logit")->capture_default_str();
    annotate->add_option("--steps", ann_steps)->capture_default_str();
    annotate->add_option("--eps", ann_params.eps)->capture_default_str();
    annotate->add_option("--min-size", ann_params.min_size)->capture_default_str();
    annotate->add_option("--percentile", ann_params.salience_percentile)->capture_default_str();

    // calibrate
    std::string cal_in, cal_out, cal_method = "beta";
    int cal_bins = 10;
    auto* calibrate = app.add_subcommand("calibrate", "Fit a calibrator on a score,label CSV");
    calibrate->add_option("input", cal_in)->required();
    calibrate->add_option("-o,--out", cal_out, "Calibrator JSON output");
    calibrate->add_option("--method", cal_method, "beta | isotonic")->capture_default_str();
    calibrate->add_option("--bins", cal_bins)->capture_default_str();

    // choose-threshold
    std::string thr_in, thr_calibrator;
    auto* choose = app.add_subcommand("choose-threshold", "Pick the threshold maximising mean recall");
    choose->add_option("input", thr_in, "score,label CSV")->required();
    choose->add_option("--calibrator", thr_calibrator, "Apply this calibrator JSON first");

    // evaluate-gold
    std::string gold_in, gold_out;
    double gold_tprime = 0.5;
    metrics::BootstrapOptions gold_boot;
    auto* gold = app.add_subcommand("evaluate-gold", "Evaluate system output against three-expert labels (JSONL)");
    gold->add_option("input", gold_in)->required();
    gold->add_option("-o,--out", gold_out, "Report JSON");
    gold->add_option("--t-prime", gold_tprime)->capture_default_str();
    gold->add_option("--resamples", gold_boot.resamples)->capture_default_str();
    gold->add_option("--confidence", gold_boot.confidence)->capture_default_str();
    gold->add_option("--seed", gold_boot.seed)->capture_default_str();

    // analyze-program
    std::string prog_in, prog_out, prog_from, prog_to;
    auto* program = app.add_subcommand("analyze-program", "Annual, per-GP, workload, false-negative and drift reports");
    program->add_option("input", prog_in, "Screening-event JSONL, or a service store directory")->required();
    program->add_option("-o,--out-dir", prog_out, "Write annual.json, gp_table.{json,csv}, workload.json, false_negatives.json, drift.json");
    program->add_option("--from", prog_from, "Period start (timestamp prefix, inclusive)");
    program->add_option("--to", prog_to, "Period end (timestamp prefix, inclusive)");

    // gen-cohort
    std::string coh_config, coh_out, coh_truth, coh_images;
    std::uint64_t coh_seed = 0;
    std::size_t coh_n = 0;
    auto* gen = app.add_subcommand("gen-cohort", "Generate a synthetic screening-programme log");
    gen->add_option("-c,--config", coh_config, "Cohort config JSON");
    gen->add_option("--seed", coh_seed)->capture_default_str();
    gen->add_option("-n,--n-studies", coh_n, "Override n_studies");
    gen->add_option("-o,--out", coh_out, "Event JSONL output")->required();
    gen->add_option("--truth", coh_truth, "Latent-truth JSONL output");
    gen->add_option("--images", coh_images, "Write one synthetic study folder per event here");

    // serve
    std::string srv_config, srv_host = "127.0.0.1", srv_store;
    int srv_port = 8080;
    auto* serve = app.add_subcommand("serve", "Run the screening HTTP service");
    serve->add_option("-c,--config", srv_config, "Config JSON");
    serve->add_option("--host", srv_host)->capture_default_str();
    serve->add_option("--port", srv_port)->capture_default_str();
    serve->add_option("--store", srv_store, "Override store_path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*screen) {
            auto cfg = load_or_default(screen_config);
            if (!screen_backend.empty()) cfg.backend = screen_backend;
            inference::RemoteOptions remote{cfg.timeout, cfg.remote_retries};
            const auto backend = inference::make_backend(cfg.backend, cfg.seed, remote);
            const auto ocfg = cfg.orchestrator();
            std::vector<Json> rows;
            for (const auto& dir : study_dirs(screen_in)) {
                const auto study = io::load_study_dir(dir);
                rows.push_back(io::to_json(orchestrator::screen_study(study, *backend, ocfg)));
            }
            if (screen_out.empty()) {
                for (const auto& r : rows) std::cout << r.dump() << '\n';
            } else {
                io::write_jsonl(screen_out, rows);
                std::cerr << "screened " << rows.size() << " studies -> " << screen_out << '\n';
            }
        } else if (*enhance) {
            enhancement::EnhanceParams p;
            std::tie(p.clahe.tile_rows, p.clahe.tile_cols) = parse_tile_grid(enh_tiles);
            p.clahe.clip_limit = enh_clip;
            p.stretch = {enh_lo, enh_hi};
            p.clahe.validate();
            require(enh_lo >= 0 && enh_lo < enh_hi && enh_hi <= 100, "percentiles must satisfy 0 <= lo < hi <= 100");
            write_png(enhancement::enhance(read_image(enh_in), p), enh_out);
        } else if (*annotate) {
            ann_params.validate();
            const auto backend = inference::make_backend(ann_backend, ann_seed);
            inference::OutputSelector target = inference::OutputSelector::DrProbability;
            if (ann_target == "dr_logit") target = inference::OutputSelector::DrLogit;
            else if (ann_target == "ng_prob") target = inference::OutputSelector::NonGradabilityProbability;
            else if (ann_target == "ng_logit") target = inference::OutputSelector::NonGradabilityLogit;
            else require(ann_target == "dr_prob", "unknown --target " + ann_target);
            const auto map = attribution::integrated_gradients(*backend, read_image(ann_in), target, ann_steps);
            const auto csv = io::annotations_csv(attribution::annotate(map, ann_params));
            if (ann_out.empty()) std::cout << csv;
            else write_file_bytes(ann_out, std::span(reinterpret_cast<const std::uint8_t*>(csv.data()), csv.size()));
        } else if (*calibrate) {
            const auto t = read_scores_csv(cal_in);
            calibration::Calibrator cal;
            if (cal_method == "beta") cal = calibration::fit_beta_calibrator(t.scores, t.labels);
            else if (cal_method == "isotonic") cal = calibration::fit_isotonic_calibrator(t.scores, t.labels);
            else fail(ErrorKind::Precondition, "unknown --method " + cal_method);
            std::vector<double> after(t.scores.size());
            for (std::size_t i = 0; i < after.size(); ++i) after[i] = calibration::calibrate(cal, t.scores[i]);
            const auto before = calibration::calibration_report(t.scores, t.labels, cal_bins);
            const auto post = calibration::calibration_report(after, t.labels, cal_bins);
            const Json cj = io::to_json(cal);
            if (!cal_out.empty()) io::write_json_file(cal_out, cj);
            print_json({{"calibrator", cj},
                        {"before", {{"ece", before.ece}, {"mce", before.mce}, {"brier", before.brier}}},
                        {"after", {{"ece", post.ece}, {"mce", post.mce}, {"brier", post.brier}}}});
        } else if (*choose) {
            auto t = read_scores_csv(thr_in);
            if (!thr_calibrator.empty()) {
                const auto cal = io::calibrator_from_json(io::read_json_file(thr_calibrator));
                for (auto& s : t.scores) s = calibration::calibrate(cal, s);
            }
            const auto c = calibration::select_threshold(t.scores, t.labels);
            print_json({{"threshold", c.threshold},
                        {"mean_recall", c.mean_recall},
                        {"sensitivity", c.sensitivity},
                        {"specificity", c.specificity}});
        } else if (*gold) {
            std::vector<gold::LabeledEye> eyes;
            for (const auto& row : io::read_jsonl(gold_in)) eyes.push_back(io::labeled_eye_from_json(row));
            const Json report = io::to_json(gold::evaluate_gold(eyes, gold_tprime, gold_boot));
            if (!gold_out.empty()) io::write_json_file(gold_out, report);
            print_json(report);
        } else if (*program) {
            std::vector<analytics::ScreeningEvent> events;
            if (fs::is_directory(prog_in)) {
                AppConfig cfg;
                cfg.store_path = prog_in;
                service::ScreeningService svc({cfg, inference::make_backend("heuristic"), {}});
                events = svc.screening_events();
            } else {
                for (const auto& row : io::read_jsonl(prog_in)) events.push_back(io::screening_event_from_json(row));
            }
            analytics::Period period;
            if (!prog_from.empty()) period.from = prog_from;
            if (!prog_to.empty()) period.to = prog_to;
            std::vector<analytics::ScreeningEvent> in_period;
            for (const auto& e : events) {
                if (period.contains(e.timestamp)) in_period.push_back(e);
            }
            Json annual = Json::array();
            for (int y : analytics::years_present(in_period)) annual.push_back(io::to_json(analytics::annual_summary(in_period, y)));
            const auto rows = analytics::gp_table(in_period);
            Json gp = Json::array();
            for (const auto& r : rows) gp.push_back(io::to_json(r));
            Json workload = nullptr;
            try {
                workload = io::to_json(analytics::workload_from_events(in_period));
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::UndefinedRate) throw;
            }
            const Json fn = io::to_json(analytics::false_negative_breakdown(in_period));
            Json drift = Json::array();
            for (const auto& r : analytics::drift_report(in_period)) drift.push_back(io::to_json(r));
            const Json report{{"n_events", in_period.size()},
                              {"annual", annual},
                              {"gp_table", gp},
                              {"workload", workload},
                              {"false_negatives", fn},
                              {"drift", drift}};
            if (!prog_out.empty()) {
                const fs::path out(prog_out);
                io::write_json_file(out / "annual.json", annual);
                io::write_json_file(out / "gp_table.json", gp);
                const auto csv = io::gp_table_csv(rows);
                write_file_bytes(out / "gp_table.csv",
                                 std::span(reinterpret_cast<const std::uint8_t*>(csv.data()), csv.size()));
                io::write_json_file(out / "workload.json", workload);
                io::write_json_file(out / "false_negatives.json", fn);
                io::write_json_file(out / "drift.json", drift);
            }
            print_json(report);
        } else if (*gen) {
            auto cfg = coh_config.empty() ? cohort::CohortConfig{} : io::cohort_config_from_json(io::read_json_file(coh_config));
            if (coh_n > 0) cfg.n_studies = coh_n;
            if (!coh_images.empty()) cfg.with_images = true;
            const auto c = cohort::generate_cohort(cfg, coh_seed);
            std::vector<Json> rows, truths;
            for (const auto& r : c.records) {
                rows.push_back(io::to_json(r.event));
                Json t = io::to_json(r.truth);
                t["study_id"] = r.event.study_id;
                truths.push_back(std::move(t));
            }
            io::write_jsonl(coh_out, rows);
            if (!coh_truth.empty()) io::write_jsonl(coh_truth, truths);
            if (cfg.with_images) {
                const fs::path root = coh_images.empty() ? fs::path(coh_out).parent_path() / "studies" : fs::path(coh_images);
                for (std::size_t i = 0; i < c.records.size(); ++i) {
                    const auto& r = c.records[i];
                    const auto study = cohort::render_study(r.event.study_id, r.truth, cfg.image_size, splitmix64(coh_seed + i));
                    io::save_study_dir(study, root / r.event.study_id);
                }
            }
            std::cerr << "generated " << rows.size() << " events -> " << coh_out << '\n';
        } else if (*serve) {
            auto cfg = load_or_default(srv_config);
            if (!srv_store.empty()) cfg.store_path = srv_store;
            service::ScreeningService svc({cfg, nullptr, {}});
            service::HttpServer server(svc);
            g_server = &server;
            std::signal(SIGINT, handle_signal);
            std::signal(SIGTERM, handle_signal);
            std::cerr << "serving on http://" << srv_host << ":" << srv_port << " (store " << cfg.store_path.string()
                      << ", backend " << svc.backend_name() << ")\n";
            server.run(srv_host, srv_port);
            g_server = nullptr;
        }
    } catch (const Error& e) {
        std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
        return e.kind() == ErrorKind::Precondition || e.kind() == ErrorKind::Parse || e.kind() == ErrorKind::Config ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
