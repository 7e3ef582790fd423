#include "retscreen/config.hpp"

#include "retscreen/error.hpp"
#include "retscreen/serialization.hpp"

namespace retscreen {

orchestrator::OrchestratorConfig AppConfig::orchestrator() const {
    orchestrator::OrchestratorConfig c;
    c.decision_boundary = thresholds.t_prime;
    c.dr_threshold = thresholds.t_dr;
    c.gradability_threshold = thresholds.t_ng;
    c.dr_calibrator = dr_calibrator;
    c.gradability_calibrator = gradability_calibrator;
    c.clustering = clustering;
    return c;
}

void AppConfig::validate() const {
    try {
        orchestrator().validate();
        enhance.clahe.validate();
        clustering.validate();
    } catch (const Error& e) {
        fail(ErrorKind::Config, e.what());
    }
    if (!(enhance.stretch.lo_pct >= 0.0 && enhance.stretch.lo_pct < enhance.stretch.hi_pct &&
          enhance.stretch.hi_pct <= 100.0)) {
        fail(ErrorKind::Config, "stretch percentiles must satisfy 0 <= lo < hi <= 100");
    }
    if (timeout.count() <= 0) fail(ErrorKind::Config, "timeout must be positive");
    if (backend.empty()) fail(ErrorKind::Config, "backend must be set");
}

std::pair<int, int> parse_tile_grid(const std::string& text) {
    const auto x = text.find_first_of("xX");
    if (x == std::string::npos) fail(ErrorKind::Config, "tile grid must look like 8x8, got '" + text + "'");
    try {
        std::size_t used_r = 0, used_c = 0;
        const int rows = std::stoi(text.substr(0, x), &used_r);
        const int cols = std::stoi(text.substr(x + 1), &used_c);
        if (used_r != x || used_c != text.size() - x - 1 || rows < 1 || cols < 1) throw std::invalid_argument(text);
        return {rows, cols};
    } catch (const std::logic_error&) {
        fail(ErrorKind::Config, "tile grid must look like 8x8, got '" + text + "'");
    }
}

AppConfig config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) fail(ErrorKind::Config, "config must be a JSON object");
    AppConfig c;
    try {
        c.backend = j.value("backend", c.backend);
        if (const auto it = j.find("thresholds"); it != j.end()) c.thresholds = io::operating_point_from_json(*it);
        if (const auto it = j.find("calibrators"); it != j.end()) {
            if (it->contains("dr")) c.dr_calibrator = io::calibrator_from_json((*it)["dr"]);
            if (it->contains("gradability")) c.gradability_calibrator = io::calibrator_from_json((*it)["gradability"]);
        }
        if (const auto it = j.find("clahe"); it != j.end()) {
            if (const auto t = it->find("tiles"); t != it->end()) {
                if (t->is_string()) {
                    std::tie(c.enhance.clahe.tile_rows, c.enhance.clahe.tile_cols) = parse_tile_grid(t->get<std::string>());
                } else if (t->is_array() && t->size() == 2) {
                    c.enhance.clahe.tile_rows = (*t)[0].get<int>();
                    c.enhance.clahe.tile_cols = (*t)[1].get<int>();
                } else {
                    fail(ErrorKind::Config, "clahe.tiles must be \"RxC\" or [R, C]");
                }
            }
            c.enhance.clahe.clip_limit = it->value("clip", c.enhance.clahe.clip_limit);
        }
        if (const auto it = j.find("stretch"); it != j.end()) {
            c.enhance.stretch.lo_pct = it->value("lo", c.enhance.stretch.lo_pct);
            c.enhance.stretch.hi_pct = it->value("hi", c.enhance.stretch.hi_pct);
        }
        if (const auto it = j.find("clustering"); it != j.end()) {
            c.clustering.eps = it->value("eps", c.clustering.eps);
            c.clustering.min_size = it->value("min_size", c.clustering.min_size);
            c.clustering.salience_percentile = it->value("salience_percentile", c.clustering.salience_percentile);
        }
        if (const auto it = j.find("store_path"); it != j.end()) c.store_path = it->get<std::string>();
        c.seed = j.value("seed", c.seed);
        if (const auto it = j.find("timeout"); it != j.end()) {
            c.timeout = std::chrono::milliseconds(static_cast<long long>(it->get<double>() * 1000.0));
        }
        c.remote_retries = j.value("remote_retries", c.remote_retries);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Config, std::string("config: ") + e.what());
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Config) throw;
        fail(ErrorKind::Config, std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

AppConfig load_config(const std::filesystem::path& path) {
    try {
        return config_from_json(io::read_json_file(path));
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Config) throw;
        fail(ErrorKind::Config, e.what());
    }
}

nlohmann::json to_json(const AppConfig& c) {
    return nlohmann::json{
        {"backend", c.backend},
        {"thresholds", io::to_json(c.thresholds)},
        {"calibrators", {{"dr", io::to_json(c.dr_calibrator)}, {"gradability", io::to_json(c.gradability_calibrator)}}},
        {"clahe",
         {{"tiles", std::to_string(c.enhance.clahe.tile_rows) + "x" + std::to_string(c.enhance.clahe.tile_cols)},
          {"clip", c.enhance.clahe.clip_limit}}},
        {"stretch", {{"lo", c.enhance.stretch.lo_pct}, {"hi", c.enhance.stretch.hi_pct}}},
        {"clustering",
         {{"eps", c.clustering.eps},
          {"min_size", c.clustering.min_size},
          {"salience_percentile", c.clustering.salience_percentile}}},
        {"store_path", c.store_path.string()},
        {"seed", c.seed},
        {"timeout", static_cast<double>(c.timeout.count()) / 1000.0},
        {"remote_retries", c.remote_retries},
    };
}

}  // namespace retscreen
