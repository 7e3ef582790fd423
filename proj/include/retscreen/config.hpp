#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "retscreen/attribution.hpp"
#include "retscreen/calibration.hpp"
#include "retscreen/enhancement.hpp"
#include "retscreen/orchestrator.hpp"

namespace retscreen {

/// Runtime configuration shared by the CLI and the service:
/// {backend, thresholds{t_dr,t_ng,t_prime}, calibrators{dr,gradability},
///  clahe{tiles,clip}, clustering{eps,min_size,salience_percentile},
///  store_path, seed, timeout}
struct AppConfig {
    std::string backend = "heuristic";
    calibration::OperatingPoint thresholds;
    calibration::Calibrator dr_calibrator = calibration::IdentityCalibrator{};
    calibration::Calibrator gradability_calibrator = calibration::IdentityCalibrator{};
    enhancement::EnhanceParams enhance;
    attribution::ClusterParams clustering;
    std::filesystem::path store_path = "retscreen-store";
    std::uint64_t seed = 0;
    std::chrono::milliseconds timeout{30000};  // request timeout, also remote inference
    int remote_retries = 1;

    [[nodiscard]] orchestrator::OrchestratorConfig orchestrator() const;
    void validate() const;
};

/// Parses "8x8" style grids; throws Config.
std::pair<int, int> parse_tile_grid(const std::string& text);

/// Unknown keys are ignored; missing ones keep their defaults.
AppConfig config_from_json(const nlohmann::json& j);
AppConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const AppConfig& config);

}  // namespace retscreen
