#pragma once

#include <atomic>
#include <chrono>
#include <cstdio>
#include <memory>
#include <string>
#include <thread>

#include "retscreen/error.hpp"
#include "retscreen/inference.hpp"
#include "retscreen/service.hpp"
#include "retscreen/study.hpp"

namespace fixture {

// Backend reading its scores from pixel (0,0): red / 200 is the DR
// probability, green / 200 the non-gradability probability.
class MarkerBackend final : public retscreen::inference::InferenceBackend {
public:
    std::atomic<bool> down{false};
    std::atomic<int> delay_ms{0};
    mutable std::atomic<int> dr_calls{0};

    [[nodiscard]] std::string name() const override { return "marker"; }
    [[nodiscard]] retscreen::FieldScores classify_field(const retscreen::RgbImage&) const override {
        retscreen::FieldScores f;
        f[retscreen::FieldCategory::Central] = 1.0;
        return f;
    }
    [[nodiscard]] double score_dr(const retscreen::RgbImage& image) const override {
        if (delay_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms.load()));
        if (down) retscreen::fail(retscreen::ErrorKind::Transport, "marker backend offline");
        ++dr_calls;
        return image.at(0, 0, 0) / 200.0;
    }
    [[nodiscard]] double score_gradability(const retscreen::RgbImage& image) const override {
        if (down) retscreen::fail(retscreen::ErrorKind::Transport, "marker backend offline");
        return image.at(0, 0, 1) / 200.0;
    }
};

// One eye, one 64x64 image carrying the marker scores.
inline retscreen::Study marker_study(const std::string& id, double dr, double ng, std::uint8_t fill = 90) {
    retscreen::FundusImage img;
    img.image_id = id + "-L-0.png";
    img.pixels = retscreen::RgbImage(64, 64, fill);
    img.pixels.at(0, 0, 0) = static_cast<std::uint8_t>(std::lround(dr * 200));
    img.pixels.at(0, 0, 1) = static_cast<std::uint8_t>(std::lround(ng * 200));
    img.laterality = retscreen::Laterality::Left;
    retscreen::Study s;
    s.study_id = id;
    s.eyes.push_back({id + "-L", retscreen::Laterality::Left, {img}});
    return s;
}

// Deterministic clock: one second per call from a fixed origin.
inline std::function<std::string()> counting_clock(int year = 2021) {
    auto tick = std::make_shared<int>(0);
    return [tick, year] {
        const int t = (*tick)++;
        char buf[40];
        std::snprintf(buf, sizeof buf, "%04d-01-01T%02d:%02d:%02d.000Z", year, (t / 3600) % 24, (t / 60) % 60, t % 60);
        return std::string(buf);
    };
}

inline retscreen::service::ServiceOptions options(const std::filesystem::path& store,
                                                  std::shared_ptr<const retscreen::inference::InferenceBackend> backend) {
    retscreen::service::ServiceOptions o;
    o.config.store_path = store;
    o.config.backend = "heuristic";
    o.backend = std::move(backend);
    o.clock = counting_clock();
    return o;
}

}  // namespace fixture
