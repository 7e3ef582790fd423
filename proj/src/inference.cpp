#include "retscreen/inference.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "retscreen/error.hpp"
#include "retscreen/rng.hpp"

namespace retscreen::inference {

Tensor InferenceBackend::model_input(const RgbImage&) const {
    fail(ErrorKind::Unsupported, "backend '" + name() + "' does not provide gradient attribution");
}

double InferenceBackend::evaluate(const Tensor&, OutputSelector) const {
    fail(ErrorKind::Unsupported, "backend '" + name() + "' does not provide gradient attribution");
}

Tensor InferenceBackend::gradient(const Tensor&, OutputSelector) const {
    fail(ErrorKind::Unsupported, "backend '" + name() + "' does not provide gradient attribution");
}

Tensor gradient_of_output(const InferenceBackend& backend, const RgbImage& image, OutputSelector output) {
    if (!backend.supports_gradients()) {
        fail(ErrorKind::Unsupported, "backend '" + backend.name() + "' does not provide gradient attribution");
    }
    return backend.gradient(backend.model_input(image), output);
}

double logistic(double z) {
    if (z >= 0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

namespace {

std::array<double, kFieldCategoryCount> softmax(const std::array<double, kFieldCategoryCount>& logits) {
    const double m = *std::max_element(logits.begin(), logits.end());
    std::array<double, kFieldCategoryCount> out{};
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - m);
        sum += out[i];
    }
    for (auto& v : out) v /= sum;
    return out;
}

}  // namespace

// ---------------------------------------------------------------- analytic

AnalyticStubModel::AnalyticStubModel(std::uint64_t seed, double bias, double weight_scale)
    : seed_(seed), bias_(bias), weight_scale_(weight_scale) {}

std::vector<double> AnalyticStubModel::weights(int head, int height, int width) const {
    const std::size_t n = static_cast<std::size_t>(height) * width;
    std::vector<double> w(n);
    const double scale = weight_scale_ / std::sqrt(static_cast<double>(std::max<std::size_t>(n, 1)));
    const std::uint64_t head_seed = splitmix64(seed_ * 0x100000001B3ULL + static_cast<std::uint64_t>(head) + 1);
    for (std::size_t i = 0; i < n; ++i) {
        w[i] = scale * (2.0 * unit_double(splitmix64(head_seed ^ (i * 0x9E3779B97F4A7C15ULL))) - 1.0);
    }
    return w;
}

Tensor AnalyticStubModel::model_input(const RgbImage& image) const {
    Tensor t(image.height, image.width, 1);
    for (std::size_t i = 0; i < image.pixel_count(); ++i) {
        const auto* p = &image.data[i * 3];
        t.values[i] = luminance(p[0], p[1], p[2]) / 255.0;
    }
    return t;
}

double AnalyticStubModel::activation(int head, const Tensor& input) const {
    require(input.channels == 1, "analytic stub expects a single-channel input");
    const auto w = weights(head, input.height, input.width);
    double z = bias_;
    for (std::size_t i = 0; i < w.size(); ++i) z += w[i] * input.values[i];
    return z;
}

double AnalyticStubModel::evaluate(const Tensor& input, OutputSelector output) const {
    switch (output) {
        case OutputSelector::DrProbability: return logistic(activation(kDrHead, input));
        case OutputSelector::NonGradabilityProbability: return logistic(activation(kGradabilityHead, input));
        case OutputSelector::DrLogit: return activation(kDrHead, input);
        case OutputSelector::NonGradabilityLogit: return activation(kGradabilityHead, input);
    }
    return 0.0;
}

Tensor AnalyticStubModel::gradient(const Tensor& input, OutputSelector output) const {
    const int head = (output == OutputSelector::DrProbability || output == OutputSelector::DrLogit)
                         ? kDrHead
                         : kGradabilityHead;
    const bool probability =
        output == OutputSelector::DrProbability || output == OutputSelector::NonGradabilityProbability;
    double factor = 1.0;
    if (probability) {
        const double s = logistic(activation(head, input));
        factor = s * (1.0 - s);
    }
    Tensor g(input.height, input.width, 1);
    const auto w = weights(head, input.height, input.width);
    for (std::size_t i = 0; i < w.size(); ++i) g.values[i] = factor * w[i];
    return g;
}

FieldScores AnalyticStubModel::classify_field(const RgbImage& image) const {
    const Tensor input = model_input(image);
    std::array<double, kFieldCategoryCount> logits{};
    for (std::size_t k = 0; k < kFieldCategoryCount; ++k) {
        logits[k] = activation(kFieldHeadBase + static_cast<int>(k), input);
    }
    return FieldScores{softmax(logits)};
}

double AnalyticStubModel::score_dr(const RgbImage& image) const {
    return evaluate(model_input(image), OutputSelector::DrProbability);
}

double AnalyticStubModel::score_gradability(const RgbImage& image) const {
    return evaluate(model_input(image), OutputSelector::NonGradabilityProbability);
}

// --------------------------------------------------------------- heuristic

FundusStats HeuristicStubModel::analyse(const RgbImage& image) const {
    FundusStats stats;
    stats.geometry = enhancement::locate_fundus(image);
    const auto& g = stats.geometry;
    const auto lum = luminance_plane(image);

    std::vector<std::size_t> inside;
    inside.reserve(lum.size());
    for (int y = g.y0; y < g.y1; ++y) {
        for (int x = g.x0; x < g.x1; ++x) {
            if (g.contains(x, y, params_.analysis_radius)) {
                inside.push_back(static_cast<std::size_t>(y) * image.width + x);
            }
        }
    }
    if (inside.empty()) {
        stats.dark_fraction = 1.0;
        return stats;
    }

    std::size_t dark = 0;
    double mean = 0.0;
    for (auto idx : inside) {
        dark += lum[idx] < params_.lesion_threshold ? 1 : 0;
        mean += lum[idx];
    }
    mean /= static_cast<double>(inside.size());
    double var = 0.0;
    for (auto idx : inside) var += (lum[idx] - mean) * (lum[idx] - mean);
    stats.dark_fraction = static_cast<double>(dark) / static_cast<double>(inside.size());
    stats.luminance_std = std::sqrt(var / static_cast<double>(inside.size()));

    double grad_sq = 0.0;
    std::size_t grad_n = 0;
    for (int y = std::max(g.y0, 1); y < std::min(g.y1, image.height - 1); ++y) {
        for (int x = std::max(g.x0, 1); x < std::min(g.x1, image.width - 1); ++x) {
            if (!g.contains(x, y, params_.sharpness_radius)) continue;
            const auto i = static_cast<std::size_t>(y) * image.width + x;
            const double gx = 0.5 * (lum[i + 1] - lum[i - 1]);
            const double gy = 0.5 * (lum[i + image.width] - lum[i - image.width]);
            grad_sq += gx * gx + gy * gy;
            ++grad_n;
        }
    }
    if (grad_n > 0) stats.sharpness = std::sqrt(grad_sq / static_cast<double>(grad_n)) * g.r / 100.0;

    // Optic disc proxy: largest 8-connected blob of near-maximal luminance.
    std::vector<double> values;
    values.reserve(inside.size());
    for (auto idx : inside) values.push_back(lum[idx]);
    const double max_lum = *std::max_element(values.begin(), values.end());
    auto mid = values.begin() + static_cast<std::ptrdiff_t>(values.size() / 2);
    std::nth_element(values.begin(), mid, values.end());
    const double median = *mid;
    if (max_lum < median + params_.disc_min_excess) {
        return stats;
    }
    const double cutoff = max_lum - params_.disc_band;
    std::vector<std::uint8_t> bright(lum.size(), 0);
    for (auto idx : inside) bright[idx] = lum[idx] >= cutoff ? 1 : 0;

    std::vector<std::uint8_t> seen(lum.size(), 0);
    std::size_t best = 0;
    double best_x = 0.0, best_y = 0.0;
    std::deque<std::size_t> queue;
    for (auto start : inside) {
        if (!bright[start] || seen[start]) continue;
        seen[start] = 1;
        queue.push_back(start);
        std::size_t count = 0;
        double sx = 0.0, sy = 0.0;
        while (!queue.empty()) {
            const auto idx = queue.front();
            queue.pop_front();
            const int x = static_cast<int>(idx % image.width);
            const int y = static_cast<int>(idx / image.width);
            ++count;
            sx += x;
            sy += y;
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    const int nx = x + dx, ny = y + dy;
                    if (nx < 0 || ny < 0 || nx >= image.width || ny >= image.height) continue;
                    const auto n = static_cast<std::size_t>(ny) * image.width + nx;
                    if (bright[n] && !seen[n]) {
                        seen[n] = 1;
                        queue.push_back(n);
                    }
                }
            }
        }
        if (count > best) {
            best = count;
            best_x = sx / count;
            best_y = sy / count;
        }
    }
    if (static_cast<double>(best) < params_.disc_min_area * static_cast<double>(inside.size())) {
        return stats;
    }
    stats.disc_found = true;
    stats.disc_dx = (best_x - g.cx) / g.r;
    stats.disc_dy = (best_y - g.cy) / g.r;
    return stats;
}

double HeuristicStubModel::score_dr(const RgbImage& image) const {
    const auto stats = analyse(image);
    return logistic(params_.dr_slope * (stats.dark_fraction - params_.dr_fraction_midpoint));
}

double HeuristicStubModel::score_gradability(const RgbImage& image) const {
    const auto stats = analyse(image);
    if (stats.sharpness <= 0.0) return 1.0;
    return logistic(std::log(params_.sharpness_floor / stats.sharpness) / params_.sharpness_scale);
}

FieldScores HeuristicStubModel::classify_field(const RgbImage& image) const {
    const auto stats = analyse(image);
    std::array<double, kFieldCategoryCount> logits{};
    auto& central = logits[static_cast<std::size_t>(FieldCategory::Central)];
    auto& nasal = logits[static_cast<std::size_t>(FieldCategory::Nasal)];
    auto& od_up = logits[static_cast<std::size_t>(FieldCategory::ODUp)];
    auto& od_down = logits[static_cast<std::size_t>(FieldCategory::ODDown)];
    auto& no_od = logits[static_cast<std::size_t>(FieldCategory::NoOD)];
    auto& temporal = logits[static_cast<std::size_t>(FieldCategory::Temporal)];
    auto& composite = logits[static_cast<std::size_t>(FieldCategory::Composite)];
    if (!stats.disc_found) {
        no_od = 0.0;
        temporal = -2.0;
        central = -3.0;
        nasal = od_up = od_down = -4.0;
        composite = -5.0;
        return FieldScores{softmax(logits)};
    }
    const double two_s2 = 2.0 * params_.field_sigma * params_.field_sigma;
    auto proximity = [&](double px, double py) {
        const double dx = std::abs(stats.disc_dx) - px;
        const double dy = stats.disc_dy - py;
        return -(dx * dx + dy * dy) / two_s2;
    };
    // Disc at the frame center is the disc-centred (nasal) field; disc half a
    // radius to the side is the macula-centred (central) field.
    nasal = proximity(0.0, 0.0);
    central = proximity(0.55, 0.0);
    od_up = proximity(0.0, -0.55);
    od_down = proximity(0.0, 0.55);
    no_od = -6.0;
    temporal = -5.0;
    composite = -6.0;
    return FieldScores{softmax(logits)};
}

std::shared_ptr<const InferenceBackend> make_backend(const std::string& spec, std::uint64_t seed,
                                                     RemoteOptions remote) {
    if (spec == "analytic") return std::make_shared<AnalyticStubModel>(seed);
    if (spec == "heuristic") return std::make_shared<HeuristicStubModel>();
    if (spec.rfind("remote:", 0) == 0) {
        return std::make_shared<RemoteBackend>(spec.substr(7), remote);
    }
    fail(ErrorKind::Config, "unknown backend '" + spec + "' (expected analytic, heuristic or remote:<url>)");
}

}  // namespace retscreen::inference
