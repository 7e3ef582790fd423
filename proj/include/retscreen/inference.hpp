#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "retscreen/enhancement.hpp"
#include "retscreen/image.hpp"
#include "retscreen/study.hpp"

namespace retscreen::inference {

/// Dense model input (or gradient) tensor, row-major H x W x C.
struct Tensor {
    int height = 0;
    int width = 0;
    int channels = 1;
    std::vector<double> values;

    Tensor() = default;
    Tensor(int h, int w, int c, double fill = 0.0)
        : height(h), width(w), channels(c), values(static_cast<std::size_t>(h) * w * c, fill) {}

    [[nodiscard]] bool same_shape(const Tensor& other) const {
        return height == other.height && width == other.width && channels == other.channels;
    }
};

enum class OutputSelector {
    DrProbability,
    NonGradabilityProbability,
    DrLogit,               // pre-sigmoid DR activation
    NonGradabilityLogit,   // pre-sigmoid gradability activation
};

/// Classifier contract: field classification plus DR and gradability
/// scoring. Implementations must be deterministic and safe for concurrent
/// const use. Gradient access is optional and advertised by
/// supports_gradients().
class InferenceBackend {
public:
    virtual ~InferenceBackend() = default;

    [[nodiscard]] virtual std::string name() const = 0;

    [[nodiscard]] virtual FieldScores classify_field(const RgbImage& image) const = 0;
    [[nodiscard]] virtual double score_dr(const RgbImage& image) const = 0;
    /// Probability that the image is NOT gradable.
    [[nodiscard]] virtual double score_gradability(const RgbImage& image) const = 0;

    [[nodiscard]] virtual bool supports_gradients() const { return false; }
    [[nodiscard]] virtual Tensor model_input(const RgbImage& image) const;
    [[nodiscard]] virtual double evaluate(const Tensor& input, OutputSelector output) const;
    [[nodiscard]] virtual Tensor gradient(const Tensor& input, OutputSelector output) const;
};

/// d(output)/d(input) at the model input derived from `image`.
Tensor gradient_of_output(const InferenceBackend& backend, const RgbImage& image, OutputSelector output);

double logistic(double z);

/// Logistic-linear test double: output = logistic(w . gray + b) with
/// gray = luminance / 255, one weight per pixel. Weights are a pure function
/// of (seed, head, pixel index) so any image size works.
class AnalyticStubModel final : public InferenceBackend {
public:
    explicit AnalyticStubModel(std::uint64_t seed = 0, double bias = 0.0, double weight_scale = 8.0);

    [[nodiscard]] std::string name() const override { return "analytic"; }
    [[nodiscard]] FieldScores classify_field(const RgbImage& image) const override;
    [[nodiscard]] double score_dr(const RgbImage& image) const override;
    [[nodiscard]] double score_gradability(const RgbImage& image) const override;

    [[nodiscard]] bool supports_gradients() const override { return true; }
    [[nodiscard]] Tensor model_input(const RgbImage& image) const override;
    [[nodiscard]] double evaluate(const Tensor& input, OutputSelector output) const override;
    [[nodiscard]] Tensor gradient(const Tensor& input, OutputSelector output) const override;

    /// Weight vector of one head for an h x w input.
    [[nodiscard]] std::vector<double> weights(int head, int height, int width) const;
    [[nodiscard]] double bias() const { return bias_; }

    static constexpr int kDrHead = 0;
    static constexpr int kGradabilityHead = 1;
    static constexpr int kFieldHeadBase = 2;

private:
    [[nodiscard]] double activation(int head, const Tensor& input) const;

    std::uint64_t seed_;
    double bias_;
    double weight_scale_;
};

/// Rule-based backend producing clinically shaped behaviour on fundus-like
/// images: dark-blob fraction drives DR, central sharpness drives
/// gradability, brightest-blob geometry (optic disc proxy) drives field.
struct HeuristicParams {
    double lesion_threshold = 50.0;        // luminance below this counts as dark blob
    double dr_fraction_midpoint = 0.005;   // dark fraction at which dr_prob = 0.5
    double dr_slope = 800.0;
    double sharpness_floor = 0.8;          // sharpness at which non-grad prob = 0.5
    double sharpness_scale = 0.25;         // on the log scale
    double analysis_radius = 0.8;          // fraction of the fundus radius examined
    double sharpness_radius = 0.5;         // kept well inside the rim so blur cannot leak it in
    double disc_min_excess = 60.0;         // disc must exceed the median by this much
    double disc_band = 30.0;               // bright pixels within this of the max
    double disc_min_area = 0.003;          // fraction of analysed area
    double field_sigma = 0.2;
};

struct FundusStats {
    enhancement::FundusGeometry geometry;
    double dark_fraction = 0.0;
    double luminance_std = 0.0;
    double sharpness = 0.0;  // RMS luminance gradient near the centre, times r / 100
    bool disc_found = false;
    double disc_dx = 0.0;  // disc centroid offset / fundus radius
    double disc_dy = 0.0;
};

class HeuristicStubModel final : public InferenceBackend {
public:
    explicit HeuristicStubModel(HeuristicParams params = {}) : params_(params) {}

    [[nodiscard]] std::string name() const override { return "heuristic"; }
    [[nodiscard]] FieldScores classify_field(const RgbImage& image) const override;
    [[nodiscard]] double score_dr(const RgbImage& image) const override;
    [[nodiscard]] double score_gradability(const RgbImage& image) const override;

    [[nodiscard]] FundusStats analyse(const RgbImage& image) const;
    [[nodiscard]] const HeuristicParams& params() const { return params_; }

private:
    HeuristicParams params_;
};

struct RemoteOptions {
    std::chrono::milliseconds timeout{30000};
    int retries = 1;
};

/// HTTP client backend: POST image/png to `url`, expects
/// {"field_scores":[7 floats],"dr_prob":f,"non_gradability_prob":f}.
class RemoteBackend final : public InferenceBackend {
public:
    explicit RemoteBackend(std::string url, RemoteOptions options = {});

    [[nodiscard]] std::string name() const override { return "remote:" + url_; }
    [[nodiscard]] FieldScores classify_field(const RgbImage& image) const override;
    [[nodiscard]] double score_dr(const RgbImage& image) const override;
    [[nodiscard]] double score_gradability(const RgbImage& image) const override;

    struct Response {
        FieldScores field_scores;
        RawScores raw;
    };
    [[nodiscard]] Response infer(const RgbImage& image) const;

private:
    std::string url_;
    std::string origin_;  // scheme://host:port
    std::string path_;
    RemoteOptions options_;
};

/// "analytic" | "heuristic" | "remote:<url>".
std::shared_ptr<const InferenceBackend> make_backend(const std::string& spec, std::uint64_t seed = 0,
                                                     RemoteOptions remote = {});

}  // namespace retscreen::inference
