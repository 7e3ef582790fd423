#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "retscreen/inference.hpp"
#include "retscreen/study.hpp"

namespace retscreen::attribution {

/// Per-pixel attribution, channel-summed, H x W row-major.
struct AttributionMap {
    int height = 0;
    int width = 0;
    std::vector<double> values;
    std::string baseline_id;

    [[nodiscard]] double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

struct ClusterParams {
    double eps = 23.0;              // max neighbour distance, pixels
    int min_size = 4;               // neighbourhood count (self included) for a core point
    double salience_percentile = 99.5;
    std::size_t max_points = 5000;

    void validate() const;
};

struct Point {
    double x = 0.0;
    double y = 0.0;
    bool operator==(const Point&) const = default;
};

struct QuadratureNode {
    double alpha;   // position on [0, 1]
    double weight;  // weights sum to 1
};

/// n-point Gauss-Legendre rule mapped from [-1, 1] to [0, 1].
std::vector<QuadratureNode> gauss_legendre_unit(int n);

/// IG_i = (x_i - x'_i) * sum_k w_k dF/dx_i(x' + alpha_k (x - x')), summed
/// over channels. Requires a gradient-capable backend.
AttributionMap integrated_gradients(const inference::InferenceBackend& backend, const inference::Tensor& input,
                                    const inference::Tensor& baseline, inference::OutputSelector output,
                                    int steps = 20);

/// Image overload with an all-zero (black) baseline.
AttributionMap integrated_gradients(const inference::InferenceBackend& backend, const RgbImage& image,
                                    inference::OutputSelector output = inference::OutputSelector::DrProbability,
                                    int steps = 20);

/// Pixels whose positive attribution reaches the nearest-rank
/// salience_percentile of all positive attributions, capped at max_points
/// (largest first, ties in row-major order). Returned in row-major order.
std::vector<Point> extract_salient_points(const AttributionMap& map, const ClusterParams& params);

/// OPTICS ordering with a finite max radius.
struct OpticsResult {
    std::vector<std::size_t> ordering;
    std::vector<double> reachability;   // indexed by point; +inf when undefined
    std::vector<double> core_distance;  // indexed by point; +inf when not core
};

OpticsResult optics(std::span<const Point> points, double eps, int min_samples);

struct Clustering {
    std::vector<std::vector<std::size_t>> clusters;  // point indices, discovery order
    std::vector<std::size_t> noise;
    std::vector<int> labels;  // -1 noise
};

/// OPTICS with clusters cut at eps (DBSCAN-equivalent extraction). Border
/// points first top up groups below min_size, then join the group of their
/// nearest core point; the partition does not depend on input order.
Clustering cluster_points(std::span<const Point> points, const ClusterParams& params);

/// Circle per cluster: centroid, radius max(5, max member distance + 2),
/// sorted by descending cluster size (stable).
std::vector<AnnotationCircle> clusters_to_annotations(const std::vector<std::vector<Point>>& clusters);

inline constexpr double kMinAnnotationRadius = 5.0;
inline constexpr double kAnnotationPadding = 2.0;

/// extract_salient_points -> cluster_points -> clusters_to_annotations.
std::vector<AnnotationCircle> annotate(const AttributionMap& map, const ClusterParams& params);

}  // namespace retscreen::attribution
