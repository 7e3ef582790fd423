#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace retscreen::metrics {

struct ConfusionCounts {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;
    std::int64_t tn = 0;

    [[nodiscard]] std::int64_t total() const { return tp + fp + fn + tn; }
    void add(bool predicted, bool truth);

    bool operator==(const ConfusionCounts&) const = default;
};

ConfusionCounts confusion(std::span<const int> predictions, std::span<const int> truths);

struct SensSpec {
    double sensitivity = 0.0;
    double specificity = 0.0;
};

/// Throws UndefinedRate when a class is empty.
SensSpec sensitivity_specificity(const ConfusionCounts& counts);

/// Chance-corrected agreement between two raters over integer class labels.
double cohen_kappa(std::span<const int> labels_a, std::span<const int> labels_b);

/// Mann-Whitney AUC: P(score_pos > score_neg) + 0.5 P(tie).
double auc_binary(std::span<const double> scores, std::span<const int> labels);

/// sum_k support_k / N * auc_binary(scores[:, k], labels == k).
/// score_matrix is row-per-sample.
double weighted_ovr_auc(const std::vector<std::vector<double>>& score_matrix, std::span<const int> labels,
                        int num_classes);

struct AgreementStats {
    std::optional<double> pa;  // P(human = 1 | ai = 1)
    std::optional<double> na;  // P(human = 0 | ai = 0)
    std::optional<double> kappa;
    std::int64_t ai_positive = 0;
    std::int64_t ai_negative = 0;
    std::int64_t n = 0;
};

AgreementStats positive_negative_agreement(std::span<const int> ai, std::span<const int> human);

struct BootstrapOptions {
    int resamples = 2000;
    double confidence = 0.95;
    std::uint64_t seed = 0;
};

struct BootstrapCI {
    double point = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    double confidence = 0.95;
    int resamples = 0;
    std::uint64_t seed = 0;
    std::size_t n = 0;
    bool point_outside = false;
};

/// Statistic over a resample, given as indices into the original data units.
/// Returns nullopt when undefined on that resample.
using IndexStatistic = std::function<std::optional<double>(std::span<const std::size_t>)>;

/// Percentile bootstrap over `n_units` data units. Resample r draws from a
/// generator seeded with seed + r; undefined resamples are redrawn (at most
/// 10 attempts each). Throws UndefinedRate when the statistic is undefined on
/// the full data or on more than 90% of draws.
BootstrapCI bootstrap_ci(std::size_t n_units, const IndexStatistic& statistic, const BootstrapOptions& options = {});

/// Convenience form over a value vector.
template <class T, class Fn>
BootstrapCI bootstrap_ci(const std::vector<T>& data, Fn statistic, const BootstrapOptions& options = {}) {
    return bootstrap_ci(
        data.size(),
        [&](std::span<const std::size_t> idx) -> std::optional<double> {
            std::vector<T> sample;
            sample.reserve(idx.size());
            for (auto i : idx) sample.push_back(data[i]);
            return statistic(sample);
        },
        options);
}

/// Linear-interpolated quantile (q in [0,1]) of unsorted values.
double quantile(std::vector<double> values, double q);

double median(std::vector<double> values);

}  // namespace retscreen::metrics
