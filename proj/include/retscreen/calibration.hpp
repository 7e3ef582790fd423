#pragma once

#include <span>
#include <variant>
#include <vector>

namespace retscreen::calibration {

/// Order-preserving piecewise-linear remap that sends the decision threshold
/// `threshold` to the display boundary `boundary`:
///   p >  t : t' * (1 + (p - t) / (1 - t))
///   p <= t : t' * (1 + (p - t) / t)
/// Output lies in [0, 2t'] and output >= t' iff p >= t.
double transform_score(double p, double threshold, double boundary);

/// Single referral score of an eye: the larger transformed score.
double combine_referral_score(double dr_score, double non_gradability_score);

/// logistic(c + a ln p - b ln(1 - p)); monotone when a, b >= 0.
struct BetaCalibrator {
    double a = 1.0;
    double b = 1.0;
    double c = 0.0;

    [[nodiscard]] double operator()(double p) const;
    bool operator==(const BetaCalibrator&) const = default;
};

struct IsotonicKnot {
    double score = 0.0;
    double value = 0.0;
    bool operator==(const IsotonicKnot&) const = default;
};

/// Monotone step fit, evaluated by linear interpolation between knots and
/// clamped outside them.
struct IsotonicCalibrator {
    std::vector<IsotonicKnot> knots;

    [[nodiscard]] double operator()(double p) const;
    bool operator==(const IsotonicCalibrator&) const = default;
};

struct IdentityCalibrator {
    [[nodiscard]] double operator()(double p) const { return p; }
    bool operator==(const IdentityCalibrator&) const = default;
};

using Calibrator = std::variant<IdentityCalibrator, BetaCalibrator, IsotonicCalibrator>;

double calibrate(const Calibrator& calibrator, double p);

struct BetaFitOptions {
    double tolerance = 1e-8;
    int max_iterations = 100;
    double clamp_eps = 1e-12;
};

/// Maximum-likelihood Beta calibration via damped Newton. A negative shape
/// coefficient is pinned to zero and the remaining ones refitted.
/// Throws Unfittable for single-class labels, NonConvergence otherwise.
BetaCalibrator fit_beta_calibrator(std::span<const double> scores, std::span<const int> labels,
                                   const BetaFitOptions& options = {});

/// Bernoulli log-likelihood of labels under the calibrator (scores clamped).
double beta_log_likelihood(const BetaCalibrator& calibrator, std::span<const double> scores,
                           std::span<const int> labels, double clamp_eps = 1e-12);

/// Weighted least-squares monotone (non-decreasing) fit of `values` in the
/// given order. Empty weights means unit weights.
std::vector<double> pool_adjacent_violators(std::span<const double> values, std::span<const double> weights = {});

IsotonicCalibrator fit_isotonic_calibrator(std::span<const double> scores, std::span<const int> labels);

struct CalibrationBin {
    std::size_t count = 0;
    double mean_prob = 0.0;
    double frac_positive = 0.0;
};

struct CalibrationReport {
    double ece = 0.0;
    double mce = 0.0;
    double brier = 0.0;
    std::vector<CalibrationBin> bins;  // n_bins entries, equal width on [0,1]
};

CalibrationReport calibration_report(std::span<const double> scores, std::span<const int> labels, int n_bins = 10);

struct ThresholdChoice {
    double threshold = 0.5;
    double mean_recall = 0.0;
    double sensitivity = 0.0;
    double specificity = 0.0;
};

/// Picks the midpoint between consecutive distinct scores maximising
/// (sensitivity + specificity) / 2; ties go to higher sensitivity, then to
/// the smaller threshold. Positive prediction means score >= threshold.
ThresholdChoice select_threshold(std::span<const double> scores, std::span<const int> labels);

/// Operating point of the screening pipeline.
struct OperatingPoint {
    double t_dr = 0.1;
    double t_ng = 0.5;
    double t_prime = 0.5;
};

}  // namespace retscreen::calibration
