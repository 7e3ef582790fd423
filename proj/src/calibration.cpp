#include "retscreen/calibration.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <string>

#include "retscreen/error.hpp"

namespace retscreen::calibration {

double transform_score(double p, double threshold, double boundary) {
    require(p >= 0.0 && p <= 1.0, "transform_score: p must lie in [0,1]");
    require(threshold > 0.0 && threshold < 1.0, "transform_score: threshold must lie in (0,1)");
    require(boundary > 0.0 && boundary < 1.0, "transform_score: boundary must lie in (0,1)");
    if (p > threshold) {
        return boundary * (1.0 + (p - threshold) / (1.0 - threshold));
    }
    return boundary * (1.0 + (p - threshold) / threshold);
}

double combine_referral_score(double dr_score, double non_gradability_score) {
    return std::max(dr_score, non_gradability_score);
}

namespace {

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// log(1 + exp(x)) without overflow
double softplus(double x) {
    return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

void check_binary(std::span<const double> scores, std::span<const int> labels) {
    require(scores.size() == labels.size(), "scores and labels differ in length");
    require(!scores.empty(), "empty calibration sample");
    bool pos = false, neg = false;
    for (int y : labels) {
        require(y == 0 || y == 1, "labels must be 0 or 1");
        pos = pos || y == 1;
        neg = neg || y == 0;
    }
    if (!pos || !neg) {
        fail(ErrorKind::Unfittable, "calibration needs both classes present");
    }
}

}  // namespace

double BetaCalibrator::operator()(double p) const {
    const double q = std::clamp(p, 1e-12, 1.0 - 1e-12);
    return sigmoid(c + a * std::log(q) - b * std::log1p(-q));
}

double IsotonicCalibrator::operator()(double p) const {
    if (knots.empty()) return p;
    if (p <= knots.front().score) return knots.front().value;
    if (p >= knots.back().score) return knots.back().value;
    const auto hi = std::upper_bound(knots.begin(), knots.end(), p,
                                     [](double v, const IsotonicKnot& k) { return v < k.score; });
    const auto lo = hi - 1;
    const double t = (p - lo->score) / (hi->score - lo->score);
    return lo->value + t * (hi->value - lo->value);
}

double calibrate(const Calibrator& calibrator, double p) {
    return std::visit([p](const auto& c) { return c(p); }, calibrator);
}

double beta_log_likelihood(const BetaCalibrator& cal, std::span<const double> scores, std::span<const int> labels,
                           double clamp_eps) {
    double ll = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const double q = std::clamp(scores[i], clamp_eps, 1.0 - clamp_eps);
        const double z = cal.c + cal.a * std::log(q) - cal.b * std::log1p(-q);
        ll -= labels[i] == 1 ? softplus(-z) : softplus(z);
    }
    return ll;
}

namespace {

struct BetaProblem {
    std::vector<std::array<double, 3>> features;  // (ln p, -ln(1-p), 1)
    std::span<const int> labels;
};

double log_likelihood(const BetaProblem& prob, const std::array<double, 3>& theta) {
    double ll = 0.0;
    for (std::size_t i = 0; i < prob.features.size(); ++i) {
        const auto& f = prob.features[i];
        const double z = theta[0] * f[0] + theta[1] * f[1] + theta[2] * f[2];
        ll -= prob.labels[i] == 1 ? softplus(-z) : softplus(z);
    }
    return ll;
}

// Solves the (small, symmetric positive definite after damping) system A x = b
// restricted to the active coordinates.
std::array<double, 3> solve(std::array<std::array<double, 3>, 3> a, std::array<double, 3> b,
                            const std::array<bool, 3>& active) {
    std::array<int, 3> idx{};
    int n = 0;
    for (int i = 0; i < 3; ++i) {
        if (active[i]) idx[n++] = i;
    }
    std::array<std::array<double, 4>, 3> m{};
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) m[r][c] = a[idx[r]][idx[c]];
        m[r][n] = b[idx[r]];
    }
    for (int col = 0; col < n; ++col) {
        int pivot = col;
        for (int r = col + 1; r < n; ++r) {
            if (std::abs(m[r][col]) > std::abs(m[pivot][col])) pivot = r;
        }
        std::swap(m[col], m[pivot]);
        const double d = m[col][col];
        if (d == 0.0) continue;
        for (int r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = m[r][col] / d;
            for (int c = col; c <= n; ++c) m[r][c] -= f * m[col][c];
        }
    }
    std::array<double, 3> x{};
    for (int r = 0; r < n; ++r) {
        x[idx[r]] = m[r][r] != 0.0 ? m[r][n] / m[r][r] : 0.0;
    }
    return x;
}

std::array<double, 3> newton_fit(const BetaProblem& prob, std::array<double, 3> theta,
                                 const std::array<bool, 3>& active, const BetaFitOptions& opt) {
    double ll = log_likelihood(prob, theta);
    for (int iter = 1; iter <= opt.max_iterations; ++iter) {
        std::array<double, 3> grad{};
        std::array<std::array<double, 3>, 3> info{};  // negative Hessian
        for (std::size_t i = 0; i < prob.features.size(); ++i) {
            const auto& f = prob.features[i];
            const double s = sigmoid(theta[0] * f[0] + theta[1] * f[1] + theta[2] * f[2]);
            const double r = prob.labels[i] - s;
            const double w = s * (1.0 - s);
            for (int j = 0; j < 3; ++j) {
                grad[j] += r * f[j];
                for (int k = 0; k < 3; ++k) info[j][k] += w * f[j] * f[k];
            }
        }
        // Tiny ridge keeps rank-deficient designs (e.g. two distinct scores)
        // solvable; it does not move the step along the gradient's span.
        const double trace = info[0][0] + info[1][1] + info[2][2];
        for (int j = 0; j < 3; ++j) info[j][j] += 1e-12 * (1.0 + trace);

        std::array<double, 3> step = solve(info, grad, active);
        double scale = 1.0;
        std::array<double, 3> candidate{};
        double candidate_ll = ll;
        for (int half = 0; half < 40; ++half) {
            for (int j = 0; j < 3; ++j) candidate[j] = theta[j] + scale * step[j];
            candidate_ll = log_likelihood(prob, candidate);
            if (candidate_ll >= ll - 1e-12 * std::abs(ll)) break;
            scale *= 0.5;
        }
        double max_step = 0.0;
        for (int j = 0; j < 3; ++j) max_step = std::max(max_step, std::abs(candidate[j] - theta[j]));
        theta = candidate;
        ll = candidate_ll;
        if (max_step < opt.tolerance) {
            return theta;
        }
    }
    fail(ErrorKind::NonConvergence,
         "beta calibration did not converge after " + std::to_string(opt.max_iterations) + " iterations");
}

}  // namespace

BetaCalibrator fit_beta_calibrator(std::span<const double> scores, std::span<const int> labels,
                                   const BetaFitOptions& options) {
    check_binary(scores, labels);
    BetaProblem prob;
    prob.labels = labels;
    prob.features.reserve(scores.size());
    for (double s : scores) {
        const double q = std::clamp(s, options.clamp_eps, 1.0 - options.clamp_eps);
        prob.features.push_back({std::log(q), -std::log1p(-q), 1.0});
    }

    std::array<double, 3> theta{1.0, 1.0, 0.0};
    theta = newton_fit(prob, theta, {true, true, true}, options);
    // Monotonicity repair: pin a negative shape coefficient at zero and refit.
    if (theta[0] < 0.0) {
        theta[0] = 0.0;
        theta = newton_fit(prob, theta, {false, true, true}, options);
        if (theta[1] < 0.0) {
            theta[1] = 0.0;
            theta = newton_fit(prob, theta, {false, false, true}, options);
        }
    } else if (theta[1] < 0.0) {
        theta[1] = 0.0;
        theta = newton_fit(prob, theta, {true, false, true}, options);
        if (theta[0] < 0.0) {
            theta[0] = 0.0;
            theta = newton_fit(prob, theta, {false, false, true}, options);
        }
    }
    return BetaCalibrator{theta[0], theta[1], theta[2]};
}

std::vector<double> pool_adjacent_violators(std::span<const double> values, std::span<const double> weights) {
    require(weights.empty() || weights.size() == values.size(), "weights and values differ in length");
    struct Block {
        double sum_wv;
        double sum_w;
        std::size_t count;
        [[nodiscard]] double mean() const { return sum_wv / sum_w; }
    };
    std::vector<Block> blocks;
    blocks.reserve(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double w = weights.empty() ? 1.0 : weights[i];
        require(w > 0.0, "isotonic weights must be positive");
        blocks.push_back({w * values[i], w, 1});
        while (blocks.size() > 1 && blocks[blocks.size() - 2].mean() > blocks.back().mean()) {
            const Block top = blocks.back();
            blocks.pop_back();
            blocks.back().sum_wv += top.sum_wv;
            blocks.back().sum_w += top.sum_w;
            blocks.back().count += top.count;
        }
    }
    std::vector<double> fitted;
    fitted.reserve(values.size());
    for (const auto& b : blocks) {
        fitted.insert(fitted.end(), b.count, b.mean());
    }
    return fitted;
}

IsotonicCalibrator fit_isotonic_calibrator(std::span<const double> scores, std::span<const int> labels) {
    check_binary(scores, labels);
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return scores[i] < scores[j]; });

    // Equal scores are merged into one weighted observation.
    std::vector<double> xs, ys, ws;
    for (auto i : order) {
        if (!xs.empty() && xs.back() == scores[i]) {
            ys.back() += labels[i];
            ws.back() += 1.0;
        } else {
            xs.push_back(scores[i]);
            ys.push_back(labels[i]);
            ws.push_back(1.0);
        }
    }
    for (std::size_t i = 0; i < ys.size(); ++i) ys[i] /= ws[i];
    const auto fitted = pool_adjacent_violators(ys, ws);

    IsotonicCalibrator cal;
    cal.knots.reserve(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        cal.knots.push_back({xs[i], fitted[i]});
    }
    return cal;
}

CalibrationReport calibration_report(std::span<const double> scores, std::span<const int> labels, int n_bins) {
    require(n_bins >= 1, "calibration_report: n_bins must be >= 1");
    require(!scores.empty(), "calibration_report: empty input");
    require(scores.size() == labels.size(), "calibration_report: scores and labels differ in length");

    CalibrationReport report;
    report.bins.assign(static_cast<std::size_t>(n_bins), {});
    std::vector<double> sum_p(n_bins, 0.0), sum_y(n_bins, 0.0);
    double brier = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const double p = scores[i];
        require(p >= 0.0 && p <= 1.0, "calibration_report: scores must lie in [0,1]");
        const int bin = std::min(static_cast<int>(p * n_bins), n_bins - 1);
        report.bins[bin].count += 1;
        sum_p[bin] += p;
        sum_y[bin] += labels[i];
        brier += (p - labels[i]) * (p - labels[i]);
    }
    const double n = static_cast<double>(scores.size());
    report.brier = brier / n;
    for (int b = 0; b < n_bins; ++b) {
        auto& bin = report.bins[b];
        if (bin.count == 0) continue;
        bin.mean_prob = sum_p[b] / bin.count;
        bin.frac_positive = sum_y[b] / bin.count;
        const double gap = std::abs(bin.mean_prob - bin.frac_positive);
        report.ece += (bin.count / n) * gap;
        report.mce = std::max(report.mce, gap);
    }
    return report;
}

ThresholdChoice select_threshold(std::span<const double> scores, std::span<const int> labels) {
    require(scores.size() == labels.size(), "select_threshold: scores and labels differ in length");
    std::size_t positives = 0, negatives = 0;
    for (int y : labels) {
        require(y == 0 || y == 1, "labels must be 0 or 1");
        (y == 1 ? positives : negatives) += 1;
    }
    require(positives > 0 && negatives > 0, "select_threshold: both classes must be present");

    // Group by distinct score, ascending.
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto i, auto j) { return scores[i] < scores[j]; });
    struct Group {
        double score;
        std::size_t pos;
        std::size_t neg;
    };
    std::vector<Group> groups;
    for (auto i : order) {
        if (groups.empty() || groups.back().score != scores[i]) groups.push_back({scores[i], 0, 0});
        (labels[i] == 1 ? groups.back().pos : groups.back().neg) += 1;
    }
    require(groups.size() >= 2, "select_threshold: scores must take at least two distinct values");

    // Walking the candidates from the top: predicted positive = groups above.
    ThresholdChoice best;
    bool have = false;
    std::size_t tp = 0, fp = 0;
    for (std::size_t g = groups.size() - 1; g >= 1; --g) {
        tp += groups[g].pos;
        fp += groups[g].neg;
        const double t = (groups[g - 1].score + groups[g].score) / 2.0;
        const double sens = static_cast<double>(tp) / positives;
        const double spec = static_cast<double>(negatives - fp) / negatives;
        const double mean = (sens + spec) / 2.0;
        const bool better = !have || mean > best.mean_recall + 1e-12 ||
                            (std::abs(mean - best.mean_recall) <= 1e-12 &&
                             (sens > best.sensitivity || (sens == best.sensitivity && t < best.threshold)));
        if (better) {
            best = {t, mean, sens, spec};
            have = true;
        }
    }
    return best;
}

}  // namespace retscreen::calibration
