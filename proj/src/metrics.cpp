#include "retscreen/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "retscreen/error.hpp"
#include "retscreen/rng.hpp"

namespace retscreen::metrics {

void ConfusionCounts::add(bool predicted, bool truth) {
    if (predicted && truth) ++tp;
    else if (predicted) ++fp;
    else if (truth) ++fn;
    else ++tn;
}

ConfusionCounts confusion(std::span<const int> predictions, std::span<const int> truths) {
    require(predictions.size() == truths.size(), "predictions and truths differ in length");
    ConfusionCounts c;
    for (std::size_t i = 0; i < predictions.size(); ++i) c.add(predictions[i] != 0, truths[i] != 0);
    return c;
}

SensSpec sensitivity_specificity(const ConfusionCounts& c) {
    if (c.tp + c.fn == 0) fail(ErrorKind::UndefinedRate, "sensitivity undefined: no positive cases");
    if (c.tn + c.fp == 0) fail(ErrorKind::UndefinedRate, "specificity undefined: no negative cases");
    return {static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn),
            static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp)};
}

double cohen_kappa(std::span<const int> a, std::span<const int> b) {
    require(a.size() == b.size(), "cohen_kappa: label vectors differ in length");
    require(!a.empty(), "cohen_kappa: empty label vectors");
    const double n = static_cast<double>(a.size());
    std::map<int, double> ma, mb;
    double agree = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma[a[i]] += 1.0;
        mb[b[i]] += 1.0;
        agree += a[i] == b[i] ? 1.0 : 0.0;
    }
    const double p_o = agree / n;
    double p_e = 0.0;
    for (const auto& [k, count] : ma) {
        const auto it = mb.find(k);
        if (it != mb.end()) p_e += (count / n) * (it->second / n);
    }
    if (p_e >= 1.0) {
        // Both raters used one identical class throughout.
        return 1.0;
    }
    return (p_o - p_e) / (1.0 - p_e);
}

double auc_binary(std::span<const double> scores, std::span<const int> labels) {
    require(scores.size() == labels.size(), "auc_binary: scores and labels differ in length");
    std::size_t n_pos = 0;
    for (int y : labels) n_pos += y != 0 ? 1 : 0;
    const std::size_t n_neg = labels.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) fail(ErrorKind::UndefinedRate, "auc_binary: both classes must be present");

    // Rank-sum with average ranks for ties.
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto i, auto j) { return scores[i] < scores[j]; });
    double pos_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double avg_rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) {
            if (labels[order[k]] != 0) pos_rank_sum += avg_rank;
        }
        i = j + 1;
    }
    const double np = static_cast<double>(n_pos);
    const double u = pos_rank_sum - np * (np + 1.0) / 2.0;
    return u / (np * static_cast<double>(n_neg));
}

double weighted_ovr_auc(const std::vector<std::vector<double>>& score_matrix, std::span<const int> labels,
                        int num_classes) {
    require(score_matrix.size() == labels.size(), "weighted_ovr_auc: rows and labels differ in length");
    require(num_classes >= 2, "weighted_ovr_auc: need at least two classes");
    std::vector<std::size_t> support(num_classes, 0);
    for (int y : labels) {
        require(y >= 0 && y < num_classes, "weighted_ovr_auc: label out of range");
        ++support[y];
    }
    for (int k = 0; k < num_classes; ++k) {
        if (support[k] == 0) fail(ErrorKind::UndefinedRate, "weighted_ovr_auc: class " + std::to_string(k) + " missing");
    }
    const double n = static_cast<double>(labels.size());
    double total = 0.0;
    std::vector<double> column(labels.size());
    std::vector<int> binary(labels.size());
    for (int k = 0; k < num_classes; ++k) {
        for (std::size_t i = 0; i < labels.size(); ++i) {
            require(score_matrix[i].size() == static_cast<std::size_t>(num_classes), "weighted_ovr_auc: ragged scores");
            column[i] = score_matrix[i][k];
            binary[i] = labels[i] == k ? 1 : 0;
        }
        total += static_cast<double>(support[k]) / n * auc_binary(column, binary);
    }
    return total;
}

AgreementStats positive_negative_agreement(std::span<const int> ai, std::span<const int> human) {
    require(ai.size() == human.size(), "agreement: vectors differ in length");
    AgreementStats s;
    s.n = static_cast<std::int64_t>(ai.size());
    std::int64_t follow_pos = 0, follow_neg = 0;
    for (std::size_t i = 0; i < ai.size(); ++i) {
        if (ai[i] != 0) {
            ++s.ai_positive;
            follow_pos += human[i] != 0 ? 1 : 0;
        } else {
            ++s.ai_negative;
            follow_neg += human[i] == 0 ? 1 : 0;
        }
    }
    if (s.ai_positive > 0) s.pa = static_cast<double>(follow_pos) / static_cast<double>(s.ai_positive);
    if (s.ai_negative > 0) s.na = static_cast<double>(follow_neg) / static_cast<double>(s.ai_negative);
    if (!ai.empty()) {
        std::vector<int> a(ai.begin(), ai.end()), h(human.begin(), human.end());
        for (auto& v : a) v = v != 0;
        for (auto& v : h) v = v != 0;
        s.kappa = cohen_kappa(a, h);
    }
    return s;
}

double quantile(std::vector<double> values, double q) {
    require(!values.empty(), "quantile of an empty sample");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

double median(std::vector<double> values) {
    return quantile(std::move(values), 0.5);
}

BootstrapCI bootstrap_ci(std::size_t n_units, const IndexStatistic& statistic, const BootstrapOptions& options) {
    require(n_units > 0, "bootstrap_ci: empty data");
    require(options.resamples >= 1, "bootstrap_ci: resamples must be >= 1");
    require(options.confidence > 0.0 && options.confidence < 1.0, "bootstrap_ci: confidence must lie in (0,1)");

    std::vector<std::size_t> all(n_units);
    std::iota(all.begin(), all.end(), 0);
    const auto point = statistic(all);
    if (!point) fail(ErrorKind::UndefinedRate, "bootstrap_ci: statistic undefined on the full data");

    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(options.resamples));
    std::size_t draws = 0, undefined = 0;
    std::vector<std::size_t> idx(n_units);
    for (int r = 0; r < options.resamples; ++r) {
        Rng rng(options.seed + static_cast<std::uint64_t>(r));
        std::optional<double> v;
        for (int attempt = 0; attempt < 10 && !v; ++attempt) {
            for (auto& i : idx) i = static_cast<std::size_t>(rng.below(n_units));
            ++draws;
            v = statistic(idx);
            if (!v) ++undefined;
        }
        if (v) values.push_back(*v);
    }
    if (values.empty() || static_cast<double>(undefined) > 0.9 * static_cast<double>(draws)) {
        fail(ErrorKind::UndefinedRate, "bootstrap_ci: statistic undefined on more than 90% of resamples");
    }
    const double alpha = 1.0 - options.confidence;
    BootstrapCI ci;
    ci.point = *point;
    ci.lo = quantile(values, alpha / 2.0);
    ci.hi = quantile(values, 1.0 - alpha / 2.0);
    ci.confidence = options.confidence;
    ci.resamples = options.resamples;
    ci.seed = options.seed;
    ci.n = n_units;
    ci.point_outside = ci.point < ci.lo || ci.point > ci.hi;
    return ci;
}

}  // namespace retscreen::metrics
