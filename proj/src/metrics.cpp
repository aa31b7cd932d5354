#include "evfuse/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace evfuse::metrics {

namespace {

void check_inputs(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) {
        throw Error(ErrorCode::ShapeMismatch, "scores and labels differ in length");
    }
    for (double s : scores) {
        if (!std::isfinite(s)) throw Error(ErrorCode::NonFiniteValue, "score is not finite");
    }
    for (int y : labels) {
        if (y != 0 && y != 1) throw Error(ErrorCode::DegenerateLabels, "labels must be 0 or 1");
    }
}

std::size_t count_positive(std::span<const int> labels) {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
}

}  // namespace

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
    check_inputs(scores, labels);
    const std::size_t n = scores.size();
    const std::size_t pos = count_positive(labels);
    const std::size_t neg = n - pos;
    if (pos == 0 || neg == 0) {
        throw Error(ErrorCode::DegenerateLabels, "AUC needs at least one positive and one negative");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Ranks are 1-based; ties share the mean of their rank range. All sums
    // below are half-integers, so they are exact in double.
    double pos_rank_sum = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]] == 1) pos_rank_sum += avg_rank;
        }
        i = j;
    }
    const double p = static_cast<double>(pos);
    const double u = pos_rank_sum - p * (p + 1.0) / 2.0;
    return u / (p * static_cast<double>(neg));
}

double average_precision(std::span<const double> scores, std::span<const int> labels) {
    check_inputs(scores, labels);
    const std::size_t n = scores.size();
    const std::size_t pos = count_positive(labels);
    if (pos == 0) throw Error(ErrorCode::DegenerateLabels, "AP needs at least one positive");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    double acc = 0.0;
    std::size_t tp = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        std::size_t group_pos = 0;
        while (j < n && scores[order[j]] == scores[order[i]]) {
            group_pos += static_cast<std::size_t>(labels[order[j]]);
            ++j;
        }
        tp += group_pos;
        if (group_pos > 0) {
            acc += static_cast<double>(group_pos) * static_cast<double>(tp) / static_cast<double>(j);
        }
        i = j;
    }
    return acc / static_cast<double>(pos);
}

double brier(std::span<const double> probs, std::span<const int> labels) {
    check_inputs(probs, labels);
    if (probs.empty()) throw Error(ErrorCode::EmptyInput, "no predictions");
    double acc = 0.0;
    for (std::size_t k = 0; k < probs.size(); ++k) {
        if (!(probs[k] >= 0.0 && probs[k] <= 1.0)) {
            throw Error(ErrorCode::NonFiniteValue, "probability outside [0,1]");
        }
        const double d = probs[k] - labels[k];
        acc += d * d;
    }
    return acc / static_cast<double>(probs.size());
}

double prediction_kl(std::span<const double> clean, std::span<const double> perturbed) {
    if (clean.size() != perturbed.size()) {
        throw Error(ErrorCode::ShapeMismatch, "prediction sets differ in length");
    }
    if (clean.empty()) throw Error(ErrorCode::EmptyInput, "no predictions");
    double acc = 0.0;
    for (std::size_t k = 0; k < clean.size(); ++k) {
        const double p = std::clamp(clean[k], kKlClip, 1.0 - kKlClip);
        const double q = std::clamp(perturbed[k], kKlClip, 1.0 - kKlClip);
        acc += p * std::log(p / q) + (1.0 - p) * std::log((1.0 - p) / (1.0 - q));
    }
    // Rounding can leave a -1e-17 residue for identical inputs.
    return std::max(0.0, acc / static_cast<double>(clean.size()));
}

double ano_auc(std::span<const double> scores, std::span<const int> labels,
               const std::vector<bool>& video_is_anomalous) {
    if (video_is_anomalous.size() != scores.size()) {
        throw Error(ErrorCode::ShapeMismatch, "anomalous-video flags differ in length");
    }
    std::vector<double> s;
    std::vector<int> y;
    for (std::size_t k = 0; k < scores.size(); ++k) {
        if (video_is_anomalous[k]) {
            s.push_back(scores[k]);
            y.push_back(labels[k]);
        }
    }
    return roc_auc(s, y);
}

EvalReport evaluate(const std::vector<ScoreSeries>& series, const std::vector<ScoreSeries>* reference) {
    std::vector<double> scores;
    std::vector<int> labels;
    std::vector<bool> flags;
    for (const auto& s : series) {
        validate_scores(s);
        if (s.labels.size() != s.probabilities.size()) {
            throw Error(ErrorCode::ShapeMismatch, "video " + s.video_id + " needs one label per score");
        }
        const bool anomalous = s.video_is_anomalous.value_or(
            std::find(s.labels.begin(), s.labels.end(), 1) != s.labels.end());
        scores.insert(scores.end(), s.probabilities.begin(), s.probabilities.end());
        labels.insert(labels.end(), s.labels.begin(), s.labels.end());
        flags.insert(flags.end(), s.probabilities.size(), anomalous);
    }

    EvalReport report;
    report.auc = roc_auc(scores, labels);
    report.ap = average_precision(scores, labels);
    report.brier = brier(scores, labels);

    std::vector<double> sub_scores;
    std::vector<int> sub_labels;
    for (std::size_t k = 0; k < scores.size(); ++k) {
        if (flags[k]) {
            sub_scores.push_back(scores[k]);
            sub_labels.push_back(labels[k]);
        }
    }
    const std::size_t sub_pos = count_positive(sub_labels);
    if (sub_pos > 0 && sub_pos < sub_labels.size()) report.ano_auc = roc_auc(sub_scores, sub_labels);

    if (reference != nullptr) {
        std::vector<double> ref;
        for (const auto& s : *reference) ref.insert(ref.end(), s.probabilities.begin(), s.probabilities.end());
        report.pred_kl = prediction_kl(ref, scores);
    }
    return report;
}

}  // namespace evfuse::metrics
