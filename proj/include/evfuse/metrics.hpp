#pragma once

#include <optional>
#include <span>
#include <vector>

#include "evfuse/core.hpp"

namespace evfuse::metrics {

struct EvalReport {
    double auc = 0.0;
    std::optional<double> ano_auc;
    double ap = 0.0;
    double brier = 0.0;
    double pred_kl = 0.0;
};

/// Mann-Whitney AUC from average ranks: P(pos > neg) + 0.5 P(tie).
double roc_auc(std::span<const double> scores, std::span<const int> labels);

/// Average precision with tied scores treated as one threshold: each
/// positive contributes precision = pos/all among items scoring >= it.
/// For distinct scores this is the usual rank walk.
double average_precision(std::span<const double> scores, std::span<const int> labels);

/// Mean of (p - y)^2.
double brier(std::span<const double> probs, std::span<const int> labels);

inline constexpr double kKlClip = 1e-7;

/// Mean Bernoulli KL(clean || perturbed) after clipping both to [1e-7, 1-1e-7].
double prediction_kl(std::span<const double> clean, std::span<const double> perturbed);

/// roc_auc restricted to items whose video is anomalous.
double ano_auc(std::span<const double> scores, std::span<const int> labels,
               const std::vector<bool>& video_is_anomalous);

/// Flattens score series and computes every metric. A video counts as
/// anomalous from its explicit flag, else when any of its labels is 1.
/// Ano-AUC is reported when that subset contains both classes.
EvalReport evaluate(const std::vector<ScoreSeries>& series,
                    const std::vector<ScoreSeries>* reference = nullptr);

}  // namespace evfuse::metrics
