#pragma once

#include <span>
#include <vector>

#include "evfuse/core.hpp"

namespace evfuse::losses {

/// Mean head g and log-variance head h for one modality. Weights are D x D
/// row-major: out_j = sum_k W[j][k] x_k + b_j.
struct ProjectionHeads {
    std::size_t dim = 0;
    std::vector<double> mean_weight;
    std::vector<double> mean_bias;
    std::vector<double> logvar_weight;
    std::vector<double> logvar_bias;

    static ProjectionHeads zeros(std::size_t dim);
    /// g = identity, h = 0: mean passes the input through with unit variance.
    static ProjectionHeads identity_mean(std::size_t dim);
    void validate() const;
};

/// Per-modality projection heads plus the shared per-step classifier H.
struct LinearHeads {
    ProjectionHeads image;
    ProjectionHeads event;
    std::vector<double> classifier_weight;
    double classifier_bias = 0.0;

    std::size_t dim() const { return image.dim; }
    static LinearHeads zeros(std::size_t dim);
    void validate() const;
};

UncertainEstimate predict_heads(const EmbeddingSequence& seq, const ProjectionHeads& heads);

/// floor(length / segment_len) + 1, verbatim. At exact multiples this counts a
/// trailing empty segment; `segments()` lists only the non-empty ones.
std::size_t segment_count(std::size_t length, std::size_t segment_len);

struct Segment {
    std::size_t begin = 0;
    std::size_t end = 0;  // exclusive
};

/// Non-overlapping windows of segment_len steps; the last may be shorter.
std::vector<Segment> segments(std::size_t length, std::size_t segment_len);

/// Either one label per video (size B) or one per step (size B*T). Step
/// labels become segment labels by max over the segment.
std::vector<std::vector<int>> segment_labels(std::span<const int> labels, std::size_t batch,
                                             std::size_t steps, std::size_t segment_len);

struct SegmentedBce {
    double loss = 0.0;
    std::vector<std::vector<double>> segment_probabilities;  // [video][segment]
    std::vector<std::vector<int>> segment_labels;
};

inline constexpr double kProbabilityFloor = 1e-15;

double sigmoid(double x);

/// logits shaped (B,T,1). Sigmoid per step, average within segments, binary
/// cross-entropy against segment labels, mean over every segment of every video.
SegmentedBce bce_segmented(const Tensor3& logits, std::span<const int> labels, std::size_t segment_len);

/// 0.5 (v + mu^2 - 1 - log v) for one value.
double kl_closed_form(double mean, double effective_variance);

/// Closed-form KL to N(0,1) under the effective variance, mean over all values.
double kl_to_standard_normal(const UncertainEstimate& est, const NoiseModel& model);

struct RegLoss {
    double loss = 0.0;
    std::size_t used_slices = 0;
    /// Slices where either vector is zero (cosine undefined); excluded from the mean.
    std::size_t degenerate_slices = 0;
};

/// lambda1 (1 - cos) + lambda2 | ||mu_x|| - ||mu_e|| | per (b,t) slice, averaged.
RegLoss reg_loss(const Tensor3& mu_x, const Tensor3& mu_e, double lambda1, double lambda2);

struct LossParts {
    double cls = 0.0;
    std::vector<double> kl;
    double reg = 0.0;
};

double total_loss(const LossParts& parts);

}  // namespace evfuse::losses
