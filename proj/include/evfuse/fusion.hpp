#pragma once

#include <span>
#include <vector>

#include "evfuse/core.hpp"

namespace evfuse::fusion {

/// w = 1 / (sigma~^2 + epsilon) per value of one modality.
struct FusionWeights {
    Tensor3 w;
};

/// Effective variance per value: exp(log_var) scaled by the noise model.
Tensor3 effective_variances(const UncertainEstimate& est, const NoiseModel& model);

// epsilon >= 0 is accepted here; FusionConfig::validate() is stricter.
FusionWeights inverse_variance_weights(const UncertainEstimate& est, const NoiseModel& model,
                                       double epsilon);
FusionWeights inverse_variance_weights(const UncertainEstimate& est, const FusionConfig& cfg);

/// Precision-weighted average of any number (>= 1) of sources sharing a shape.
/// Fused variance is 1 / sum(w); the result records the weights it used.
FusedTrajectory fuse_weighted(std::span<const Tensor3> means, std::span<const Tensor3> weights);

/// Static cross-modal fusion of two or more modality estimates.
FusedTrajectory fuse_static(std::span<const UncertainEstimate> estimates, const FusionConfig& cfg);

struct ScalarGaussian {
    double mean = 0.0;
    double variance = 1.0;
};

/// Scalar Kalman measurement update with gain prior_var / (prior_var + obs_var).
ScalarGaussian kalman_fuse_pair(double prior_mean, double prior_var, double obs_mean, double obs_var);

/// Weights of each source divided by their per-value sum (they sum to 1).
std::vector<Tensor3> normalized_weights(const FusedTrajectory& fused);

}  // namespace evfuse::fusion
