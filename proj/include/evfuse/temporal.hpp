#pragma once

#include "evfuse/core.hpp"

namespace evfuse::temporal {

/// Running state of the recursion, shaped (B,D) and stored b-major.
struct TemporalState {
    std::size_t batch = 0;
    std::size_t dim = 0;
    std::vector<double> mean;
    std::vector<double> variance;
    std::size_t step = 0;
};

/// Recursive precision-weighted update along T, run independently for every
/// (b,i). The state starts from the t=0 input; each later step fuses the state
/// (weight 1/(V+eps)) with the new input (weight 1/(v+eps)).
///
/// `effective_variance` must already be the effective (Laplace) variance.
/// The returned weights are {state weight, input weight} per (b,t,i); the
/// state weight is zero at t=0.
FusedTrajectory sequential_update(const Tensor3& mean, const Tensor3& effective_variance,
                                  double epsilon);

/// Same recursion starting from raw log-variances, mapped through cfg's noise model.
FusedTrajectory sequential_update(const UncertainEstimate& obs, const FusionConfig& cfg);

/// State after the final time step of a trajectory.
TemporalState final_state(const FusedTrajectory& trajectory);

}  // namespace evfuse::temporal
