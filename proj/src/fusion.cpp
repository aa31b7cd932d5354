#include "evfuse/fusion.hpp"

#include <algorithm>
#include <cmath>

#include "evfuse/noise.hpp"

namespace evfuse::fusion {

Tensor3 effective_variances(const UncertainEstimate& est, const NoiseModel& model) {
    validate_estimate(est);
    Tensor3 out(est.shape());
    for (std::size_t k = 0; k < out.data.size(); ++k) {
        const double sigma2 = std::exp(est.log_variance.data[k]);
        if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) {
            throw Error(ErrorCode::NonFiniteValue,
                        "exp(log_variance) out of range at flat index " + std::to_string(k));
        }
        out.data[k] = noise::effective_variance(sigma2, model);
    }
    return out;
}

FusionWeights inverse_variance_weights(const UncertainEstimate& est, const NoiseModel& model,
                                       double epsilon) {
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) {
        throw Error(ErrorCode::InvalidConfig, "epsilon must be finite and >= 0");
    }
    Tensor3 w = effective_variances(est, model);
    for (std::size_t k = 0; k < w.data.size(); ++k) {
        const double inv = 1.0 / (w.data[k] + epsilon);
        if (!(inv > 0.0) || !std::isfinite(inv)) {
            throw Error(ErrorCode::NonFiniteValue, "weight not finite at flat index " + std::to_string(k));
        }
        w.data[k] = inv;
    }
    return {std::move(w)};
}

FusionWeights inverse_variance_weights(const UncertainEstimate& est, const FusionConfig& cfg) {
    return inverse_variance_weights(est, cfg.noise(), cfg.epsilon);
}

FusedTrajectory fuse_weighted(std::span<const Tensor3> means, std::span<const Tensor3> weights) {
    if (means.empty() || means.size() != weights.size()) {
        throw Error(ErrorCode::ShapeMismatch, "fusion needs one weight tensor per mean tensor");
    }
    const Shape shape = means.front().shape;
    for (std::size_t m = 0; m < means.size(); ++m) {
        require_same_shape(shape, means[m].shape, "fused mean");
        require_same_shape(shape, weights[m].shape, "fused weight");
    }

    FusedTrajectory out{Tensor3(shape), Tensor3(shape), {}};
    out.weights.assign(weights.begin(), weights.end());
    for (std::size_t k = 0; k < shape.size(); ++k) {
        double wsum = 0.0;
        double acc = 0.0;
        double lo = means[0].data[k];
        double hi = lo;
        for (std::size_t m = 0; m < means.size(); ++m) {
            wsum += weights[m].data[k];
            acc += weights[m].data[k] * means[m].data[k];
            lo = std::min(lo, means[m].data[k]);
            hi = std::max(hi, means[m].data[k]);
        }
        // Rounding can push the ratio a hair outside the hull of the inputs.
        out.mean.data[k] = std::clamp(acc / wsum, lo, hi);
        out.variance.data[k] = 1.0 / wsum;
    }
    return out;
}

FusedTrajectory fuse_static(std::span<const UncertainEstimate> estimates, const FusionConfig& cfg) {
    if (estimates.size() < 2) {
        throw Error(ErrorCode::ShapeMismatch, "static fusion needs at least two modalities");
    }
    std::vector<Tensor3> means;
    std::vector<Tensor3> weights;
    means.reserve(estimates.size());
    weights.reserve(estimates.size());
    for (const auto& est : estimates) {
        require_same_shape(estimates.front().shape(), est.shape(), "modality estimates");
        weights.push_back(inverse_variance_weights(est, cfg.noise(), cfg.epsilon).w);
        means.push_back(est.mean);
    }
    return fuse_weighted(means, weights);
}

ScalarGaussian kalman_fuse_pair(double prior_mean, double prior_var, double obs_mean, double obs_var) {
    if (!(prior_var > 0.0) || !(obs_var > 0.0)) {
        throw Error(ErrorCode::NonPositiveVariance, "kalman update needs positive variances");
    }
    const double gain = prior_var / (prior_var + obs_var);
    return {prior_mean + gain * (obs_mean - prior_mean), 1.0 / (1.0 / prior_var + 1.0 / obs_var)};
}

std::vector<Tensor3> normalized_weights(const FusedTrajectory& fused) {
    std::vector<Tensor3> out = fused.weights;
    if (out.empty()) return out;
    const std::size_t n = out.front().data.size();
    for (std::size_t k = 0; k < n; ++k) {
        double sum = 0.0;
        for (const auto& w : fused.weights) sum += w.data[k];
        for (auto& w : out) w.data[k] /= sum;
    }
    return out;
}

}  // namespace evfuse::fusion
