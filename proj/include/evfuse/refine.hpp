#pragma once

#include <span>
#include <vector>

#include "evfuse/core.hpp"

namespace evfuse::refine {

/// Side information an estimator may use. The built-in estimators ignore it.
struct RefineContext {
    std::size_t iteration = 0;
    const Tensor3* variance = nullptr;
};

/// Maps a (B,T,D) latent to a residual of the same shape.
class ResidualEstimator {
public:
    virtual ~ResidualEstimator() = default;
    virtual Tensor3 residual(const Tensor3& latent, const RefineContext& ctx) const = 0;
};

/// F(x) = W x + b on every (b,t) slice; W is D x D row-major.
class AffineEstimator final : public ResidualEstimator {
public:
    AffineEstimator(std::size_t dim, std::vector<double> weight, std::vector<double> bias);

    static AffineEstimator zero(std::size_t dim);
    static AffineEstimator identity(std::size_t dim);

    Tensor3 residual(const Tensor3& latent, const RefineContext& ctx) const override;

    std::size_t dim() const { return dim_; }
    const std::vector<double>& weight() const { return weight_; }
    const std::vector<double>& bias() const { return bias_; }
    std::vector<double>& weight() { return weight_; }
    std::vector<double>& bias() { return bias_; }

private:
    std::size_t dim_;
    std::vector<double> weight_;
    std::vector<double> bias_;
};

/// Linear -> ReLU -> Linear residual network with `hidden` units.
class MlpEstimator final : public ResidualEstimator {
public:
    MlpEstimator(std::size_t dim, std::size_t hidden, std::vector<double> w1, std::vector<double> b1,
                 std::vector<double> w2, std::vector<double> b2);

    Tensor3 residual(const Tensor3& latent, const RefineContext& ctx) const override;

private:
    std::size_t dim_;
    std::size_t hidden_;
    std::vector<double> w1_, b1_, w2_, b2_;
};

AffineEstimator make_affine_estimator(std::size_t dim, std::vector<double> weight,
                                      std::vector<double> bias);

struct RefineResult {
    FusedTrajectory trajectory;
    /// ||delta mu||_2 over the whole tensor, one entry per applied step.
    std::vector<double> residual_norms;
};

/// Applies mu <- mu - lambda * F(mu) exactly cfg.refine_steps times.
/// A non-empty `lambda_schedule` (length N, entries in (0,1)) replaces the
/// constant cfg.refine_lambda. Variances and weights pass through unchanged.
RefineResult refine(const FusedTrajectory& state0, const ResidualEstimator& estimator,
                    const FusionConfig& cfg, std::span<const double> lambda_schedule = {});

}  // namespace evfuse::refine
