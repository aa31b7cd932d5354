#pragma once

#include <string>
#include <vector>

#include "evfuse/core.hpp"
#include "evfuse/losses.hpp"
#include "evfuse/pipeline.hpp"
#include "evfuse/refine.hpp"

namespace evfuse::gradients {

/// Everything the desk-scale trainer optimizes.
struct ModelParams {
    losses::LinearHeads heads;
    refine::AffineEstimator refiner = refine::AffineEstimator::zero(0);

    static ModelParams zeros(std::size_t dim);
};

struct LossFixture {
    EmbeddingSequence image;
    EmbeddingSequence event;
    std::vector<int> labels;  // per video (B) or per step (B*T)
};

struct LossBreakdown {
    double total = 0.0;
    double cls = 0.0;
    double kl_image = 0.0;
    double kl_event = 0.0;
    double reg = 0.0;
};

struct GradientResult {
    LossBreakdown loss;
    ModelParams grad;
};

/// Total loss of the differentiable path: heads -> weighted fusion ->
/// (sequential update) -> affine refinement -> classifier -> BCE + KL + reg.
/// Single-modality modes drop the absent modality's KL and the regularizer.
LossBreakdown evaluate_loss(const LossFixture& fixture, const ModelParams& params,
                            const PipelineOptions& options);

/// Loss plus reverse-mode gradients for every entry of `params`.
GradientResult loss_gradients(const LossFixture& fixture, const ModelParams& params,
                              const PipelineOptions& options);

struct NamedParam {
    std::string name;
    double* value;
};

/// Flat view over every scalar parameter, in a fixed order.
std::vector<NamedParam> parameters(ModelParams& params);

}  // namespace evfuse::gradients
