#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "evfuse/gradients.hpp"

namespace evfuse::train {

/// Two anomaly classes: class A shifts the first half of the image features,
/// class B the first half of the event features. Both modalities carry
/// independent Gaussian noise. Labels are per video.
struct SyntheticSpec {
    std::size_t videos = 48;
    std::size_t steps = 32;
    std::size_t dim = 8;
    double signal = 1.0;
    double noise = 1.0;
    double anomaly_fraction = 0.5;
};

struct SyntheticData {
    gradients::LossFixture fixture;
    std::vector<int> anomaly_class;  // 0 normal, 1 image-borne, 2 event-borne
    std::vector<std::string> video_ids;
};

SyntheticData make_complementary_fixture(const SyntheticSpec& spec, std::uint64_t seed);

enum class Optimizer { GradientDescent, Adam };

std::string_view to_string(Optimizer o);
Optimizer optimizer_from_string(std::string_view s);

struct TrainOptions {
    Optimizer optimizer = Optimizer::GradientDescent;
    double learning_rate = 0.02;
    std::size_t epochs = 150;
    // Adam moment decay rates and denominator floor.
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    bool train_heads = true;
    bool train_classifier = true;
    bool train_refiner = true;
};

struct TrainResult {
    gradients::ModelParams params;
    std::vector<gradients::LossBreakdown> curve;  // loss before each update, then the final loss
};

/// Mean heads near identity, small random log-variance heads and classifier,
/// zero refiner.
gradients::ModelParams init_params(std::size_t dim, std::uint64_t seed, double scale = 0.05);

using EpochCallback = std::function<void(std::size_t epoch, const gradients::LossBreakdown&)>;

/// Full-batch training on the total loss, plain gradient descent or Adam. Throws Divergence naming
/// the step at which the loss or a gradient stopped being finite.
TrainResult train(const gradients::LossFixture& data, gradients::ModelParams init, const PipelineOptions& options,
                  const TrainOptions& train_options, const EpochCallback& on_epoch = {});

FusionPipeline make_pipeline(const gradients::ModelParams& params, const PipelineOptions& options);

/// Segment-level ROC-AUC of the trained model on `data`.
double segment_auc(const gradients::ModelParams& params, const PipelineOptions& options,
                   const SyntheticData& data);

struct ComplementaryReport {
    double fused_auc = 0.0;
    double image_auc = 0.0;
    double event_auc = 0.0;
    TrainResult fused;
};

/// Trains fused, image-only and event-only models on one seed's training
/// split and scores each on a held-out split drawn from seed + 1000003.
ComplementaryReport run_complementary_demo(const SyntheticSpec& spec, const TrainOptions& train_options,
                                           const PipelineOptions& base, std::uint64_t seed);

}  // namespace evfuse::train
