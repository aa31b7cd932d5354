#pragma once

#include <memory>
#include <string>
#include <vector>

#include "evfuse/core.hpp"
#include "evfuse/losses.hpp"
#include "evfuse/refine.hpp"

namespace evfuse {

/// Which modalities feed the fused state.
enum class PipelineMode { Fused, ImageOnly, EventOnly };

/// Classifier input: the sequentially smoothed trajectory (default) or the
/// per-step cross-modal fusion without the temporal recursion.
enum class TrajectoryMode { Smoothed, PerStep };

std::string_view to_string(PipelineMode m);
std::string_view to_string(TrajectoryMode m);
TrajectoryMode trajectory_mode_from_string(std::string_view s);

struct PipelineOptions {
    FusionConfig config;
    PipelineMode mode = PipelineMode::Fused;
    TrajectoryMode trajectory = TrajectoryMode::Smoothed;
    bool layer_norm = true;
};

struct PipelineOutput {
    UncertainEstimate image;
    UncertainEstimate event;
    FusedTrajectory per_step;  // weights: one tensor per active modality
    FusedTrajectory smoothed;  // equals per_step when trajectory == PerStep
    refine::RefineResult refined;
    Tensor3 logits;         // (B,T,1)
    Tensor3 probabilities;  // (B,T,1)
};

class FusionPipeline {
public:
    FusionPipeline(PipelineOptions options, losses::LinearHeads heads,
                   std::shared_ptr<const refine::ResidualEstimator> refiner);

    PipelineOutput run(const EmbeddingSequence& image, const EmbeddingSequence& event) const;

    const PipelineOptions& options() const { return options_; }
    const losses::LinearHeads& heads() const { return heads_; }

private:
    PipelineOptions options_;
    losses::LinearHeads heads_;
    std::shared_ptr<const refine::ResidualEstimator> refiner_;
};

/// Segment-averaged probabilities per video, ready for metrics.
/// `labels` follows losses::segment_labels (per video or per step); when empty
/// the series carry no labels.
std::vector<ScoreSeries> segment_scores(const PipelineOutput& out, std::span<const int> labels,
                                        std::size_t segment_len,
                                        const std::vector<std::string>& video_ids = {});

}  // namespace evfuse
