#include "evfuse/pipeline.hpp"

#include "evfuse/fusion.hpp"
#include "evfuse/temporal.hpp"

namespace evfuse {

std::string_view to_string(PipelineMode m) {
    switch (m) {
        case PipelineMode::Fused: return "fused";
        case PipelineMode::ImageOnly: return "image_only";
        case PipelineMode::EventOnly: return "event_only";
    }
    return "fused";
}

std::string_view to_string(TrajectoryMode m) {
    return m == TrajectoryMode::Smoothed ? "smoothed" : "per_step";
}

TrajectoryMode trajectory_mode_from_string(std::string_view s) {
    if (s == "smoothed") return TrajectoryMode::Smoothed;
    if (s == "per_step" || s == "per-step") return TrajectoryMode::PerStep;
    throw Error(ErrorCode::InvalidConfig, "unknown trajectory mode '" + std::string(s) + "'");
}

FusionPipeline::FusionPipeline(PipelineOptions options, losses::LinearHeads heads,
                               std::shared_ptr<const refine::ResidualEstimator> refiner)
    : options_(std::move(options)), heads_(std::move(heads)), refiner_(std::move(refiner)) {
    heads_.validate();
    if (!refiner_) refiner_ = std::make_shared<refine::AffineEstimator>(refine::AffineEstimator::zero(heads_.dim()));
}

PipelineOutput FusionPipeline::run(const EmbeddingSequence& image, const EmbeddingSequence& event) const {
    validate_sequence(image);
    validate_sequence(event);
    require_same_shape(image.shape(), event.shape(), "image/event sequences");
    const FusionConfig& cfg = options_.config;
    const NoiseModel model = cfg.noise();

    PipelineOutput out;
    const auto prepare = [&](const EmbeddingSequence& s) {
        return options_.layer_norm ? layer_normalize(s) : s;
    };
    out.image = losses::predict_heads(prepare(image), heads_.image);
    out.event = losses::predict_heads(prepare(event), heads_.event);

    std::vector<Tensor3> means;
    std::vector<Tensor3> weights;
    if (options_.mode != PipelineMode::EventOnly) {
        means.push_back(out.image.mean);
        weights.push_back(fusion::inverse_variance_weights(out.image, model, cfg.epsilon).w);
    }
    if (options_.mode != PipelineMode::ImageOnly) {
        means.push_back(out.event.mean);
        weights.push_back(fusion::inverse_variance_weights(out.event, model, cfg.epsilon).w);
    }
    out.per_step = fusion::fuse_weighted(means, weights);

    // The fused variance is already an effective variance; it is not rescaled again.
    out.smoothed = options_.trajectory == TrajectoryMode::Smoothed
                       ? temporal::sequential_update(out.per_step.mean, out.per_step.variance, cfg.epsilon)
                       : out.per_step;
    out.refined = refine::refine(out.smoothed, *refiner_, cfg);

    const Shape s = image.shape();
    out.logits = Tensor3({s.batch, s.steps, 1});
    out.probabilities = Tensor3({s.batch, s.steps, 1});
    for (std::size_t b = 0; b < s.batch; ++b) {
        for (std::size_t t = 0; t < s.steps; ++t) {
            auto x = out.refined.trajectory.mean.slice(b, t);
            double z = heads_.classifier_bias;
            for (std::size_t i = 0; i < s.dim; ++i) z += heads_.classifier_weight[i] * x[i];
            out.logits.at(b, t, 0) = z;
            out.probabilities.at(b, t, 0) = losses::sigmoid(z);
        }
    }
    return out;
}

std::vector<ScoreSeries> segment_scores(const PipelineOutput& out, std::span<const int> labels,
                                        std::size_t segment_len, const std::vector<std::string>& video_ids) {
    const Shape& s = out.probabilities.shape;
    const auto segs = losses::segments(s.steps, segment_len);
    std::vector<std::vector<int>> seg_labels;
    if (!labels.empty()) seg_labels = losses::segment_labels(labels, s.batch, s.steps, segment_len);

    std::vector<ScoreSeries> series;
    series.reserve(s.batch);
    for (std::size_t b = 0; b < s.batch; ++b) {
        ScoreSeries sc;
        sc.video_id = b < video_ids.size() ? video_ids[b] : "video_" + std::to_string(b);
        for (const auto& seg : segs) {
            double p = 0.0;
            for (std::size_t t = seg.begin; t < seg.end; ++t) p += out.probabilities.at(b, t, 0);
            sc.probabilities.push_back(p / static_cast<double>(seg.end - seg.begin));
        }
        if (!seg_labels.empty()) sc.labels = seg_labels[b];
        series.push_back(std::move(sc));
    }
    return series;
}

}  // namespace evfuse
