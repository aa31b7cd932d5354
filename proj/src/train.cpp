#include "evfuse/train.hpp"

#include <cmath>
#include <random>

#include "evfuse/metrics.hpp"

namespace evfuse::train {

SyntheticData make_complementary_fixture(const SyntheticSpec& spec, std::uint64_t seed) {
    if (spec.videos < 2 || spec.steps == 0 || spec.dim < 2) {
        throw Error(ErrorCode::InvalidConfig, "synthetic fixture needs >= 2 videos, >= 1 step, dim >= 2");
    }
    if (!(spec.anomaly_fraction > 0.0 && spec.anomaly_fraction < 1.0)) {
        throw Error(ErrorCode::InvalidConfig, "anomaly_fraction must lie in (0,1)");
    }
    Rng rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const Shape s{spec.videos, spec.steps, spec.dim};
    SyntheticData out;
    out.fixture.image = {Tensor3(s), Modality::Image};
    out.fixture.event = {Tensor3(s), Modality::Event};

    // Evenly interleaved classes so every split sees both anomaly kinds.
    const auto anomalous = static_cast<std::size_t>(std::llround(spec.anomaly_fraction * spec.videos));
    const std::size_t half = spec.dim / 2;
    for (std::size_t b = 0; b < spec.videos; ++b) {
        const bool is_anom = b * anomalous / spec.videos != (b + 1) * anomalous / spec.videos;
        const int cls = !is_anom ? 0 : ((b * anomalous / spec.videos) % 2 == 0 ? 1 : 2);
        out.anomaly_class.push_back(cls);
        out.fixture.labels.push_back(cls != 0 ? 1 : 0);
        out.video_ids.push_back("synth_" + std::to_string(b));
        for (std::size_t t = 0; t < spec.steps; ++t) {
            auto x = out.fixture.image.values.slice(b, t);
            auto e = out.fixture.event.values.slice(b, t);
            for (std::size_t i = 0; i < spec.dim; ++i) {
                x[i] = spec.noise * gauss(rng) + (cls == 1 && i < half ? spec.signal : 0.0);
                e[i] = spec.noise * gauss(rng) + (cls == 2 && i < half ? spec.signal : 0.0);
            }
        }
    }
    return out;
}

gradients::ModelParams init_params(std::size_t dim, std::uint64_t seed, double scale) {
    Rng rng(seed);
    std::normal_distribution<double> gauss(0.0, scale);
    auto p = gradients::ModelParams::zeros(dim);
    for (auto* h : {&p.heads.image, &p.heads.event}) {
        *h = losses::ProjectionHeads::identity_mean(dim);
        for (double& w : h->mean_weight) w += gauss(rng);
        for (double& w : h->logvar_weight) w = gauss(rng);
    }
    for (double& w : p.heads.classifier_weight) w = gauss(rng);
    return p;
}

std::string_view to_string(Optimizer o) { return o == Optimizer::Adam ? "adam" : "gd"; }

Optimizer optimizer_from_string(std::string_view s) {
    if (s == "adam") return Optimizer::Adam;
    if (s == "gd" || s == "sgd") return Optimizer::GradientDescent;
    throw Error(ErrorCode::InvalidConfig, "unknown optimizer '" + std::string(s) + "'");
}

namespace {

bool trainable(const std::string& name, const TrainOptions& o) {
    if (name.starts_with("classifier.")) return o.train_classifier;
    if (name.starts_with("refiner.")) return o.train_refiner;
    return o.train_heads;
}

}  // namespace

TrainResult train(const gradients::LossFixture& data, gradients::ModelParams init, const PipelineOptions& options,
                  const TrainOptions& train_options, const EpochCallback& on_epoch) {
    if (!(train_options.learning_rate >= 0.0) || !std::isfinite(train_options.learning_rate)) {
        throw Error(ErrorCode::InvalidConfig, "learning rate must be finite and >= 0");
    }
    TrainResult result{std::move(init), {}};
    auto params = gradients::parameters(result.params);
    std::vector<bool> mask;
    for (const auto& p : params) mask.push_back(trainable(p.name, train_options));
    std::vector<double> m1(params.size(), 0.0), m2(params.size(), 0.0);
    const auto& o = train_options;

    for (std::size_t epoch = 0; epoch <= train_options.epochs; ++epoch) {
        gradients::GradientResult g;
        try {
            g = gradients::loss_gradients(data, result.params, options);
        } catch (const Error& e) {
            // Parameters that overflow the forward pass count as divergence.
            if (epoch == 0 || (e.code() != ErrorCode::NonFiniteValue && e.code() != ErrorCode::NonPositiveVariance)) {
                throw;
            }
            throw Error(ErrorCode::Divergence, "forward pass failed at step " + std::to_string(epoch) + ": " + e.what());
        }
        if (!std::isfinite(g.loss.total)) {
            throw Error(ErrorCode::Divergence, "loss is not finite at step " + std::to_string(epoch));
        }
        result.curve.push_back(g.loss);
        if (on_epoch) on_epoch(epoch, g.loss);
        if (epoch == train_options.epochs) break;
        auto grads = gradients::parameters(g.grad);
        for (std::size_t k = 0; k < params.size(); ++k) {
            if (!mask[k]) continue;
            const double gk = *grads[k].value;
            if (!std::isfinite(gk)) {
                throw Error(ErrorCode::Divergence, "gradient of " + params[k].name + " is not finite at step " +
                                                       std::to_string(epoch));
            }
            if (o.optimizer == Optimizer::GradientDescent) {
                *params[k].value -= o.learning_rate * gk;
                continue;
            }
            m1[k] = o.beta1 * m1[k] + (1.0 - o.beta1) * gk;
            m2[k] = o.beta2 * m2[k] + (1.0 - o.beta2) * gk * gk;
            const double step = static_cast<double>(epoch + 1);
            const double mhat = m1[k] / (1.0 - std::pow(o.beta1, step));
            const double vhat = m2[k] / (1.0 - std::pow(o.beta2, step));
            *params[k].value -= o.learning_rate * mhat / (std::sqrt(vhat) + o.adam_eps);
        }
    }
    return result;
}

FusionPipeline make_pipeline(const gradients::ModelParams& params, const PipelineOptions& options) {
    return FusionPipeline(options, params.heads, std::make_shared<refine::AffineEstimator>(params.refiner));
}

double segment_auc(const gradients::ModelParams& params, const PipelineOptions& options, const SyntheticData& data) {
    const auto pipeline = make_pipeline(params, options);
    const auto out = pipeline.run(data.fixture.image, data.fixture.event);
    const auto series = segment_scores(out, data.fixture.labels, options.config.segment_len, data.video_ids);
    return metrics::evaluate(series).auc;
}

ComplementaryReport run_complementary_demo(const SyntheticSpec& spec, const TrainOptions& train_options,
                                           const PipelineOptions& base, std::uint64_t seed) {
    const auto train_set = make_complementary_fixture(spec, seed);
    const auto test_set = make_complementary_fixture(spec, seed + 1000003);
    ComplementaryReport report;
    for (PipelineMode mode : {PipelineMode::Fused, PipelineMode::ImageOnly, PipelineMode::EventOnly}) {
        PipelineOptions opts = base;
        opts.mode = mode;
        auto result = train(train_set.fixture, init_params(spec.dim, seed), opts, train_options);
        const double auc = segment_auc(result.params, opts, test_set);
        if (mode == PipelineMode::Fused) {
            report.fused_auc = auc;
            report.fused = std::move(result);
        } else if (mode == PipelineMode::ImageOnly) {
            report.image_auc = auc;
        } else {
            report.event_auc = auc;
        }
    }
    return report;
}

}  // namespace evfuse::train
