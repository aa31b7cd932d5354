#include "evfuse/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "evfuse/fusion.hpp"

namespace evfuse::perturb {

std::size_t masked_count(double rho, std::size_t dim) {
    if (!(rho >= 0.0 && rho <= 1.0)) throw Error(ErrorCode::InvalidConfig, "rho must lie in [0,1]");
    const auto n = static_cast<std::size_t>(std::floor(rho * static_cast<double>(dim) + 1e-9));
    return std::min(n, dim);
}

MaskSpec make_mask_spec(Modality target, double rho, std::size_t dim, std::uint64_t seed) {
    if (target == Modality::Other) throw Error(ErrorCode::InvalidConfig, "mask target must be image or event");
    if (dim == 0) throw Error(ErrorCode::InvalidConfig, "mask dim must be >= 1");
    const std::size_t n = masked_count(rho, dim);
    std::vector<std::size_t> perm(dim);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(seed);
    // Explicit Fisher-Yates: std::shuffle is not specified to be portable.
    for (std::size_t i = dim - 1; i > 0; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i);
        std::swap(perm[i], perm[pick(rng)]);
    }
    MaskSpec spec{target, rho, seed, {perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n)}};
    std::sort(spec.indices.begin(), spec.indices.end());
    return spec;
}

void validate_mask(const MaskSpec& spec, std::size_t dim) {
    for (std::size_t k = 0; k < spec.indices.size(); ++k) {
        if (spec.indices[k] >= dim) {
            throw Error(ErrorCode::IndexOutOfRange, "mask index " + std::to_string(spec.indices[k]) +
                                                        " outside [0, " + std::to_string(dim) + ")");
        }
        if (k > 0 && spec.indices[k] <= spec.indices[k - 1]) {
            throw Error(ErrorCode::InvalidConfig, "mask indices must be sorted and unique");
        }
    }
    if (spec.indices.size() != masked_count(spec.rho, dim)) {
        throw Error(ErrorCode::InvalidConfig, "mask size does not equal floor(rho*D)");
    }
}

EmbeddingSequence apply_mask(const EmbeddingSequence& seq, const MaskSpec& spec) {
    const Shape& s = seq.shape();
    validate_mask(spec, s.dim);
    EmbeddingSequence out = seq;
    for (std::size_t b = 0; b < s.batch; ++b) {
        for (std::size_t t = 0; t < s.steps; ++t) {
            auto x = out.values.slice(b, t);
            for (std::size_t i : spec.indices) x[i] = 0.0;
        }
    }
    return out;
}

namespace {

std::vector<bool> video_flags(std::span<const int> labels, std::size_t batch, std::size_t steps) {
    std::vector<bool> flags(batch, false);
    if (labels.empty()) return flags;
    if (labels.size() == batch) {
        for (std::size_t b = 0; b < batch; ++b) flags[b] = labels[b] == 1;
    } else if (labels.size() == batch * steps) {
        for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t t = 0; t < steps; ++t) flags[b] = flags[b] || labels[b * steps + t] == 1;
        }
    } else {
        throw Error(ErrorCode::ShapeMismatch, "labels must have B or B*T entries");
    }
    return flags;
}

Tensor3 normalized_image_weight(const PipelineOutput& out) {
    if (out.per_step.weights.size() != 2) {
        throw Error(ErrorCode::InvalidConfig, "weight surfaces need a two-modality pipeline");
    }
    return fusion::normalized_weights(out.per_step)[0];
}

// Means over every value, and over values of abnormal / normal videos.
void split_means(const Tensor3& x, const std::vector<bool>& flags, double& all, double& ab, double& n) {
    const Shape& s = x.shape;
    double sum = 0.0, sum_ab = 0.0, sum_n = 0.0;
    std::size_t c_ab = 0, c_n = 0;
    for (std::size_t b = 0; b < s.batch; ++b) {
        double vb = 0.0;
        for (std::size_t t = 0; t < s.steps; ++t) {
            for (double v : x.slice(b, t)) vb += v;
        }
        sum += vb;
        if (flags[b]) {
            sum_ab += vb;
            ++c_ab;
        } else {
            sum_n += vb;
            ++c_n;
        }
    }
    const auto per_video = static_cast<double>(s.steps * s.dim);
    all = sum / static_cast<double>(s.size());
    ab = c_ab > 0 ? sum_ab / (static_cast<double>(c_ab) * per_video) : 0.0;
    n = c_n > 0 ? sum_n / (static_cast<double>(c_n) * per_video) : 0.0;
}

DeltaWeightSurface surface_from(const Tensor3& clean_wx, const Tensor3& masked_wx, const MaskSpec& spec,
                                const std::vector<bool>& flags) {
    Tensor3 delta = masked_wx;
    for (std::size_t k = 0; k < delta.data.size(); ++k) delta.data[k] -= clean_wx.data[k];

    DeltaWeightSurface out;
    out.target = spec.target;
    out.rho = spec.rho;
    const Shape& s = delta.shape;
    out.delta_image_per_dim.assign(s.dim, 0.0);
    for (std::size_t b = 0; b < s.batch; ++b) {
        for (std::size_t t = 0; t < s.steps; ++t) {
            auto d = delta.slice(b, t);
            for (std::size_t i = 0; i < s.dim; ++i) out.delta_image_per_dim[i] += d[i];
        }
    }
    for (double& v : out.delta_image_per_dim) v /= static_cast<double>(s.slices());
    split_means(delta, flags, out.mean_delta_image, out.mean_delta_image_abnormal, out.mean_delta_image_normal);
    return out;
}

std::pair<EmbeddingSequence, EmbeddingSequence> masked_inputs(const PerturbInputs& data, const MaskSpec& spec) {
    if (spec.target == Modality::Image) return {apply_mask(data.image, spec), data.event};
    return {data.image, apply_mask(data.event, spec)};
}

}  // namespace

DeltaWeightSurface delta_weights(const FusionPipeline& pipeline, const PerturbInputs& clean,
                                 const MaskSpec& spec) {
    const Shape& s = clean.image.shape();
    const auto flags = video_flags(clean.labels, s.batch, s.steps);
    const Tensor3 clean_wx = normalized_image_weight(pipeline.run(clean.image, clean.event));
    const auto [img, ev] = masked_inputs(clean, spec);
    const Tensor3 masked_wx = normalized_image_weight(pipeline.run(img, ev));
    return surface_from(clean_wx, masked_wx, spec, flags);
}

SweepResult perturbation_sweep(const FusionPipeline& pipeline, const PerturbInputs& data,
                               const std::vector<double>& rho_levels, const std::vector<Modality>& targets,
                               std::uint64_t seed) {
    const Shape& s = data.image.shape();
    if (data.labels.empty()) throw Error(ErrorCode::EmptyInput, "perturbation sweep needs labels");
    const auto flags = video_flags(data.labels, s.batch, s.steps);
    const std::size_t seg_len = pipeline.options().config.segment_len;

    const PipelineOutput clean_out = pipeline.run(data.image, data.event);
    const Tensor3 clean_wx = normalized_image_weight(clean_out);
    const auto clean_series = segment_scores(clean_out, data.labels, seg_len, data.video_ids);

    SweepResult result;
    result.seed = seed;
    result.dim = s.dim;
    split_means(clean_wx, flags, result.clean_wx, result.clean_wx_ab, result.clean_wx_n);

    SweepRow clean_row;
    clean_row.noise_type = "CLEAN";
    clean_row.report = metrics::evaluate(clean_series, &clean_series);
    clean_row.mask = MaskSpec{Modality::Other, 0.0, seed, {}};
    clean_row.surface.assign(s.dim, 0.0);
    result.rows.push_back(clean_row);

    for (Modality target : targets) {
        for (double rho : rho_levels) {
            const MaskSpec spec = make_mask_spec(target, rho, s.dim, seed);
            const auto [img, ev] = masked_inputs(data, spec);
            const PipelineOutput out = pipeline.run(img, ev);
            const auto series = segment_scores(out, data.labels, seg_len, data.video_ids);
            const auto surface = surface_from(clean_wx, normalized_image_weight(out), spec, flags);

            SweepRow row;
            row.noise_type = target == Modality::Event ? "EV_NOISE" : "IMG_NOISE";
            row.rho = rho;
            row.report = metrics::evaluate(series, &clean_series);
            row.dwx = surface.mean_delta_image;
            row.dwx_ab = surface.mean_delta_image_abnormal;
            row.dwx_n = surface.mean_delta_image_normal;
            row.dwe = -row.dwx;
            row.dwe_ab = -row.dwx_ab;
            row.dwe_n = -row.dwx_n;
            row.mask = spec;
            row.surface = surface.delta_image_per_dim;
            result.rows.push_back(std::move(row));
        }
    }
    return result;
}

namespace {

// Toy construction. Mean heads pass inputs through; log-variance heads are
// h(z) = kLogvarBias - kLogvarSlope * z, so zeroed features get the highest
// variance. The image stream sits above the event stream and carries the
// anomaly shift; the event stream carries a per-video offset that acts as
// nuisance noise.
constexpr double kLogvarSlope = 1.0;
constexpr double kLogvarBias = 1.0;
constexpr double kImageLevel = 1.5;
constexpr double kEventLevel = 1.0;
constexpr double kAnomalyShift = 0.4;
constexpr double kEventVideoSpread = 0.25;
constexpr double kStepNoise = 0.02;
constexpr double kClassifierGain = 4.0;

}  // namespace

ToyPerturbFixture make_toy_perturb_fixture(std::uint64_t seed, std::size_t videos, std::size_t steps,
                                           std::size_t dim) {
    if (videos < 2 || steps == 0 || dim == 0) throw Error(ErrorCode::InvalidConfig, "toy fixture too small");
    Rng rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    PerturbInputs data;
    data.image = {Tensor3({videos, steps, dim}), Modality::Image};
    data.event = {Tensor3({videos, steps, dim}), Modality::Event};
    for (std::size_t b = 0; b < videos; ++b) {
        const int label = b % 2 == 1 ? 1 : 0;
        data.labels.push_back(label);
        data.video_ids.push_back("toy_" + std::to_string(b));
        const double img_level = kImageLevel + (label ? kAnomalyShift : 0.0);
        const double ev_level = kEventLevel + kEventVideoSpread * gauss(rng);
        for (std::size_t t = 0; t < steps; ++t) {
            auto x = data.image.values.slice(b, t);
            auto e = data.event.values.slice(b, t);
            for (std::size_t i = 0; i < dim; ++i) {
                x[i] = img_level + kStepNoise * gauss(rng);
                e[i] = ev_level + kStepNoise * gauss(rng);
            }
        }
    }

    losses::LinearHeads heads = losses::LinearHeads::zeros(dim);
    for (auto* h : {&heads.image, &heads.event}) {
        *h = losses::ProjectionHeads::identity_mean(dim);
        for (std::size_t i = 0; i < dim; ++i) {
            h->logvar_weight[i * dim + i] = -kLogvarSlope;
            h->logvar_bias[i] = kLogvarBias;
        }
    }
    // Logit = gain * (mean fused value - midpoint between the class levels).
    const double mid = kImageLevel + 0.5 * kAnomalyShift;
    heads.classifier_weight.assign(dim, kClassifierGain / static_cast<double>(dim));
    heads.classifier_bias = -kClassifierGain * (mid - 0.1);

    PipelineOptions options;
    options.layer_norm = false;
    return {FusionPipeline(options, std::move(heads), nullptr), std::move(data)};
}

}  // namespace evfuse::perturb
