#include "evfuse/losses.hpp"

#include <algorithm>
#include <cmath>

#include "evfuse/fusion.hpp"

namespace evfuse::losses {

namespace {

void check_params(const std::vector<double>& v, std::size_t n, const char* what) {
    if (v.size() != n) {
        throw Error(ErrorCode::ShapeMismatch, std::string(what) + ": expected " + std::to_string(n) +
                                                  " values, got " + std::to_string(v.size()));
    }
    for (double x : v) {
        if (!std::isfinite(x)) throw Error(ErrorCode::NonFiniteValue, std::string(what) + " is not finite");
    }
}

void affine_slices(const Tensor3& in, const std::vector<double>& w, const std::vector<double>& bias,
                   Tensor3& out) {
    const std::size_t d = in.shape.dim;
    for (std::size_t b = 0; b < in.shape.batch; ++b) {
        for (std::size_t t = 0; t < in.shape.steps; ++t) {
            auto x = in.slice(b, t);
            auto y = out.slice(b, t);
            for (std::size_t j = 0; j < d; ++j) {
                double acc = bias[j];
                for (std::size_t k = 0; k < d; ++k) acc += w[j * d + k] * x[k];
                y[j] = acc;
            }
        }
    }
}

}  // namespace

ProjectionHeads ProjectionHeads::zeros(std::size_t dim) {
    return {dim, std::vector<double>(dim * dim, 0.0), std::vector<double>(dim, 0.0),
            std::vector<double>(dim * dim, 0.0), std::vector<double>(dim, 0.0)};
}

ProjectionHeads ProjectionHeads::identity_mean(std::size_t dim) {
    auto h = zeros(dim);
    for (std::size_t j = 0; j < dim; ++j) h.mean_weight[j * dim + j] = 1.0;
    return h;
}

void ProjectionHeads::validate() const {
    if (dim == 0) throw Error(ErrorCode::ShapeMismatch, "heads need dim >= 1");
    check_params(mean_weight, dim * dim, "mean head weight");
    check_params(mean_bias, dim, "mean head bias");
    check_params(logvar_weight, dim * dim, "log-variance head weight");
    check_params(logvar_bias, dim, "log-variance head bias");
}

LinearHeads LinearHeads::zeros(std::size_t dim) {
    return {ProjectionHeads::zeros(dim), ProjectionHeads::zeros(dim), std::vector<double>(dim, 0.0), 0.0};
}

void LinearHeads::validate() const {
    image.validate();
    event.validate();
    if (image.dim != event.dim) throw Error(ErrorCode::ShapeMismatch, "image/event heads differ in dim");
    check_params(classifier_weight, image.dim, "classifier weight");
    if (!std::isfinite(classifier_bias)) throw Error(ErrorCode::NonFiniteValue, "classifier bias");
}

UncertainEstimate predict_heads(const EmbeddingSequence& seq, const ProjectionHeads& heads) {
    validate_sequence(seq);
    heads.validate();
    if (seq.shape().dim != heads.dim) {
        throw Error(ErrorCode::ShapeMismatch, "heads of dim " + std::to_string(heads.dim) +
                                                  " applied to " + to_string(seq.shape()));
    }
    UncertainEstimate est{Tensor3(seq.shape()), Tensor3(seq.shape())};
    affine_slices(seq.values, heads.mean_weight, heads.mean_bias, est.mean);
    affine_slices(seq.values, heads.logvar_weight, heads.logvar_bias, est.log_variance);
    return est;
}

std::size_t segment_count(std::size_t length, std::size_t segment_len) {
    if (segment_len == 0) throw Error(ErrorCode::InvalidConfig, "segment_len must be >= 1");
    return length / segment_len + 1;
}

std::vector<Segment> segments(std::size_t length, std::size_t segment_len) {
    if (segment_len == 0) throw Error(ErrorCode::InvalidConfig, "segment_len must be >= 1");
    std::vector<Segment> out;
    for (std::size_t begin = 0; begin < length; begin += segment_len) {
        out.push_back({begin, std::min(length, begin + segment_len)});
    }
    return out;
}

std::vector<std::vector<int>> segment_labels(std::span<const int> labels, std::size_t batch,
                                             std::size_t steps, std::size_t segment_len) {
    const bool per_video = labels.size() == batch;
    if (!per_video && labels.size() != batch * steps) {
        throw Error(ErrorCode::ShapeMismatch, "expected " + std::to_string(batch) + " video labels or " +
                                                  std::to_string(batch * steps) + " step labels, got " +
                                                  std::to_string(labels.size()));
    }
    for (int y : labels) {
        if (y != 0 && y != 1) throw Error(ErrorCode::DegenerateLabels, "labels must be 0 or 1");
    }
    const auto segs = segments(steps, segment_len);
    std::vector<std::vector<int>> out(batch);
    for (std::size_t b = 0; b < batch; ++b) {
        for (const auto& s : segs) {
            int y = 0;
            if (per_video) {
                y = labels[b];
            } else {
                for (std::size_t t = s.begin; t < s.end; ++t) y = std::max(y, labels[b * steps + t]);
            }
            out[b].push_back(y);
        }
    }
    return out;
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

SegmentedBce bce_segmented(const Tensor3& logits, std::span<const int> labels, std::size_t segment_len) {
    const Shape& s = logits.shape;
    if (s.batch == 0 || s.steps == 0) throw Error(ErrorCode::EmptyInput, "no logits");
    if (s.dim != 1) throw Error(ErrorCode::ShapeMismatch, "logits must be shaped (B,T,1)");
    validate_tensor(logits, "logits");

    SegmentedBce out;
    out.segment_labels = segment_labels(labels, s.batch, s.steps, segment_len);
    const auto segs = segments(s.steps, segment_len);
    double total = 0.0;
    std::size_t count = 0;
    out.segment_probabilities.resize(s.batch);
    for (std::size_t b = 0; b < s.batch; ++b) {
        for (std::size_t k = 0; k < segs.size(); ++k) {
            double p = 0.0;
            for (std::size_t t = segs[k].begin; t < segs[k].end; ++t) p += sigmoid(logits.at(b, t, 0));
            p /= static_cast<double>(segs[k].end - segs[k].begin);
            out.segment_probabilities[b].push_back(p);
            const double pc = std::clamp(p, kProbabilityFloor, 1.0 - kProbabilityFloor);
            total += out.segment_labels[b][k] == 1 ? -std::log(pc) : -std::log1p(-pc);
            ++count;
        }
    }
    out.loss = total / static_cast<double>(count);
    return out;
}

double kl_closed_form(double mean, double effective_variance) {
    return 0.5 * (effective_variance + mean * mean - 1.0 - std::log(effective_variance));
}

double kl_to_standard_normal(const UncertainEstimate& est, const NoiseModel& model) {
    const Tensor3 v = fusion::effective_variances(est, model);
    if (v.data.empty()) throw Error(ErrorCode::EmptyInput, "empty estimate");
    double acc = 0.0;
    for (std::size_t k = 0; k < v.data.size(); ++k) acc += kl_closed_form(est.mean.data[k], v.data[k]);
    return acc / static_cast<double>(v.data.size());
}

RegLoss reg_loss(const Tensor3& mu_x, const Tensor3& mu_e, double lambda1, double lambda2) {
    require_same_shape(mu_x.shape, mu_e.shape, "regularizer inputs");
    RegLoss out;
    double acc = 0.0;
    for (std::size_t b = 0; b < mu_x.shape.batch; ++b) {
        for (std::size_t t = 0; t < mu_x.shape.steps; ++t) {
            auto x = mu_x.slice(b, t);
            auto e = mu_e.slice(b, t);
            double dot = 0.0, nx = 0.0, ne = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) {
                dot += x[i] * e[i];
                nx += x[i] * x[i];
                ne += e[i] * e[i];
            }
            if (nx == 0.0 || ne == 0.0) {
                ++out.degenerate_slices;
                continue;
            }
            nx = std::sqrt(nx);
            ne = std::sqrt(ne);
            acc += lambda1 * (1.0 - dot / (nx * ne)) + lambda2 * std::abs(nx - ne);
            ++out.used_slices;
        }
    }
    out.loss = out.used_slices == 0 ? 0.0 : acc / static_cast<double>(out.used_slices);
    return out;
}

double total_loss(const LossParts& parts) {
    double total = parts.cls + parts.reg;
    for (double k : parts.kl) total += k;
    if (!std::isfinite(total)) throw Error(ErrorCode::NonFiniteValue, "loss is not finite");
    return total;
}

}  // namespace evfuse::losses
