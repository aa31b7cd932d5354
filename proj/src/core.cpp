#include "evfuse/core.hpp"

#include <algorithm>
#include <cmath>

namespace evfuse {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::NonFiniteValue: return "NonFiniteValue";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::NonPositiveVariance: return "NonPositiveVariance";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::TooFewFrames: return "TooFewFrames";
        case ErrorCode::DegenerateLabels: return "DegenerateLabels";
        case ErrorCode::DegenerateVector: return "DegenerateVector";
        case ErrorCode::Divergence: return "Divergence";
        case ErrorCode::Io: return "Io";
        case ErrorCode::Parse: return "Parse";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

std::string to_string(const Shape& s) {
    return "(" + std::to_string(s.batch) + "," + std::to_string(s.steps) + "," +
           std::to_string(s.dim) + ")";
}

Tensor3::Tensor3(Shape s, std::vector<double> values) : shape(s), data(std::move(values)) {
    if (data.size() != shape.size()) {
        throw Error(ErrorCode::ShapeMismatch, "tensor of shape " + to_string(shape) + " given " +
                                                  std::to_string(data.size()) + " values");
    }
}

std::string_view to_string(Modality m) {
    switch (m) {
        case Modality::Image: return "image";
        case Modality::Event: return "event";
        case Modality::Other: return "other";
    }
    return "other";
}

Modality modality_from_string(std::string_view s) {
    if (s == "image") return Modality::Image;
    if (s == "event") return Modality::Event;
    return Modality::Other;
}

std::string_view to_string(NoiseKind k) {
    return k == NoiseKind::Gaussian ? "gaussian" : "student_t";
}

NoiseKind noise_kind_from_string(std::string_view s) {
    if (s == "gaussian") return NoiseKind::Gaussian;
    if (s == "student_t" || s == "student-t" || s == "t") return NoiseKind::StudentT;
    throw Error(ErrorCode::InvalidConfig, "unknown noise model '" + std::string(s) + "'");
}

NoiseModel NoiseModel::student_t(double nu) {
    if (!(nu > 0.0) || !std::isfinite(nu)) {
        throw Error(ErrorCode::InvalidConfig, "student_t requires nu > 0, got " + std::to_string(nu));
    }
    return {NoiseKind::StudentT, nu};
}

NoiseModel FusionConfig::noise() const {
    return noise_model == NoiseKind::Gaussian ? NoiseModel::gaussian() : NoiseModel::student_t(nu);
}

void FusionConfig::validate() const {
    auto fail = [](const std::string& m) { throw Error(ErrorCode::InvalidConfig, m); };
    if (noise_model == NoiseKind::StudentT && (!(nu > 0.0) || !std::isfinite(nu))) fail("nu must be > 0");
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) fail("epsilon must be > 0");
    if (!(refine_lambda > 0.0 && refine_lambda < 1.0)) fail("refine_lambda must lie in (0,1)");
    if (!(reg_lambda1 >= 0.0) || !(reg_lambda2 >= 0.0)) fail("reg lambdas must be >= 0");
    if (segment_len == 0) fail("segment_len must be >= 1");
}

void validate_scores(const ScoreSeries& s) {
    if (s.labels.size() != s.probabilities.size() && s.labels.size() != 1) {
        throw Error(ErrorCode::ShapeMismatch, "video " + s.video_id + ": label count mismatch");
    }
    for (double p : s.probabilities) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw Error(ErrorCode::NonFiniteValue, "video " + s.video_id + ": probability outside [0,1]");
        }
    }
    for (int y : s.labels) {
        if (y != 0 && y != 1) throw Error(ErrorCode::DegenerateLabels, "labels must be 0 or 1");
    }
}

void validate_tensor(const Tensor3& t, std::string_view what) {
    if (t.data.size() != t.shape.size()) {
        throw Error(ErrorCode::ShapeMismatch, std::string(what) + ": shape " + to_string(t.shape) +
                                                  " but " + std::to_string(t.data.size()) + " values");
    }
    for (std::size_t k = 0; k < t.data.size(); ++k) {
        if (!std::isfinite(t.data[k])) {
            throw Error(ErrorCode::NonFiniteValue,
                        std::string(what) + ": non-finite value at flat index " + std::to_string(k));
        }
    }
}

const EmbeddingSequence& validate_sequence(const EmbeddingSequence& seq) {
    const Shape& s = seq.shape();
    if (s.batch == 0 || s.steps == 0 || s.dim == 0) {
        throw Error(ErrorCode::ShapeMismatch, "sequence dimensions must be positive, got " + to_string(s));
    }
    validate_tensor(seq.values, "sequence");
    return seq;
}

void validate_estimate(const UncertainEstimate& est) {
    require_same_shape(est.mean.shape, est.log_variance.shape, "estimate mean/log_variance");
    validate_tensor(est.mean, "estimate mean");
    validate_tensor(est.log_variance, "estimate log_variance");
}

void require_same_shape(const Shape& a, const Shape& b, std::string_view what) {
    if (!(a == b)) {
        throw Error(ErrorCode::ShapeMismatch,
                    std::string(what) + ": " + to_string(a) + " vs " + to_string(b));
    }
}

EmbeddingSequence layer_normalize(const EmbeddingSequence& seq, double eps_ln) {
    validate_sequence(seq);
    EmbeddingSequence out = seq;
    const auto d = static_cast<double>(seq.shape().dim);
    for (std::size_t b = 0; b < seq.shape().batch; ++b) {
        for (std::size_t t = 0; t < seq.shape().steps; ++t) {
            auto x = out.values.slice(b, t);
            double mean = 0.0;
            for (double v : x) mean += v;
            mean /= d;
            double var = 0.0;
            for (double v : x) var += (v - mean) * (v - mean);
            var /= d;
            // Slices flatter than eps_ln are scaled by 1/eps_ln, so a constant slice maps to zeros.
            const double denom = std::max(std::sqrt(var), eps_ln);
            for (double& v : x) v = (v - mean) / denom;
        }
    }
    return out;
}

}  // namespace evfuse
