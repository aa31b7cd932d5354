#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace evfuse {

enum class ErrorCode {
    NonFiniteValue,
    ShapeMismatch,
    NonPositiveVariance,
    InvalidConfig,
    IndexOutOfRange,
    EmptyInput,
    TooFewFrames,
    DegenerateLabels,
    DegenerateVector,
    Divergence,
    Io,
    Parse,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message);
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

struct Shape {
    std::size_t batch = 0;
    std::size_t steps = 0;
    std::size_t dim = 0;

    std::size_t size() const { return batch * steps * dim; }
    std::size_t slices() const { return batch * steps; }
    bool operator==(const Shape&) const = default;
};

std::string to_string(const Shape& s);

/// Dense (batch, time, dim) array of doubles, stored b-major then t then i.
struct Tensor3 {
    Shape shape;
    std::vector<double> data;

    Tensor3() = default;
    explicit Tensor3(Shape s, double fill = 0.0) : shape(s), data(s.size(), fill) {}
    Tensor3(Shape s, std::vector<double> values);

    std::size_t index(std::size_t b, std::size_t t, std::size_t i) const {
        return (b * shape.steps + t) * shape.dim + i;
    }
    double& at(std::size_t b, std::size_t t, std::size_t i) { return data[index(b, t, i)]; }
    double at(std::size_t b, std::size_t t, std::size_t i) const { return data[index(b, t, i)]; }

    std::span<double> slice(std::size_t b, std::size_t t) {
        return {data.data() + index(b, t, 0), shape.dim};
    }
    std::span<const double> slice(std::size_t b, std::size_t t) const {
        return {data.data() + index(b, t, 0), shape.dim};
    }

    bool operator==(const Tensor3&) const = default;
};

enum class Modality { Image, Event, Other };

std::string_view to_string(Modality m);
Modality modality_from_string(std::string_view s);

struct EmbeddingSequence {
    Tensor3 values;
    Modality modality = Modality::Other;

    const Shape& shape() const { return values.shape; }
    bool operator==(const EmbeddingSequence&) const = default;
};

/// Posterior mean and log-variance for one modality, both shaped (B,T,D).
struct UncertainEstimate {
    Tensor3 mean;
    Tensor3 log_variance;

    const Shape& shape() const { return mean.shape; }
};

/// Per-timestep fused mean/variance plus the raw (unnormalized) weight
/// of every fused source.
struct FusedTrajectory {
    Tensor3 mean;
    Tensor3 variance;
    std::vector<Tensor3> weights;

    const Shape& shape() const { return mean.shape; }
};

enum class NoiseKind { Gaussian, StudentT };

std::string_view to_string(NoiseKind k);
NoiseKind noise_kind_from_string(std::string_view s);

struct NoiseModel {
    NoiseKind kind = NoiseKind::StudentT;
    double nu = 8.0;

    static NoiseModel gaussian() { return {NoiseKind::Gaussian, 0.0}; }
    static NoiseModel student_t(double nu);

    /// Multiplier mapping sigma^2 to the effective variance.
    double variance_factor() const { return kind == NoiseKind::Gaussian ? 1.0 : nu / (nu + 1.0); }
};

struct FusionConfig {
    double nu = 8.0;
    double epsilon = 1e-8;
    std::size_t refine_steps = 10;
    double refine_lambda = 0.5;
    double reg_lambda1 = 0.5;
    double reg_lambda2 = 0.5;
    NoiseKind noise_model = NoiseKind::StudentT;
    std::size_t segment_len = 16;

    NoiseModel noise() const;

    /// Full invariant check: nu > 0 (Student-t only), epsilon > 0, refine_lambda in (0,1),
    /// lambdas >= 0, segment_len >= 1.
    void validate() const;
};

struct ScoreSeries {
    std::string video_id;
    std::vector<double> probabilities;
    std::vector<int> labels;
    std::optional<bool> video_is_anomalous;
};

void validate_scores(const ScoreSeries& s);

using Rng = std::mt19937_64;

/// Checks length == B*T*D and that every value is finite.
const EmbeddingSequence& validate_sequence(const EmbeddingSequence& seq);
void validate_tensor(const Tensor3& t, std::string_view what);
void validate_estimate(const UncertainEstimate& est);

inline constexpr double kLayerNormEps = 1e-5;

/// Per (b,t) slice: (x - mean) / max(std, eps_ln) with the population std.
/// Constant slices map to zeros; other slices come out with unit std.
EmbeddingSequence layer_normalize(const EmbeddingSequence& seq, double eps_ln = kLayerNormEps);

void require_same_shape(const Shape& a, const Shape& b, std::string_view what);

}  // namespace evfuse
