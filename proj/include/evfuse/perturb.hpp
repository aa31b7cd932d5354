#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "evfuse/core.hpp"
#include "evfuse/metrics.hpp"
#include "evfuse/pipeline.hpp"

namespace evfuse::perturb {

/// Which modality gets masked and which latent dims are zeroed.
struct MaskSpec {
    Modality target = Modality::Image;
    double rho = 0.0;
    std::uint64_t seed = 0;
    std::vector<std::size_t> indices;  // sorted, unique, |I| = floor(rho*D)
};

/// floor(rho * D), tolerant of products like 0.29*100 = 28.999999999999996.
std::size_t masked_count(double rho, std::size_t dim);

/// Draws the index set from a seeded shuffle of [0, D). The first
/// floor(rho*D) entries of the same permutation are used for every rho, so
/// index sets for one (seed, target) are nested as rho grows.
MaskSpec make_mask_spec(Modality target, double rho, std::size_t dim, std::uint64_t seed);

void validate_mask(const MaskSpec& spec, std::size_t dim);

/// Zeroes dims in spec.indices for every (b,t).
EmbeddingSequence apply_mask(const EmbeddingSequence& seq, const MaskSpec& spec);

struct PerturbInputs {
    EmbeddingSequence image;
    EmbeddingSequence event;
    std::vector<int> labels;  // per video (B) or per step (B*T)
    std::vector<std::string> video_ids;
};

/// Masked-minus-clean change of the normalized image weight
/// w_x / (w_x + w_e) from the static fusion stage. The event change is its
/// negative because the two normalized weights sum to one.
struct DeltaWeightSurface {
    Modality target = Modality::Image;
    double rho = 0.0;
    std::vector<double> delta_image_per_dim;  // mean over (b,t)
    double mean_delta_image = 0.0;
    double mean_delta_image_abnormal = 0.0;
    double mean_delta_image_normal = 0.0;
};

DeltaWeightSurface delta_weights(const FusionPipeline& pipeline, const PerturbInputs& clean,
                                 const MaskSpec& spec);

struct SweepRow {
    std::string noise_type;  // CLEAN, EV_NOISE or IMG_NOISE
    double rho = 0.0;
    metrics::EvalReport report;  // pred_kl is against the clean run
    double dwe = 0.0, dwe_ab = 0.0, dwe_n = 0.0;
    double dwx = 0.0, dwx_ab = 0.0, dwx_n = 0.0;
    MaskSpec mask;
    std::vector<double> surface;  // per-dim delta of the image weight
};

struct SweepResult {
    std::vector<SweepRow> rows;
    /// Clean normalized weights: mean, abnormal-video mean, normal-video mean.
    double clean_wx = 0.0, clean_wx_ab = 0.0, clean_wx_n = 0.0;
    std::uint64_t seed = 0;
    std::size_t dim = 0;
};

inline const std::vector<double> kDefaultRhoLevels{0.05, 0.10, 0.20, 0.30, 0.50};

/// CLEAN row first, then one row per (target, rho) in the given order.
SweepResult perturbation_sweep(const FusionPipeline& pipeline, const PerturbInputs& data,
                               const std::vector<double>& rho_levels, const std::vector<Modality>& targets,
                               std::uint64_t seed);

/// Constructed fixture where masking either modality moves the image weight
/// in a known direction: identity mean heads, log-variance heads that raise
/// the variance of zeroed features, signal carried by the image modality only.
struct ToyPerturbFixture {
    FusionPipeline pipeline;
    PerturbInputs data;
};

ToyPerturbFixture make_toy_perturb_fixture(std::uint64_t seed, std::size_t videos = 16,
                                           std::size_t steps = 32, std::size_t dim = 32);

}  // namespace evfuse::perturb
