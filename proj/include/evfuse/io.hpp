#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "evfuse/core.hpp"
#include "evfuse/events.hpp"
#include "evfuse/gradients.hpp"
#include "evfuse/perturb.hpp"

namespace evfuse::io {

namespace fs = std::filesystem;

// EMB1: "EMB1", u32 LE batch, steps, dim, then batch*steps*dim float32 LE.
// A file may hold several blocks back to back.
void write_emb1(const fs::path& path, const Tensor3& values);
void write_emb1_blocks(const fs::path& path, const std::vector<Tensor3>& blocks);
Tensor3 read_emb1(const fs::path& path);
std::vector<Tensor3> read_emb1_blocks(const fs::path& path);

struct LoadedSequence {
    EmbeddingSequence sequence;
    std::vector<std::string> video_ids;
};

/// One JSON object per line: {"video_id": str, "embeddings": [[...], ...]}.
/// Every line must have the same number of steps and dims.
LoadedSequence read_embedding_jsonl(const fs::path& path, Modality modality);

/// .jsonl / .json go through the JSON-lines reader, anything else is EMB1.
LoadedSequence load_sequence(const fs::path& path, Modality modality);

// FRM1: "FRM1", u32 LE frames, height, width, then frames*height*width u8.
// Intensities are divided by 255 on load.
void write_frm1(const fs::path& path, std::size_t frames, std::size_t height, std::size_t width,
                const std::vector<std::uint8_t>& pixels);
events::FrameSequence read_frm1(const fs::path& path);

/// Packed event maps (MSB first, each segment padded to a whole byte) plus a
/// JSON sidecar with shapes and byte offsets.
void write_events(const fs::path& bin_path, const fs::path& json_path,
                  const std::vector<events::EventSegment>& segments, const events::EventOptions& options);
std::vector<events::EventSegment> read_events(const fs::path& bin_path, const fs::path& json_path);

/// Labels JSON: [{"video_id": str, "label": 0|1}] or
/// [{"video_id": str, "labels": [0|1, ...]}] for per-step labels.
/// Returned in file order, flattened.
struct LabelSet {
    std::vector<std::string> video_ids;
    std::vector<int> labels;
    bool per_step = false;
};
LabelSet read_labels(const fs::path& path);

/// Reorders labels to follow `video_ids`. Ids missing from the label file
/// are a ShapeMismatch.
std::vector<int> align_labels(const LabelSet& labels, const std::vector<std::string>& video_ids,
                              std::size_t steps);

nlohmann::json heads_to_json(const losses::LinearHeads& heads);
losses::LinearHeads heads_from_json(const nlohmann::json& j);
void write_heads(const fs::path& path, const losses::LinearHeads& heads);
losses::LinearHeads read_heads(const fs::path& path);

/// Affine refiner as two EMB1 blocks: weight (1, D, D) then bias (1, 1, D).
void write_affine(const fs::path& path, const refine::AffineEstimator& est);
refine::AffineEstimator read_affine(const fs::path& path);

/// video_id,segment_index,score,label,video_is_anomalous
void write_scores_csv(const fs::path& path, const std::vector<ScoreSeries>& series);
std::vector<ScoreSeries> read_scores_csv(const fs::path& path);

/// Header comment lines carry the seed and each row's mask indices.
void write_sweep_csv(const fs::path& path, const perturb::SweepResult& sweep);
nlohmann::json sweep_summary(const perturb::SweepResult& sweep);

/// Flat "key = value" lines; '#' starts a comment; string values may be quoted.
std::map<std::string, std::string> read_kv_config(const fs::path& path);
/// Applies known keys onto cfg; unknown keys raise InvalidConfig.
void apply_kv_config(const std::map<std::string, std::string>& kv, FusionConfig& cfg);

nlohmann::json config_to_json(const FusionConfig& cfg);
FusionConfig config_from_json(const nlohmann::json& j);

void write_json(const fs::path& path, const nlohmann::json& j);
nlohmann::json read_json(const fs::path& path);

}  // namespace evfuse::io
