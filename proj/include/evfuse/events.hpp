#pragma once

#include <cstdint>
#include <vector>

#include "evfuse/core.hpp"

namespace evfuse::events {

/// Grayscale video with intensities in [0,1], stored frame-major, row-major.
struct FrameSequence {
    std::size_t frames = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> pixels;

    std::size_t frame_size() const { return height * width; }
    double at(std::size_t f, std::size_t r, std::size_t c) const {
        return pixels[(f * height + r) * width + c];
    }
    void validate() const;
};

/// Binary change maps of one segment, shaped (pairs, height, width).
struct EventSegment {
    std::size_t pairs = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint8_t> maps;

    std::uint8_t at(std::size_t p, std::size_t r, std::size_t c) const {
        return maps[(p * height + r) * width + c];
    }
    bool operator==(const EventSegment&) const = default;
};

enum class ClampMode {
    /// At most `clamp` firings per pixel per segment; later firings are dropped.
    EventCountCap,
    /// |difference| is capped at clamp/255 before thresholding.
    DifferenceClamp,
};

std::string_view to_string(ClampMode m);
ClampMode clamp_mode_from_string(std::string_view s);

struct EventOptions {
    double threshold = 10.0 / 255.0;
    std::size_t clamp = 10;
    std::size_t segment_len = 16;
    ClampMode clamp_mode = ClampMode::EventCountCap;
};

/// Differences this close below the threshold still fire, so that 8-bit
/// steps of exactly threshold*255 levels are not lost to rounding.
inline constexpr double kThresholdSlack = 1e-12;

/// Splits the video into consecutive segments of segment_len frames (a final
/// partial segment is kept when it has at least two frames) and thresholds
/// |I_{t+1} - I_t| for every consecutive pair inside each segment.
std::vector<EventSegment> synth_events(const FrameSequence& frames, const EventOptions& options = {});

/// Spatial-grid pooling: flattened pixels are split row-major into `dim`
/// near-equal cells; each feature is the mean event rate of its cell over
/// all maps. Cells that receive no pixels stay zero.
std::vector<double> toy_event_encoder(const EventSegment& segment, std::size_t dim);

/// Encodes every segment, giving a (1, segments, dim) event sequence.
EmbeddingSequence encode_segments(const std::vector<EventSegment>& segments, std::size_t dim);

}  // namespace evfuse::events
