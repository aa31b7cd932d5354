#include "evfuse/events.hpp"

#include <algorithm>
#include <cmath>

namespace evfuse::events {

void FrameSequence::validate() const {
    if (height == 0 || width == 0) throw Error(ErrorCode::ShapeMismatch, "frames need positive height/width");
    if (pixels.size() != frames * height * width) {
        throw Error(ErrorCode::ShapeMismatch, "pixel count does not match frames*height*width");
    }
    for (double p : pixels) {
        if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::NonFiniteValue, "pixel intensity outside [0,1]");
    }
}

std::string_view to_string(ClampMode m) {
    return m == ClampMode::EventCountCap ? "event_count" : "difference";
}

ClampMode clamp_mode_from_string(std::string_view s) {
    if (s == "event_count" || s == "count") return ClampMode::EventCountCap;
    if (s == "difference" || s == "diff") return ClampMode::DifferenceClamp;
    throw Error(ErrorCode::InvalidConfig, "unknown clamp mode '" + std::string(s) + "'");
}

std::vector<EventSegment> synth_events(const FrameSequence& frames, const EventOptions& options) {
    frames.validate();
    if (frames.frames < 2) {
        throw Error(ErrorCode::TooFewFrames, "need at least 2 frames, got " + std::to_string(frames.frames));
    }
    if (options.segment_len < 2) throw Error(ErrorCode::InvalidConfig, "segment_len must be >= 2");
    if (!(options.threshold >= 0.0)) throw Error(ErrorCode::InvalidConfig, "threshold must be >= 0");

    const std::size_t px = frames.frame_size();
    const double diff_cap = static_cast<double>(options.clamp) / 255.0;
    std::vector<EventSegment> out;
    std::vector<std::size_t> fired(px);

    for (std::size_t begin = 0; begin < frames.frames; begin += options.segment_len) {
        const std::size_t end = std::min(frames.frames, begin + options.segment_len);
        if (end - begin < 2) break;
        EventSegment seg{end - begin - 1, frames.height, frames.width, {}};
        seg.maps.assign(seg.pairs * px, 0);
        std::fill(fired.begin(), fired.end(), 0);
        for (std::size_t p = 0; p < seg.pairs; ++p) {
            const double* a = frames.pixels.data() + (begin + p) * px;
            const double* b = a + px;
            std::uint8_t* m = seg.maps.data() + p * px;
            for (std::size_t k = 0; k < px; ++k) {
                double diff = std::abs(b[k] - a[k]);
                if (options.clamp_mode == ClampMode::DifferenceClamp) diff = std::min(diff, diff_cap);
                if (diff < options.threshold - kThresholdSlack) continue;
                if (options.clamp_mode == ClampMode::EventCountCap && fired[k] >= options.clamp) continue;
                m[k] = 1;
                ++fired[k];
            }
        }
        out.push_back(std::move(seg));
    }
    return out;
}

std::vector<double> toy_event_encoder(const EventSegment& segment, std::size_t dim) {
    if (dim == 0) throw Error(ErrorCode::InvalidConfig, "encoder dim must be >= 1");
    const std::size_t px = segment.height * segment.width;
    std::vector<double> sum(dim, 0.0);
    std::vector<std::size_t> count(dim, 0);
    for (std::size_t k = 0; k < px; ++k) {
        const std::size_t cell = k * dim / px;
        count[cell] += segment.pairs;
        for (std::size_t p = 0; p < segment.pairs; ++p) sum[cell] += segment.maps[p * px + k];
    }
    for (std::size_t c = 0; c < dim; ++c) {
        if (count[c] > 0) sum[c] /= static_cast<double>(count[c]);
    }
    return sum;
}

EmbeddingSequence encode_segments(const std::vector<EventSegment>& segments, std::size_t dim) {
    if (segments.empty()) throw Error(ErrorCode::EmptyInput, "no event segments");
    EmbeddingSequence seq{Tensor3({1, segments.size(), dim}), Modality::Event};
    for (std::size_t t = 0; t < segments.size(); ++t) {
        const auto f = toy_event_encoder(segments[t], dim);
        std::copy(f.begin(), f.end(), seq.values.slice(0, t).begin());
    }
    return seq;
}

}  // namespace evfuse::events
