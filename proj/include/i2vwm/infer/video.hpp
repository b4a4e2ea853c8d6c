#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "i2vwm/infer/embed.hpp"
#include "i2vwm/infer/flow.hpp"

namespace i2vwm {

struct VideoSequence {
    std::vector<Image> frames;
    double fps = 0.0; // metadata only
    std::string source;

    void validate() const {
        if (frames.empty()) throw std::invalid_argument("VideoSequence: needs at least one frame");
        for (const auto& f : frames)
            if (f.h != frames[0].h || f.w != frames[0].w || f.c != frames[0].c)
                throw std::invalid_argument("VideoSequence: frames must share one shape");
    }
};

// Per-bit majority vote; ties (sum == N/2) resolve to 1.
inline WatermarkMessage majority_vote(const std::vector<WatermarkMessage>& messages) {
    if (messages.empty()) throw std::invalid_argument("majority_vote: empty message list");
    const std::size_t len = messages[0].size();
    for (const auto& m : messages)
        if (m.size() != len) throw std::invalid_argument("majority_vote: message lengths differ");
    std::vector<std::uint8_t> bits(len, 0);
    for (std::size_t j = 0; j < len; ++j) {
        std::size_t ones = 0;
        for (const auto& m : messages) ones += m[j];
        bits[j] = (2 * ones >= messages.size()) ? 1 : 0;
    }
    return WatermarkMessage(std::move(bits));
}

struct FrameRecord {
    int index = 0;
    bool aligned = false;
    std::vector<double> soft;          // decoder output on the frame fed to voting
    WatermarkMessage message;          // binarized form of `soft`
    WatermarkMessage raw_message;      // unaligned extraction (ablation bookkeeping)
};

struct VideoExtractResult {
    WatermarkMessage message; // majority vote over per-frame messages
    std::vector<FrameRecord> frames;
};

// Video extraction: frame 0 is the alignment reference; every later frame
// is optionally warped into its coordinate system before decoding, and the
// per-frame messages are aggregated by majority vote. With `record_raw`
// the unaligned extraction of each frame is kept alongside for ablations.
inline VideoExtractResult extract_from_video(const VideoSequence& video, const WatermarkModel& model,
                                             const FlowBackend& backend, bool align,
                                             bool record_raw = false) {
    video.validate();
    const Image& ref = video.frames[0];

    VideoExtractResult result;
    std::vector<WatermarkMessage> votes;
    votes.reserve(video.frames.size());
    for (std::size_t i = 0; i < video.frames.size(); ++i) {
        FrameRecord rec;
        rec.index = int(i);
        rec.aligned = align && i > 0;

        const Image* input = &video.frames[i];
        Image warped;
        if (rec.aligned) {
            const FlowField flow = estimate_flow(ref, video.frames[i], backend);
            warped = align_frame(video.frames[i], flow);
            input = &warped;
        }
        rec.soft = extract_soft_from_image(*input, model);
        rec.message = model.binarize(rec.soft);
        rec.raw_message = rec.aligned && record_raw
                              ? extract_from_image(video.frames[i], model)
                              : rec.message;
        votes.push_back(rec.message);
        result.frames.push_back(std::move(rec));
    }
    result.message = majority_vote(votes);
    return result;
}

} // namespace i2vwm
