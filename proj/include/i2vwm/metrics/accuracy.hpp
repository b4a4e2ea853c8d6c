#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "i2vwm/model/message.hpp"

namespace i2vwm {

// Fraction of matching bits between two equal-length messages.
inline double bit_accuracy(const WatermarkMessage& a, const WatermarkMessage& b) {
    if (a.size() != b.size())
        throw std::invalid_argument("bit_accuracy: message lengths differ");
    std::size_t match = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] == b[i]) ++match;
    return double(match) / double(a.size());
}

// N videos x Lf frames of per-frame bit accuracies. Rectangular by
// construction; ragged inputs are rejected.
class AccuracyMatrix {
public:
    AccuracyMatrix(std::size_t videos, std::size_t frames)
        : n_(videos), lf_(frames), values_(videos * frames, 0.0) {
        if (videos == 0 || frames == 0)
            throw std::invalid_argument("AccuracyMatrix: empty dimensions");
    }

    explicit AccuracyMatrix(const std::vector<std::vector<double>>& rows) {
        if (rows.empty() || rows[0].empty())
            throw std::invalid_argument("AccuracyMatrix: empty input");
        n_ = rows.size();
        lf_ = rows[0].size();
        values_.reserve(n_ * lf_);
        for (const auto& r : rows) {
            if (r.size() != lf_)
                throw std::invalid_argument("AccuracyMatrix: ragged rows (videos must have uniform length)");
            for (double v : r) {
                check_entry(v);
                values_.push_back(v);
            }
        }
    }

    std::size_t videos() const { return n_; }
    std::size_t frames() const { return lf_; }

    double at(std::size_t video, std::size_t frame) const { return values_[video * lf_ + frame]; }
    void set(std::size_t video, std::size_t frame, double v) {
        check_entry(v);
        values_[video * lf_ + frame] = v;
    }

private:
    static void check_entry(double v) {
        if (!(v >= 0.0 && v <= 1.0))
            throw std::invalid_argument("AccuracyMatrix: entries must lie in [0,1]");
    }

    std::size_t n_ = 0, lf_ = 0;
    std::vector<double> values_;
};

// FACC_i: mean accuracy at frame index i across videos (column means).
inline std::vector<double> frame_accuracy_curve(const AccuracyMatrix& m) {
    std::vector<double> facc(m.frames(), 0.0);
    for (std::size_t i = 0; i < m.frames(); ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < m.videos(); ++j) acc += m.at(j, i);
        facc[i] = acc / double(m.videos());
    }
    return facc;
}

// Number of consecutive leading frames whose FACC stays at or above tau.
// An all-passing curve of Lf frames yields Lf.
inline int robust_diffusion_distance(const std::vector<double>& facc, double tau) {
    if (!(tau > 0.0 && tau < 1.0))
        throw std::invalid_argument("robust_diffusion_distance: tau must lie in (0,1)");
    for (double v : facc)
        if (!(v >= 0.0 && v <= 1.0))
            throw std::invalid_argument("robust_diffusion_distance: accuracies must lie in [0,1]");
    int count = 0;
    for (double v : facc) {
        if (v < tau) break;
        ++count;
    }
    return count;
}

// Grand mean accuracy over all frames of all videos.
inline double video_accuracy(const AccuracyMatrix& m) {
    double acc = 0.0;
    for (std::size_t j = 0; j < m.videos(); ++j)
        for (std::size_t i = 0; i < m.frames(); ++i) acc += m.at(j, i);
    return acc / double(m.videos() * m.frames());
}

} // namespace i2vwm
