#include "vst3/adapt.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "vst3/error.hpp"

namespace vst3 {

std::string to_string(AdaptationMode mode) {
    switch (mode) {
    case AdaptationMode::M0: return "M0";
    case AdaptationMode::M1: return "M1";
    case AdaptationMode::M2: return "M2";
    case AdaptationMode::M3: return "M3";
    case AdaptationMode::M4: return "M4";
    }
    fail("invalid-mode-flag", std::to_string(static_cast<int>(mode)));
}

AdaptationMode mode_from_flag(uint8_t flag) {
    require(flag <= 4, "invalid-mode-flag", "flag byte " + std::to_string(flag));
    return static_cast<AdaptationMode>(flag);
}

AdaptationMode mode_from_string(const std::string& name) {
    for (int i = 0; i < kNumModes; ++i)
        if (name == to_string(static_cast<AdaptationMode>(i)))
            return static_cast<AdaptationMode>(i);
    fail("invalid-mode-flag", "unknown mode '" + name + "'");
}

ResampleSpec mode_spec(AdaptationMode mode) {
    switch (mode) {
    case AdaptationMode::M0:
    case AdaptationMode::M4: return {1, 0};
    case AdaptationMode::M1: return {1, 1};
    case AdaptationMode::M2: return {2, 0};
    case AdaptationMode::M3: return {2, 1};
    }
    fail("invalid-mode-flag", std::to_string(static_cast<int>(mode)));
}

VideoFrame ebd_down(const VideoFrame& frame, int shift_bits) {
    require(shift_bits >= 0 && shift_bits < frame.effective_bit_depth, "ebd-underflow",
            "shift of " + std::to_string(shift_bits) + " bits from EBD " +
                std::to_string(frame.effective_bit_depth));
    VideoFrame out = frame;
    out.effective_bit_depth = frame.effective_bit_depth - shift_bits;
    for (Plane* p : {&out.y, &out.u, &out.v})
        for (uint16_t& s : p->samples)
            s = static_cast<uint16_t>(s >> shift_bits);
    return out;
}

VideoFrame ebd_up(const VideoFrame& frame, int shift_bits) {
    require(shift_bits >= 0 &&
                frame.effective_bit_depth + shift_bits <= frame.container_bit_depth,
            "ebd-overflow",
            "shift of " + std::to_string(shift_bits) + " bits would exceed container depth " +
                std::to_string(frame.container_bit_depth));
    VideoFrame out = frame;
    out.effective_bit_depth = frame.effective_bit_depth + shift_bits;
    for (Plane* p : {&out.y, &out.u, &out.v})
        for (uint16_t& s : p->samples)
            s = static_cast<uint16_t>(s << shift_bits);
    return out;
}

double lanczos3_weight(double x) {
    x = std::abs(x);
    if (x >= 3.0)
        return 0.0;
    if (x < 1e-12)
        return 1.0;
    double px = std::numbers::pi * x;
    return 3.0 * std::sin(px) * std::sin(px / 3.0) / (px * px);
}

namespace {

struct FilterPhase {
    int first_tap = 0;
    std::vector<double> weights; // normalised to sum 1
};

// Precomputes per-output-index taps along one axis. `scale_up` selects the
// interpolation mapping (i/2 - 0.25, support 3) versus the decimation mapping
// (2i + 0.5, kernel stretched by 2, support 6).
std::vector<FilterPhase> build_phases(int out_dim, bool scale_up, int factor) {
    std::vector<FilterPhase> phases(out_dim);
    double support = scale_up ? 3.0 : 3.0 * factor;
    double stretch = scale_up ? 1.0 : static_cast<double>(factor);
    for (int i = 0; i < out_dim; ++i) {
        double center = scale_up ? (i + 0.5) / factor - 0.5 : (i + 0.5) * factor - 0.5;
        int lo = static_cast<int>(std::ceil(center - support));
        int hi = static_cast<int>(std::floor(center + support));
        FilterPhase& ph = phases[i];
        ph.first_tap = lo;
        ph.weights.resize(static_cast<size_t>(hi - lo + 1));
        double sum = 0.0;
        for (int j = lo; j <= hi; ++j) {
            double w = lanczos3_weight((j - center) / stretch);
            ph.weights[static_cast<size_t>(j - lo)] = w;
            sum += w;
        }
        for (double& w : ph.weights)
            w /= sum;
    }
    return phases;
}

Plane resample_plane(const Plane& in, int out_w, int out_h, bool scale_up, int factor,
                     uint16_t max_value) {
    std::vector<FilterPhase> cols = build_phases(out_w, scale_up, factor);
    std::vector<FilterPhase> rows = build_phases(out_h, scale_up, factor);

    // Horizontal pass into a float buffer, then vertical pass; rounding
    // happens once after both passes.
    std::vector<double> tmp(static_cast<size_t>(out_w) * in.height);
    for (int y = 0; y < in.height; ++y) {
        const uint16_t* src = &in.samples[static_cast<size_t>(y) * in.width];
        for (int x = 0; x < out_w; ++x) {
            const FilterPhase& ph = cols[x];
            double acc = 0.0;
            for (size_t t = 0; t < ph.weights.size(); ++t) {
                int sx = std::clamp(ph.first_tap + static_cast<int>(t), 0, in.width - 1);
                acc += ph.weights[t] * src[sx];
            }
            tmp[static_cast<size_t>(y) * out_w + x] = acc;
        }
    }

    Plane out(out_w, out_h);
    for (int y = 0; y < out_h; ++y) {
        const FilterPhase& ph = rows[y];
        for (int x = 0; x < out_w; ++x) {
            double acc = 0.0;
            for (size_t t = 0; t < ph.weights.size(); ++t) {
                int sy = std::clamp(ph.first_tap + static_cast<int>(t), 0, in.height - 1);
                acc += ph.weights[t] * tmp[static_cast<size_t>(sy) * out_w + x];
            }
            double rounded = std::floor(acc + 0.5);
            out.at(x, y) = static_cast<uint16_t>(std::clamp(rounded, 0.0, static_cast<double>(max_value)));
        }
    }
    return out;
}

} // namespace

VideoFrame spatial_down(const VideoFrame& frame, int factor) {
    require(factor == 2, "unsupported-factor", "only factor 2 is supported");
    require(frame.width() % 2 == 0 && frame.height() % 2 == 0, "odd-dimensions",
            "luma dimensions must be divisible by 2");
    VideoFrame out;
    out.container_bit_depth = frame.container_bit_depth;
    out.effective_bit_depth = frame.effective_bit_depth;
    int w = frame.width() / 2;
    int h = frame.height() / 2;
    out.y = resample_plane(frame.y, w, h, false, factor, frame.max_value());
    out.u = resample_plane(frame.u, chroma_dim(w), chroma_dim(h), false, factor, frame.max_value());
    out.v = resample_plane(frame.v, chroma_dim(w), chroma_dim(h), false, factor, frame.max_value());
    out.validate();
    return out;
}

VideoFrame spatial_up(const VideoFrame& frame, int factor) {
    require(factor == 2, "unsupported-factor", "only factor 2 is supported");
    VideoFrame out;
    out.container_bit_depth = frame.container_bit_depth;
    out.effective_bit_depth = frame.effective_bit_depth;
    int w = frame.width() * 2;
    int h = frame.height() * 2;
    out.y = resample_plane(frame.y, w, h, true, factor, frame.max_value());
    out.u = resample_plane(frame.u, chroma_dim(w), chroma_dim(h), true, factor, frame.max_value());
    out.v = resample_plane(frame.v, chroma_dim(w), chroma_dim(h), true, factor, frame.max_value());
    out.validate();
    return out;
}

VideoFrame apply_mode(const VideoFrame& frame, AdaptationMode mode) {
    ResampleSpec spec = mode_spec(mode);
    VideoFrame out = frame;
    if (spec.spatial_factor > 1)
        out = spatial_down(out, spec.spatial_factor);
    if (spec.ebd_shift > 0)
        out = ebd_down(out, spec.ebd_shift);
    return out;
}

VideoFrame invert_mode_baseline(const VideoFrame& frame, AdaptationMode mode) {
    ResampleSpec spec = mode_spec(mode);
    VideoFrame out = frame;
    if (spec.ebd_shift > 0)
        out = ebd_up(out, spec.ebd_shift);
    if (spec.spatial_factor > 1)
        out = spatial_up(out, spec.spatial_factor);
    return out;
}

VideoSequence apply_mode(const VideoSequence& seq, AdaptationMode mode) {
    VideoSequence out;
    out.frame_rate = seq.frame_rate;
    out.frames.reserve(seq.frames.size());
    for (const VideoFrame& f : seq.frames)
        out.frames.push_back(apply_mode(f, mode));
    return out;
}

VideoSequence invert_mode_baseline(const VideoSequence& seq, AdaptationMode mode) {
    VideoSequence out;
    out.frame_rate = seq.frame_rate;
    out.frames.reserve(seq.frames.size());
    for (const VideoFrame& f : seq.frames)
        out.frames.push_back(invert_mode_baseline(f, mode));
    return out;
}

} // namespace vst3
