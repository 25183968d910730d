#pragma once

#include <cstdint>
#include <vector>

namespace vst3 {

// One image plane, row-major, up to 16 bits per sample.
struct Plane {
    int width = 0;
    int height = 0;
    std::vector<uint16_t> samples;

    Plane() = default;
    Plane(int w, int h, uint16_t fill = 0)
        : width(w), height(h), samples(static_cast<size_t>(w) * h, fill) {}

    uint16_t at(int x, int y) const { return samples[static_cast<size_t>(y) * width + x]; }
    uint16_t& at(int x, int y) { return samples[static_cast<size_t>(y) * width + x]; }
    size_t size() const { return samples.size(); }

    bool operator==(const Plane&) const = default;
};

inline int chroma_dim(int luma_dim) { return (luma_dim + 1) / 2; }

// Planar 4:2:0 frame. container_bit_depth is the stored sample width (8 or
// 10); effective_bit_depth is the number of bits actually carrying signal,
// which the adaptation modes may reduce below the container depth.
struct VideoFrame {
    Plane y;
    Plane u;
    Plane v;
    int container_bit_depth = 8;
    int effective_bit_depth = 8;

    int width() const { return y.width; }
    int height() const { return y.height; }
    uint16_t max_value() const { return static_cast<uint16_t>((1u << effective_bit_depth) - 1); }

    static VideoFrame alloc(int width, int height, int container_depth, int effective_depth);

    // Throws on any structural violation: chroma geometry, depth ordering,
    // or samples exceeding the effective-bit-depth range.
    void validate() const;

    bool operator==(const VideoFrame&) const = default;
};

struct FrameRate {
    uint32_t num = 25;
    uint32_t den = 1;

    double as_double() const { return static_cast<double>(num) / den; }
    bool operator==(const FrameRate&) const = default;
};

struct VideoSequence {
    std::vector<VideoFrame> frames;
    FrameRate frame_rate;

    bool empty() const { return frames.empty(); }
    size_t frame_count() const { return frames.size(); }
    int width() const { return frames.empty() ? 0 : frames.front().width(); }
    int height() const { return frames.empty() ? 0 : frames.front().height(); }
    int container_bit_depth() const { return frames.empty() ? 0 : frames.front().container_bit_depth; }
    int effective_bit_depth() const { return frames.empty() ? 0 : frames.front().effective_bit_depth; }
    double duration_seconds() const {
        return frames.empty() ? 0.0 : frame_count() * frame_rate.den / static_cast<double>(frame_rate.num);
    }

    // Validates every frame plus cross-frame uniformity and frame_rate > 0.
    void validate() const;

    bool operator==(const VideoSequence&) const = default;
};

// PSNR between same-sized planes against the given peak value. A zero MSE is
// capped at 100 dB so downstream rate-quality interpolation stays finite.
inline constexpr double kPsnrCap = 100.0;
double psnr_plane(const Plane& a, const Plane& b, int peak);

// 6:1:1 weighted YUV PSNR: (6*Y + U + V) / 8. Peak derives from the
// container bit depth, which must match between the two frames.
double psnr_yuv(const VideoFrame& a, const VideoFrame& b);

// Sequence quality is the arithmetic mean of per-frame psnr_yuv.
double psnr_yuv_sequence(const VideoSequence& a, const VideoSequence& b);

} // namespace vst3
