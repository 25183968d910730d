#pragma once

#include <cstdint>
#include <string>

#include "vst3/frame.hpp"

namespace vst3 {

// The five adaptation modes. Flag byte values 0x00..0x04 follow the enum
// order: Default, EBD down 1 bit, spatial down 2x, both, post-process only.
enum class AdaptationMode : uint8_t {
    M0 = 0,
    M1 = 1,
    M2 = 2,
    M3 = 3,
    M4 = 4,
};

inline constexpr int kNumModes = 5;

std::string to_string(AdaptationMode mode);
AdaptationMode mode_from_flag(uint8_t flag);  // throws invalid-mode-flag on >4
AdaptationMode mode_from_string(const std::string& name);

// Per-mode resampling parameters.
struct ResampleSpec {
    int spatial_factor = 1; // 1 or 2
    int ebd_shift = 0;      // bits removed from the effective depth
};

ResampleSpec mode_spec(AdaptationMode mode);

// Effective-bit-depth shifting. Both luma and chroma shift together; only
// effective_bit_depth changes, the container depth stays fixed.
VideoFrame ebd_down(const VideoFrame& frame, int shift_bits);
VideoFrame ebd_up(const VideoFrame& frame, int shift_bits);

// Lanczos3 kernel: sinc(x) * sinc(x/3) for |x| < 3, zero outside.
double lanczos3_weight(double x);

// Factor-2 spatial resampling with a Lanczos3 kernel. Downsampling stretches
// the kernel by the scale factor (support +-6 source samples) and maps output
// pixel i to source coordinate 2i + 0.5; upsampling maps i to i/2 - 0.25.
// Tap weights are normalised to sum 1 per phase, borders replicate, results
// round half-up and clip to the effective sample range. Each plane is
// resampled on its own grid.
VideoFrame spatial_down(const VideoFrame& frame, int factor = 2);
VideoFrame spatial_up(const VideoFrame& frame, int factor = 2);

// Mode composition. M3 applies spatial then EBD downsampling; the baseline
// inverse applies EBD then spatial upsampling. M0 and M4 are identities.
VideoFrame apply_mode(const VideoFrame& frame, AdaptationMode mode);
VideoFrame invert_mode_baseline(const VideoFrame& frame, AdaptationMode mode);

VideoSequence apply_mode(const VideoSequence& seq, AdaptationMode mode);
VideoSequence invert_mode_baseline(const VideoSequence& seq, AdaptationMode mode);

} // namespace vst3
