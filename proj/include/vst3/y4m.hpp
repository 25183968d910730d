#pragma once

#include <filesystem>

#include "vst3/frame.hpp"

namespace vst3 {

// YUV4MPEG2 stream I/O. Supported colourspace tags: C420, C420jpeg,
// C420mpeg2, C420paldv (8-bit) and C420p10 (10-bit, little-endian 16-bit
// samples). effective_bit_depth is initialised to the container depth on
// read; the format itself carries no EBD metadata.
VideoSequence read_y4m(const std::filesystem::path& path);
void write_y4m(const VideoSequence& seq, const std::filesystem::path& path);

// Raw planar 4:2:0 YUV with a key=value sidecar describing the geometry.
// Recognised keys: width, height, fps (either "30" or "30000/1001"),
// bit_depth (8 or 10) and optional ebd. Default sidecar path is
// "<data path>.meta".
VideoSequence read_raw_yuv(const std::filesystem::path& data_path,
                           const std::filesystem::path& meta_path = {});
void write_raw_yuv(const VideoSequence& seq, const std::filesystem::path& data_path,
                   const std::filesystem::path& meta_path = {});

} // namespace vst3
