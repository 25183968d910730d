#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "vst3/adapt.hpp"
#include "vst3/frame.hpp"

namespace vst3 {

// On-disk layout (little-endian throughout, documented in FORMAT.md):
// a 32-byte header, one 12-byte table entry per segment, then the raw
// host-codec payloads back to back.
inline constexpr size_t kContainerHeaderSize = 32;
inline constexpr size_t kSegmentEntrySize = 12;
inline constexpr uint16_t kContainerVersion = 1;

struct ContainerHeader {
    uint16_t version = kContainerVersion;
    uint32_t width = 0;
    uint32_t height = 0;
    FrameRate frame_rate;
    uint8_t container_bit_depth = 8;
    uint8_t original_ebd = 8;
    uint32_t frame_count = 0;

    bool operator==(const ContainerHeader&) const = default;
};

struct ContainerSegment {
    AdaptationMode mode = AdaptationMode::M0;
    uint8_t qp_base = 0;
    uint8_t qp_effective = 0;
    uint32_t frame_count = 0;

    bool operator==(const ContainerSegment&) const = default;
};

struct Vst3Container {
    ContainerHeader header;
    std::vector<ContainerSegment> segments;
    std::vector<std::vector<uint8_t>> payloads; // one per segment

    // Total side-information bytes (header plus segment table); counted in
    // reported bitrates alongside the payload bytes.
    size_t side_info_bytes() const {
        return kContainerHeaderSize + kSegmentEntrySize * segments.size();
    }
    size_t total_bytes() const;

    void validate() const;

    bool operator==(const Vst3Container&) const = default;
};

std::vector<uint8_t> serialize(const Vst3Container& container);
Vst3Container parse(const std::vector<uint8_t>& bytes);

void write_container(const Vst3Container& container, const std::filesystem::path& path);
Vst3Container read_container(const std::filesystem::path& path);

} // namespace vst3
