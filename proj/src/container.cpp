#include "vst3/container.hpp"

#include <cstring>
#include <fstream>
#include <limits>
#include <string>

#include "vst3/error.hpp"

namespace vst3 {

namespace {

constexpr char kMagic[4] = {'V', 'S', 'T', '3'};

void put_u16(std::vector<uint8_t>& out, uint16_t v) {
    out.push_back(static_cast<uint8_t>(v & 0xff));
    out.push_back(static_cast<uint8_t>(v >> 8));
}

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    for (int i = 0; i < 4; ++i)
        out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
}

class Reader {
public:
    explicit Reader(const std::vector<uint8_t>& bytes) : bytes_(bytes) {}

    uint8_t u8(const char* what) {
        need(1, what);
        return bytes_[pos_++];
    }
    uint16_t u16(const char* what) {
        need(2, what);
        uint16_t v = static_cast<uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
        pos_ += 2;
        return v;
    }
    uint32_t u32(const char* what) {
        need(4, what);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<uint32_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::vector<uint8_t> blob(size_t n, const char* code) {
        if (pos_ + n > bytes_.size())
            fail(code, "need " + std::to_string(n) + " bytes at offset " + std::to_string(pos_) +
                           ", have " + std::to_string(bytes_.size() - pos_));
        std::vector<uint8_t> out(bytes_.begin() + static_cast<ptrdiff_t>(pos_),
                                 bytes_.begin() + static_cast<ptrdiff_t>(pos_ + n));
        pos_ += n;
        return out;
    }
    size_t pos() const { return pos_; }
    size_t remaining() const { return bytes_.size() - pos_; }

private:
    void need(size_t n, const char* what) {
        if (pos_ + n > bytes_.size())
            fail("truncated-container", std::string(what) + " at offset " + std::to_string(pos_));
    }

    const std::vector<uint8_t>& bytes_;
    size_t pos_ = 0;
};

} // namespace

size_t Vst3Container::total_bytes() const {
    size_t total = side_info_bytes();
    for (const auto& p : payloads)
        total += p.size();
    return total;
}

void Vst3Container::validate() const {
    require(header.version == kContainerVersion, "version-mismatch",
            "version " + std::to_string(header.version));
    require(header.width > 0 && header.height > 0, "invalid-container", "empty geometry");
    require(header.frame_rate.num > 0 && header.frame_rate.den > 0, "invalid-container",
            "frame rate must be positive");
    require(header.container_bit_depth == 8 || header.container_bit_depth == 10,
            "invalid-container", "container bit depth must be 8 or 10");
    require(header.original_ebd >= 1 && header.original_ebd <= header.container_bit_depth,
            "invalid-container", "original EBD out of range");
    require(!segments.empty(), "invalid-container", "no segments");
    require(segments.size() == payloads.size(), "invalid-container",
            "segment/payload count mismatch");
    uint64_t frame_sum = 0;
    for (size_t i = 0; i < segments.size(); ++i) {
        const ContainerSegment& s = segments[i];
        require(static_cast<uint8_t>(s.mode) <= 4, "invalid-mode-flag",
                std::to_string(static_cast<int>(s.mode)));
        require(s.qp_base <= 51 && s.qp_effective <= 51, "invalid-container", "QP out of range");
        require(s.frame_count > 0, "invalid-container", "segment with zero frames");
        require(payloads[i].size() <= std::numeric_limits<uint32_t>::max(), "invalid-container",
                "payload too large");
        frame_sum += s.frame_count;
    }
    require(frame_sum == header.frame_count, "segment-sum-mismatch",
            "segment frames sum to " + std::to_string(frame_sum) + ", header says " +
                std::to_string(header.frame_count));
}

std::vector<uint8_t> serialize(const Vst3Container& container) {
    container.validate();
    std::vector<uint8_t> out;
    out.reserve(container.total_bytes());

    out.insert(out.end(), kMagic, kMagic + 4);
    put_u16(out, container.header.version);
    put_u32(out, container.header.width);
    put_u32(out, container.header.height);
    put_u32(out, container.header.frame_rate.num);
    put_u32(out, container.header.frame_rate.den);
    out.push_back(container.header.container_bit_depth);
    out.push_back(container.header.original_ebd);
    put_u32(out, container.header.frame_count);
    put_u32(out, static_cast<uint32_t>(container.segments.size()));

    for (size_t i = 0; i < container.segments.size(); ++i) {
        const ContainerSegment& s = container.segments[i];
        out.push_back(static_cast<uint8_t>(s.mode));
        out.push_back(s.qp_base);
        out.push_back(s.qp_effective);
        out.push_back(0); // reserved
        put_u32(out, s.frame_count);
        put_u32(out, static_cast<uint32_t>(container.payloads[i].size()));
    }
    for (const auto& p : container.payloads)
        out.insert(out.end(), p.begin(), p.end());
    return out;
}

Vst3Container parse(const std::vector<uint8_t>& bytes) {
    Reader r(bytes);
    auto magic = r.blob(4, "truncated-container");
    require(std::memcmp(magic.data(), kMagic, 4) == 0, "bad-magic");

    Vst3Container c;
    c.header.version = r.u16("version");
    require(c.header.version == kContainerVersion, "version-mismatch",
            "version " + std::to_string(c.header.version));
    c.header.width = r.u32("width");
    c.header.height = r.u32("height");
    c.header.frame_rate.num = r.u32("fps numerator");
    c.header.frame_rate.den = r.u32("fps denominator");
    c.header.container_bit_depth = r.u8("container bit depth");
    c.header.original_ebd = r.u8("original EBD");
    c.header.frame_count = r.u32("frame count");
    uint32_t segment_count = r.u32("segment count");

    std::vector<uint32_t> payload_lengths;
    payload_lengths.reserve(segment_count);
    for (uint32_t i = 0; i < segment_count; ++i) {
        ContainerSegment s;
        uint8_t flag = r.u8("mode flag");
        require(flag <= 4, "invalid-mode-flag",
                "flag byte " + std::to_string(flag) + " in segment " + std::to_string(i));
        s.mode = static_cast<AdaptationMode>(flag);
        s.qp_base = r.u8("qp_base");
        s.qp_effective = r.u8("qp_effective");
        r.u8("reserved");
        s.frame_count = r.u32("segment frame count");
        payload_lengths.push_back(r.u32("payload length"));
        c.segments.push_back(s);
    }
    for (uint32_t i = 0; i < segment_count; ++i)
        c.payloads.push_back(r.blob(payload_lengths[i], "truncated-payload"));
    require(r.remaining() == 0, "trailing-bytes",
            std::to_string(r.remaining()) + " bytes after payloads");
    c.validate();
    return c;
}

void write_container(const Vst3Container& container, const std::filesystem::path& path) {
    std::vector<uint8_t> bytes = serialize(container);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(out.good(), "io-failure", "cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    require(out.good(), "io-failure", "write failed for " + path.string());
}

Vst3Container read_container(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "io-failure", "cannot open " + path.string());
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse(bytes);
}

} // namespace vst3
