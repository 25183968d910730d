#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "vst3/error.hpp"
#include "vst3/frame.hpp"

namespace vst3 {

// Quantisation parameter, range-checked at construction.
class QpValue {
public:
    QpValue() = default;
    explicit QpValue(int value) : value_(value) {
        require(value >= 0 && value <= 51, "invalid-qp", std::to_string(value));
    }

    int value() const { return value_; }
    static QpValue clamped(int value) { return QpValue(std::max(0, std::min(51, value))); }

    bool operator==(const QpValue&) const = default;

private:
    int value_ = 0;
};

struct EncodeResult {
    std::vector<uint8_t> payload;
    uint64_t bits = 0;
};

// Behavioural host-codec interface: the adaptation pipeline is agnostic to
// what produces the payload bytes.
class HostCodec {
public:
    virtual ~HostCodec() = default;
    virtual EncodeResult encode(const VideoSequence& seq, QpValue qp) = 0;
    virtual VideoSequence decode(const std::vector<uint8_t>& payload) = 0;
    virtual std::string name() const = 0;
};

// Self-contained intra-only codec: 8x8 floating-point DCT per plane block,
// uniform quantisation with step 2^((qp-4)/6), zigzag scan and Exp-Golomb
// coded (run, level) pairs. Deterministic byte-for-byte; luma dimensions
// must be multiples of 8 (chroma blocks pad by edge replication).
class ToyCodec : public HostCodec {
public:
    EncodeResult encode(const VideoSequence& seq, QpValue qp) override;
    VideoSequence decode(const std::vector<uint8_t>& payload) override;
    std::string name() const override { return "toy"; }

    static double quant_step(QpValue qp);
};

// External encoder/decoder run as subprocesses. Command templates are argv
// token lists; tokens may contain the placeholders {input}, {output}, {qp},
// {width}, {height} and {fps} (fps renders as "num/den"). No shell is
// involved. The decoder template is expected to produce a Y4M file.
struct ExternalCodecConfig {
    std::vector<std::string> encode_argv;
    std::vector<std::string> decode_argv;
    std::filesystem::path work_dir; // empty: system temp directory
    double timeout_sec = 300.0;
};

class ExternalCodec : public HostCodec {
public:
    explicit ExternalCodec(ExternalCodecConfig config);

    EncodeResult encode(const VideoSequence& seq, QpValue qp) override;
    VideoSequence decode(const std::vector<uint8_t>& payload) override;
    std::string name() const override { return "external"; }

    // Geometry substituted into decode templates (the payload itself does
    // not carry it). encode() refreshes the hint automatically.
    void set_format_hint(int width, int height, FrameRate fps);

private:
    ExternalCodecConfig config_;
    int hint_width_ = 0;
    int hint_height_ = 0;
    FrameRate hint_fps_;
    int hint_qp_ = 0;

    std::filesystem::path fresh_work_path(const std::string& tag);
};

// Runs argv as a subprocess with no shell. Throws spawn-failure,
// nonzero-exit or timeout. Child stdout/stderr are appended to log_path
// when non-empty.
void run_subprocess(const std::vector<std::string>& argv, double timeout_sec,
                    const std::filesystem::path& log_path = {});

std::unique_ptr<HostCodec> make_toy_codec();
std::unique_ptr<HostCodec> make_external_codec(ExternalCodecConfig config);

} // namespace vst3
