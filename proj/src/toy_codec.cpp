#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "vst3/bitio.hpp"
#include "vst3/codec.hpp"

namespace vst3 {

namespace {

constexpr int kBlock = 8;
constexpr uint32_t kEob = 64; // run symbol reserved as end-of-block
constexpr char kMagic[4] = {'T', 'Y', 'C', '1'};
constexpr uint8_t kPayloadVersion = 1;

struct DctTables {
    // basis[u][x] = C(u) * cos((2x+1) u pi / 16)
    std::array<std::array<double, kBlock>, kBlock> basis;
    std::array<int, kBlock * kBlock> zigzag;

    DctTables() {
        for (int u = 0; u < kBlock; ++u) {
            double cu = u == 0 ? std::sqrt(1.0 / kBlock) : std::sqrt(2.0 / kBlock);
            for (int x = 0; x < kBlock; ++x)
                basis[u][x] = cu * std::cos((2 * x + 1) * u * std::numbers::pi / (2.0 * kBlock));
        }
        int idx = 0;
        for (int s = 0; s < 2 * kBlock - 1; ++s) {
            if (s % 2 == 0) {
                for (int y = std::min(s, kBlock - 1); y >= std::max(0, s - kBlock + 1); --y)
                    zigzag[idx++] = y * kBlock + (s - y);
            } else {
                for (int x = std::min(s, kBlock - 1); x >= std::max(0, s - kBlock + 1); --x)
                    zigzag[idx++] = (s - x) * kBlock + x;
            }
        }
    }
};

const DctTables& tables() {
    static const DctTables t;
    return t;
}

void dct2d(const std::array<double, 64>& in, std::array<double, 64>& out) {
    const auto& b = tables().basis;
    std::array<double, 64> tmp;
    // rows
    for (int y = 0; y < kBlock; ++y)
        for (int u = 0; u < kBlock; ++u) {
            double acc = 0.0;
            for (int x = 0; x < kBlock; ++x)
                acc += in[y * kBlock + x] * b[u][x];
            tmp[y * kBlock + u] = acc;
        }
    // columns
    for (int u = 0; u < kBlock; ++u)
        for (int v = 0; v < kBlock; ++v) {
            double acc = 0.0;
            for (int y = 0; y < kBlock; ++y)
                acc += tmp[y * kBlock + u] * b[v][y];
            out[v * kBlock + u] = acc;
        }
}

void idct2d(const std::array<double, 64>& in, std::array<double, 64>& out) {
    const auto& b = tables().basis;
    std::array<double, 64> tmp;
    for (int v = 0; v < kBlock; ++v)
        for (int x = 0; x < kBlock; ++x) {
            double acc = 0.0;
            for (int u = 0; u < kBlock; ++u)
                acc += in[v * kBlock + u] * b[u][x];
            tmp[v * kBlock + x] = acc;
        }
    for (int x = 0; x < kBlock; ++x)
        for (int y = 0; y < kBlock; ++y) {
            double acc = 0.0;
            for (int v = 0; v < kBlock; ++v)
                acc += tmp[v * kBlock + x] * b[v][y];
            out[y * kBlock + x] = acc;
        }
}

int padded_dim(int dim) { return (dim + kBlock - 1) / kBlock * kBlock; }

void encode_plane(const Plane& plane, double qstep, int level_shift, BitWriter& bw) {
    const auto& zz = tables().zigzag;
    int pw = padded_dim(plane.width);
    int ph = padded_dim(plane.height);
    std::array<double, 64> px, coef;
    std::array<int32_t, 64> levels;
    for (int by = 0; by < ph; by += kBlock) {
        for (int bx = 0; bx < pw; bx += kBlock) {
            for (int y = 0; y < kBlock; ++y)
                for (int x = 0; x < kBlock; ++x) {
                    int sx = std::min(bx + x, plane.width - 1);
                    int sy = std::min(by + y, plane.height - 1);
                    px[y * kBlock + x] = static_cast<double>(plane.at(sx, sy)) - level_shift;
                }
            dct2d(px, coef);
            for (int i = 0; i < 64; ++i)
                levels[i] = static_cast<int32_t>(std::lround(coef[zz[i]] / qstep));

            int run = 0;
            for (int i = 0; i < 64; ++i) {
                if (levels[i] == 0) {
                    ++run;
                    continue;
                }
                bw.put_ue(static_cast<uint32_t>(run));
                bw.put_se(levels[i]);
                run = 0;
            }
            bw.put_ue(kEob);
        }
    }
    bw.align();
}

void decode_plane(Plane& plane, double qstep, int level_shift, int max_value, BitReader& br) {
    const auto& zz = tables().zigzag;
    int pw = padded_dim(plane.width);
    int ph = padded_dim(plane.height);
    std::array<double, 64> coef, px;
    for (int by = 0; by < ph; by += kBlock) {
        for (int bx = 0; bx < pw; bx += kBlock) {
            coef.fill(0.0);
            int pos = 0;
            while (true) {
                uint32_t run = br.get_ue();
                if (run == kEob)
                    break;
                require(run < kEob, "corrupt-payload", "run symbol out of range");
                pos += static_cast<int>(run);
                require(pos < 64, "corrupt-payload", "coefficient index overruns block");
                int32_t level = br.get_se();
                require(level != 0, "corrupt-payload", "explicit zero level");
                coef[zz[pos]] = level * qstep;
                ++pos;
            }
            idct2d(coef, px);
            for (int y = 0; y < kBlock; ++y)
                for (int x = 0; x < kBlock; ++x) {
                    if (bx + x >= plane.width || by + y >= plane.height)
                        continue;
                    double v = std::floor(px[y * kBlock + x] + level_shift + 0.5);
                    plane.at(bx + x, by + y) =
                        static_cast<uint16_t>(std::clamp(v, 0.0, static_cast<double>(max_value)));
                }
        }
    }
    br.align();
}

void put_u32_le(std::vector<uint8_t>& out, uint32_t v) {
    for (int i = 0; i < 4; ++i)
        out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
}

uint32_t get_u32_le(const std::vector<uint8_t>& in, size_t& pos) {
    require(pos + 4 <= in.size(), "corrupt-payload", "truncated header");
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
        v |= static_cast<uint32_t>(in[pos++]) << (8 * i);
    return v;
}

} // namespace

double ToyCodec::quant_step(QpValue qp) {
    return std::exp2((qp.value() - 4) / 6.0);
}

EncodeResult ToyCodec::encode(const VideoSequence& seq, QpValue qp) {
    seq.validate();
    require(seq.width() % kBlock == 0 && seq.height() % kBlock == 0, "unaligned-dimensions",
            "luma dimensions must be multiples of 8");

    std::vector<uint8_t> payload;
    payload.insert(payload.end(), kMagic, kMagic + 4);
    payload.push_back(kPayloadVersion);
    put_u32_le(payload, static_cast<uint32_t>(seq.width()));
    put_u32_le(payload, static_cast<uint32_t>(seq.height()));
    put_u32_le(payload, static_cast<uint32_t>(seq.frame_count()));
    put_u32_le(payload, seq.frame_rate.num);
    put_u32_le(payload, seq.frame_rate.den);
    payload.push_back(static_cast<uint8_t>(seq.container_bit_depth()));
    payload.push_back(static_cast<uint8_t>(seq.effective_bit_depth()));
    payload.push_back(static_cast<uint8_t>(qp.value()));

    double qstep = quant_step(qp);
    int level_shift = 1 << (seq.effective_bit_depth() - 1);
    BitWriter bw;
    for (const VideoFrame& f : seq.frames) {
        encode_plane(f.y, qstep, level_shift, bw);
        encode_plane(f.u, qstep, level_shift, bw);
        encode_plane(f.v, qstep, level_shift, bw);
    }
    std::vector<uint8_t> bits = bw.take();
    payload.insert(payload.end(), bits.begin(), bits.end());
    uint64_t total_bits = static_cast<uint64_t>(payload.size()) * 8;
    return {std::move(payload), total_bits};
}

VideoSequence ToyCodec::decode(const std::vector<uint8_t>& payload) {
    require(payload.size() >= 28, "corrupt-payload", "payload shorter than header");
    require(std::equal(payload.begin(), payload.begin() + 4, kMagic), "corrupt-payload",
            "bad magic");
    size_t pos = 4;
    uint8_t version = payload[pos++];
    require(version == kPayloadVersion, "corrupt-payload", "unknown payload version");
    uint32_t width = get_u32_le(payload, pos);
    uint32_t height = get_u32_le(payload, pos);
    uint32_t frame_count = get_u32_le(payload, pos);
    FrameRate fps;
    fps.num = get_u32_le(payload, pos);
    fps.den = get_u32_le(payload, pos);
    require(pos + 3 <= payload.size(), "corrupt-payload", "truncated header");
    int container_depth = payload[pos++];
    int ebd = payload[pos++];
    QpValue qp;
    try {
        qp = QpValue(payload[pos]);
    } catch (const Error&) {
        fail("corrupt-payload", "qp out of range");
    }
    ++pos;
    require(width > 0 && height > 0 && frame_count > 0, "corrupt-payload", "bad geometry");
    require(width % kBlock == 0 && height % kBlock == 0, "corrupt-payload", "unaligned geometry");
    require(container_depth == 8 || container_depth == 10, "corrupt-payload", "bad bit depth");
    require(ebd >= 1 && ebd <= container_depth, "corrupt-payload", "bad effective bit depth");

    double qstep = quant_step(qp);
    int level_shift = 1 << (ebd - 1);
    int max_value = (1 << ebd) - 1;

    VideoSequence seq;
    seq.frame_rate = fps;
    BitReader br(payload.data() + pos, payload.size() - pos);
    for (uint32_t i = 0; i < frame_count; ++i) {
        VideoFrame f = VideoFrame::alloc(static_cast<int>(width), static_cast<int>(height),
                                         container_depth, ebd);
        decode_plane(f.y, qstep, level_shift, max_value, br);
        decode_plane(f.u, qstep, level_shift, max_value, br);
        decode_plane(f.v, qstep, level_shift, max_value, br);
        seq.frames.push_back(std::move(f));
    }
    seq.validate();
    return seq;
}

std::unique_ptr<HostCodec> make_toy_codec() {
    return std::make_unique<ToyCodec>();
}

} // namespace vst3
