#include "vst3/y4m.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "vst3/error.hpp"

namespace vst3 {

namespace {

constexpr const char* kMagic = "YUV4MPEG2";

bool read_token(std::istream& in, std::string& token, char& terminator) {
    token.clear();
    int ch;
    while ((ch = in.get()) != EOF) {
        if (ch == ' ' || ch == '\n') {
            terminator = static_cast<char>(ch);
            return true;
        }
        token.push_back(static_cast<char>(ch));
    }
    return false;
}

FrameRate parse_ratio(const std::string& text, const char* code) {
    FrameRate r;
    size_t colon = text.find(':');
    try {
        if (colon == std::string::npos) {
            r.num = static_cast<uint32_t>(std::stoul(text));
            r.den = 1;
        } else {
            r.num = static_cast<uint32_t>(std::stoul(text.substr(0, colon)));
            r.den = static_cast<uint32_t>(std::stoul(text.substr(colon + 1)));
        }
    } catch (const std::exception&) {
        fail(code, "bad ratio '" + text + "'");
    }
    require(r.num > 0 && r.den > 0, code, "ratio must be positive");
    return r;
}

int depth_for_chroma_tag(const std::string& tag) {
    if (tag == "420" || tag == "420jpeg" || tag == "420mpeg2" || tag == "420paldv")
        return 8;
    if (tag == "420p10")
        return 10;
    fail("unsupported-chroma", "colourspace C" + tag);
}

void read_plane(std::istream& in, Plane& plane, int depth, const std::filesystem::path& path) {
    size_t n = plane.samples.size();
    if (depth == 8) {
        std::vector<uint8_t> buf(n);
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
        require(static_cast<size_t>(in.gcount()) == n, "truncated-frame", path.string());
        for (size_t i = 0; i < n; ++i)
            plane.samples[i] = buf[i];
    } else {
        std::vector<uint8_t> buf(n * 2);
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        require(static_cast<size_t>(in.gcount()) == buf.size(), "truncated-frame", path.string());
        for (size_t i = 0; i < n; ++i)
            plane.samples[i] = static_cast<uint16_t>(buf[2 * i] | (buf[2 * i + 1] << 8));
    }
}

void write_plane(std::ostream& out, const Plane& plane, int depth) {
    if (depth == 8) {
        std::vector<uint8_t> buf(plane.samples.size());
        for (size_t i = 0; i < buf.size(); ++i)
            buf[i] = static_cast<uint8_t>(plane.samples[i]);
        out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    } else {
        std::vector<uint8_t> buf(plane.samples.size() * 2);
        for (size_t i = 0; i < plane.samples.size(); ++i) {
            buf[2 * i] = static_cast<uint8_t>(plane.samples[i] & 0xff);
            buf[2 * i + 1] = static_cast<uint8_t>(plane.samples[i] >> 8);
        }
        out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    }
}

} // namespace

VideoSequence read_y4m(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "io-failure", "cannot open " + path.string());

    std::string token;
    char term = 0;
    require(read_token(in, token, term), "malformed-magic", "empty file");
    require(token == kMagic, "malformed-magic", "got '" + token + "'");

    int width = 0, height = 0;
    FrameRate fps{25, 1};
    std::string chroma_tag = "420";
    while (term == ' ') {
        require(read_token(in, token, term), "malformed-header", "unterminated stream header");
        if (token.empty())
            continue;
        switch (token[0]) {
        case 'W': width = std::atoi(token.c_str() + 1); break;
        case 'H': height = std::atoi(token.c_str() + 1); break;
        case 'F': fps = parse_ratio(token.substr(1), "malformed-header"); break;
        case 'C': chroma_tag = token.substr(1); break;
        case 'I':
        case 'A':
        case 'X': break; // interlacing, aspect and comments are ignored
        default:
            fail("malformed-header", "unknown parameter '" + token + "'");
        }
    }
    require(width > 0 && height > 0, "malformed-header", "missing W/H");
    int depth = depth_for_chroma_tag(chroma_tag);

    VideoSequence seq;
    seq.frame_rate = fps;
    while (true) {
        if (in.peek() == EOF)
            break;
        require(read_token(in, token, term), "malformed-header", "unterminated FRAME header");
        require(token == "FRAME", "malformed-header", "expected FRAME, got '" + token + "'");
        while (term == ' ')
            require(read_token(in, token, term), "malformed-header", "unterminated FRAME header");

        VideoFrame f = VideoFrame::alloc(width, height, depth, depth);
        read_plane(in, f.y, depth, path);
        read_plane(in, f.u, depth, path);
        read_plane(in, f.v, depth, path);
        f.validate();
        seq.frames.push_back(std::move(f));
    }
    seq.validate();
    return seq;
}

void write_y4m(const VideoSequence& seq, const std::filesystem::path& path) {
    seq.validate();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(out.good(), "io-failure", "cannot open " + path.string() + " for writing");

    int depth = seq.container_bit_depth();
    std::ostringstream header;
    header << kMagic << " W" << seq.width() << " H" << seq.height() << " F" << seq.frame_rate.num
           << ":" << seq.frame_rate.den << " Ip A1:1 C" << (depth == 8 ? "420" : "420p10") << "\n";
    out << header.str();
    for (const VideoFrame& f : seq.frames) {
        out << "FRAME\n";
        write_plane(out, f.y, depth);
        write_plane(out, f.u, depth);
        write_plane(out, f.v, depth);
    }
    out.flush();
    require(out.good(), "io-failure", "write failed for " + path.string());
}

namespace {

std::filesystem::path sidecar_path(const std::filesystem::path& data_path,
                                   const std::filesystem::path& meta_path) {
    if (!meta_path.empty())
        return meta_path;
    std::filesystem::path p = data_path;
    p += ".meta";
    return p;
}

} // namespace

VideoSequence read_raw_yuv(const std::filesystem::path& data_path,
                           const std::filesystem::path& meta_path) {
    std::ifstream meta(sidecar_path(data_path, meta_path));
    require(meta.good(), "io-failure", "cannot open sidecar " + sidecar_path(data_path, meta_path).string());

    int width = 0, height = 0, bit_depth = 8, ebd = 0;
    FrameRate fps{25, 1};
    std::string line;
    while (std::getline(meta, line)) {
        if (line.empty() || line[0] == '#')
            continue;
        size_t eq = line.find('=');
        require(eq != std::string::npos, "malformed-sidecar", "expected key=value, got '" + line + "'");
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        if (key == "width")
            width = std::atoi(value.c_str());
        else if (key == "height")
            height = std::atoi(value.c_str());
        else if (key == "fps") {
            size_t slash = value.find('/');
            fps = parse_ratio(slash == std::string::npos ? value
                                                         : value.substr(0, slash) + ":" + value.substr(slash + 1),
                              "malformed-sidecar");
        } else if (key == "bit_depth")
            bit_depth = std::atoi(value.c_str());
        else if (key == "ebd")
            ebd = std::atoi(value.c_str());
        else
            fail("malformed-sidecar", "unknown key '" + key + "'");
    }
    require(width > 0 && height > 0, "malformed-sidecar", "missing width/height");
    require(bit_depth == 8 || bit_depth == 10, "malformed-sidecar", "bit_depth must be 8 or 10");
    if (ebd == 0)
        ebd = bit_depth;

    std::ifstream in(data_path, std::ios::binary);
    require(in.good(), "io-failure", "cannot open " + data_path.string());
    VideoSequence seq;
    seq.frame_rate = fps;
    while (true) {
        if (in.peek() == EOF)
            break;
        VideoFrame f = VideoFrame::alloc(width, height, bit_depth, ebd);
        read_plane(in, f.y, bit_depth, data_path);
        read_plane(in, f.u, bit_depth, data_path);
        read_plane(in, f.v, bit_depth, data_path);
        f.validate();
        seq.frames.push_back(std::move(f));
    }
    seq.validate();
    return seq;
}

void write_raw_yuv(const VideoSequence& seq, const std::filesystem::path& data_path,
                   const std::filesystem::path& meta_path) {
    seq.validate();
    std::ofstream out(data_path, std::ios::binary | std::ios::trunc);
    require(out.good(), "io-failure", "cannot open " + data_path.string() + " for writing");
    int depth = seq.container_bit_depth();
    for (const VideoFrame& f : seq.frames) {
        write_plane(out, f.y, depth);
        write_plane(out, f.u, depth);
        write_plane(out, f.v, depth);
    }
    out.flush();
    require(out.good(), "io-failure", "write failed for " + data_path.string());

    std::ofstream meta(sidecar_path(data_path, meta_path), std::ios::trunc);
    require(meta.good(), "io-failure", "cannot write sidecar");
    meta << "width=" << seq.width() << "\n"
         << "height=" << seq.height() << "\n"
         << "fps=" << seq.frame_rate.num << "/" << seq.frame_rate.den << "\n"
         << "bit_depth=" << depth << "\n"
         << "ebd=" << seq.effective_bit_depth() << "\n";
}

} // namespace vst3
