#include "vst3/frame.hpp"

#include <cmath>
#include <string>

#include "vst3/error.hpp"

namespace vst3 {

VideoFrame VideoFrame::alloc(int width, int height, int container_depth, int effective_depth) {
    VideoFrame f;
    f.y = Plane(width, height);
    f.u = Plane(chroma_dim(width), chroma_dim(height));
    f.v = Plane(chroma_dim(width), chroma_dim(height));
    f.container_bit_depth = container_depth;
    f.effective_bit_depth = effective_depth;
    f.validate();
    return f;
}

namespace {

void check_plane_range(const Plane& p, uint16_t max_value, const char* name) {
    require(p.samples.size() == static_cast<size_t>(p.width) * p.height,
            "invalid-frame", std::string(name) + " plane buffer size mismatch");
    for (uint16_t s : p.samples)
        require(s <= max_value, "invalid-frame",
                std::string(name) + " sample " + std::to_string(s) +
                    " exceeds effective bit depth range");
}

} // namespace

void VideoFrame::validate() const {
    require(container_bit_depth == 8 || container_bit_depth == 10, "invalid-frame",
            "container bit depth must be 8 or 10");
    require(effective_bit_depth >= 1 && effective_bit_depth <= container_bit_depth,
            "invalid-frame", "effective bit depth out of range");
    require(y.width > 0 && y.height > 0, "invalid-frame", "empty luma plane");
    require(u.width == chroma_dim(y.width) && u.height == chroma_dim(y.height) &&
                v.width == u.width && v.height == u.height,
            "invalid-frame", "chroma geometry does not match 4:2:0");
    check_plane_range(y, max_value(), "Y");
    check_plane_range(u, max_value(), "U");
    check_plane_range(v, max_value(), "V");
}

void VideoSequence::validate() const {
    require(!frames.empty(), "empty-sequence");
    require(frame_rate.num > 0 && frame_rate.den > 0, "invalid-sequence", "frame rate must be positive");
    const VideoFrame& first = frames.front();
    for (const VideoFrame& f : frames) {
        f.validate();
        require(f.width() == first.width() && f.height() == first.height() &&
                    f.container_bit_depth == first.container_bit_depth &&
                    f.effective_bit_depth == first.effective_bit_depth,
                "invalid-sequence", "frames differ in geometry or bit depth");
    }
}

double psnr_plane(const Plane& a, const Plane& b, int peak) {
    require(a.width == b.width && a.height == b.height, "dimension-mismatch",
            "psnr_plane requires equal plane dimensions");
    double sse = 0.0;
    for (size_t i = 0; i < a.samples.size(); ++i) {
        double d = static_cast<double>(a.samples[i]) - static_cast<double>(b.samples[i]);
        sse += d * d;
    }
    double mse = sse / static_cast<double>(a.samples.size());
    if (mse <= 0.0)
        return kPsnrCap;
    return 10.0 * std::log10(static_cast<double>(peak) * peak / mse);
}

double psnr_yuv(const VideoFrame& a, const VideoFrame& b) {
    require(a.width() == b.width() && a.height() == b.height(), "geometry-mismatch",
            "psnr_yuv requires equal frame geometry");
    require(a.container_bit_depth == b.container_bit_depth &&
                a.effective_bit_depth == b.effective_bit_depth,
            "geometry-mismatch", "psnr_yuv requires equal bit depths");
    int peak = (1 << a.effective_bit_depth) - 1;
    double py = psnr_plane(a.y, b.y, peak);
    double pu = psnr_plane(a.u, b.u, peak);
    double pv = psnr_plane(a.v, b.v, peak);
    return (6.0 * py + pu + pv) / 8.0;
}

double psnr_yuv_sequence(const VideoSequence& a, const VideoSequence& b) {
    require(a.frame_count() == b.frame_count(), "geometry-mismatch",
            "sequences differ in frame count");
    require(!a.empty(), "empty-sequence");
    double sum = 0.0;
    for (size_t i = 0; i < a.frames.size(); ++i)
        sum += psnr_yuv(a.frames[i], b.frames[i]);
    return sum / static_cast<double>(a.frame_count());
}

} // namespace vst3
