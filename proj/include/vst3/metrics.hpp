#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace vst3 {

// Monotone piecewise-cubic Hermite interpolant (Fritsch-Carlson slopes,
// three-point edge rule). Evaluation outside the knot range extrapolates
// linearly with the end-segment slope. Definite integrals are closed-form
// per segment.
class PchipInterpolant {
public:
    PchipInterpolant(std::vector<double> x, std::vector<double> y);

    double operator()(double x) const;
    double integrate(double a, double b) const;

    double x_min() const { return x_.front(); }
    double x_max() const { return x_.back(); }
    const std::vector<double>& slopes() const { return d_; }

private:
    std::vector<double> x_;
    std::vector<double> y_;
    std::vector<double> d_;

    double segment_integral(size_t k, double t0, double t1) const;
};

struct RateQualityPoint {
    double rate_bps = 0.0;
    double quality = 0.0;
    int qp = -1;

    bool operator==(const RateQualityPoint&) const = default;
};

struct RateQualityCurve {
    std::string codec;
    std::string sequence;
    std::string metric_id;
    std::vector<RateQualityPoint> points; // strictly increasing rate

    void validate(size_t min_points = 3) const;
    void sort_by_rate();

    bool operator==(const RateQualityCurve&) const = default;
};

// Bjøntegaard deltas between two rate-quality curves over the overlapped
// region. bd_rate returns the average bitrate difference in percent at equal
// quality; bd_quality the average quality difference at equal log-rate.
double bd_rate(const RateQualityCurve& test, const RateQualityCurve& anchor);
double bd_quality(const RateQualityCurve& test, const RateQualityCurve& anchor);

// CSV schema: "codec,sequence,metric,qp,rate_bps,quality". Rows group into
// curves keyed by (codec, sequence, metric); duplicate (key, qp) rows are
// rejected. Values survive a write/load roundtrip exactly.
std::vector<RateQualityCurve> load_rd_csv(const std::filesystem::path& path);
void write_rd_csv(const std::vector<RateQualityCurve>& curves, const std::filesystem::path& path);

std::string format_double(double value); // shortest text that reparses exactly

} // namespace vst3
