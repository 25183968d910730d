#include "vst3/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "vst3/error.hpp"

namespace vst3 {

namespace {

int sign(double v) { return v > 0.0 ? 1 : (v < 0.0 ? -1 : 0); }

// Three-point endpoint slope with the standard shape-preserving clamps.
double edge_slope(double h0, double h1, double d0, double d1) {
    double d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if (sign(d) != sign(d0))
        return 0.0;
    if (sign(d0) != sign(d1) && std::abs(d) > 3.0 * std::abs(d0))
        return 3.0 * d0;
    return d;
}

} // namespace

PchipInterpolant::PchipInterpolant(std::vector<double> x, std::vector<double> y)
    : x_(std::move(x)), y_(std::move(y)) {
    require(x_.size() == y_.size(), "interpolant-error", "x/y size mismatch");
    require(x_.size() >= 2, "interpolant-error", "need at least 2 knots");
    for (size_t i = 1; i < x_.size(); ++i)
        require(x_[i] > x_[i - 1], "interpolant-error", "knots must strictly increase");

    size_t n = x_.size();
    std::vector<double> h(n - 1), delta(n - 1);
    for (size_t i = 0; i + 1 < n; ++i) {
        h[i] = x_[i + 1] - x_[i];
        delta[i] = (y_[i + 1] - y_[i]) / h[i];
    }

    d_.assign(n, 0.0);
    if (n == 2) {
        d_[0] = d_[1] = delta[0];
        return;
    }
    for (size_t i = 1; i + 1 < n; ++i) {
        if (sign(delta[i - 1]) * sign(delta[i]) <= 0) {
            d_[i] = 0.0;
        } else {
            double w1 = 2.0 * h[i] + h[i - 1];
            double w2 = h[i] + 2.0 * h[i - 1];
            d_[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
        }
    }
    d_[0] = edge_slope(h[0], h[1], delta[0], delta[1]);
    d_[n - 1] = edge_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
}

double PchipInterpolant::operator()(double x) const {
    if (x <= x_.front())
        return y_.front() + d_.front() * (x - x_.front());
    if (x >= x_.back())
        return y_.back() + d_.back() * (x - x_.back());
    size_t k = static_cast<size_t>(std::upper_bound(x_.begin(), x_.end(), x) - x_.begin()) - 1;
    double hk = x_[k + 1] - x_[k];
    double dk = (y_[k + 1] - y_[k]) / hk;
    double c2 = (3.0 * dk - 2.0 * d_[k] - d_[k + 1]) / hk;
    double c3 = (d_[k] + d_[k + 1] - 2.0 * dk) / (hk * hk);
    double t = x - x_[k];
    return y_[k] + t * (d_[k] + t * (c2 + t * c3));
}

double PchipInterpolant::segment_integral(size_t k, double t0, double t1) const {
    double hk = x_[k + 1] - x_[k];
    double dk = (y_[k + 1] - y_[k]) / hk;
    double c2 = (3.0 * dk - 2.0 * d_[k] - d_[k + 1]) / hk;
    double c3 = (d_[k] + d_[k + 1] - 2.0 * dk) / (hk * hk);
    auto anti = [&](double t) {
        return t * (y_[k] + t * (d_[k] / 2.0 + t * (c2 / 3.0 + t * c3 / 4.0)));
    };
    return anti(t1) - anti(t0);
}

double PchipInterpolant::integrate(double a, double b) const {
    require(a <= b, "interpolant-error", "integration bounds reversed");
    double total = 0.0;
    // linear tails
    auto tail = [](double y0, double slope, double ta, double tb) {
        return y0 * (tb - ta) + slope * (tb * tb - ta * ta) / 2.0;
    };
    if (a < x_.front()) {
        double hi = std::min(b, x_.front());
        total += tail(y_.front(), d_.front(), a - x_.front(), hi - x_.front());
    }
    if (b > x_.back()) {
        double lo = std::max(a, x_.back());
        total += tail(y_.back(), d_.back(), lo - x_.back(), b - x_.back());
    }
    double lo = std::max(a, x_.front());
    double hi = std::min(b, x_.back());
    if (lo < hi) {
        for (size_t k = 0; k + 1 < x_.size(); ++k) {
            double seg_lo = std::max(lo, x_[k]);
            double seg_hi = std::min(hi, x_[k + 1]);
            if (seg_lo < seg_hi)
                total += segment_integral(k, seg_lo - x_[k], seg_hi - x_[k]);
        }
    }
    return total;
}

void RateQualityCurve::validate(size_t min_points) const {
    require(points.size() >= min_points, "too-few-points",
            "curve has " + std::to_string(points.size()) + " points, needs " +
                std::to_string(min_points));
    for (size_t i = 0; i < points.size(); ++i) {
        require(points[i].rate_bps > 0.0, "invalid-curve", "rate must be positive");
        require(std::isfinite(points[i].quality), "invalid-curve", "quality must be finite");
        if (i > 0)
            require(points[i].rate_bps > points[i - 1].rate_bps, "invalid-curve",
                    "rates must strictly increase");
    }
}

void RateQualityCurve::sort_by_rate() {
    std::sort(points.begin(), points.end(),
              [](const RateQualityPoint& a, const RateQualityPoint& b) { return a.rate_bps < b.rate_bps; });
}

namespace {

struct BdAxes {
    PchipInterpolant test;
    PchipInterpolant anchor;
    double lo;
    double hi;
};

std::vector<double> log_rates(const RateQualityCurve& c) {
    std::vector<double> v;
    v.reserve(c.points.size());
    for (const RateQualityPoint& p : c.points)
        v.push_back(std::log10(p.rate_bps));
    return v;
}

std::vector<double> qualities(const RateQualityCurve& c) {
    std::vector<double> v;
    v.reserve(c.points.size());
    for (const RateQualityPoint& p : c.points)
        v.push_back(p.quality);
    return v;
}

void check_pair(const RateQualityCurve& test, const RateQualityCurve& anchor) {
    require(test.metric_id == anchor.metric_id, "metric-mismatch",
            test.metric_id + " vs " + anchor.metric_id);
    test.validate();
    anchor.validate();
}

} // namespace

double bd_rate(const RateQualityCurve& test, const RateQualityCurve& anchor) {
    check_pair(test, anchor);
    // log-rate as a function of quality: qualities must strictly increase
    // along the rate axis for the axes to be invertible.
    for (const RateQualityCurve* c : {&test, &anchor})
        for (size_t i = 1; i < c->points.size(); ++i)
            require(c->points[i].quality > c->points[i - 1].quality, "non-monotone-quality",
                    "quality must strictly increase with rate for BD-rate");
    PchipInterpolant it(qualities(test), log_rates(test));
    PchipInterpolant ia(qualities(anchor), log_rates(anchor));
    double lo = std::max(it.x_min(), ia.x_min());
    double hi = std::min(it.x_max(), ia.x_max());
    require(lo < hi, "no-quality-overlap");
    double mean_diff = (it.integrate(lo, hi) - ia.integrate(lo, hi)) / (hi - lo);
    return (std::pow(10.0, mean_diff) - 1.0) * 100.0;
}

double bd_quality(const RateQualityCurve& test, const RateQualityCurve& anchor) {
    check_pair(test, anchor);
    PchipInterpolant it(log_rates(test), qualities(test));
    PchipInterpolant ia(log_rates(anchor), qualities(anchor));
    double lo = std::max(it.x_min(), ia.x_min());
    double hi = std::min(it.x_max(), ia.x_max());
    require(lo < hi, "no-rate-overlap");
    return (it.integrate(lo, hi) - ia.integrate(lo, hi)) / (hi - lo);
}

std::string format_double(double value) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

namespace {

double parse_double(const std::string& text, const std::string& context) {
    double v = 0.0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    require(res.ec == std::errc() && res.ptr == text.data() + text.size(), "malformed-row",
            context + ": bad number '" + text + "'");
    return v;
}

int parse_int(const std::string& text, const std::string& context) {
    int v = 0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    require(res.ec == std::errc() && res.ptr == text.data() + text.size(), "malformed-row",
            context + ": bad integer '" + text + "'");
    return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ','))
        fields.push_back(field);
    if (!line.empty() && line.back() == ',')
        fields.push_back("");
    return fields;
}

constexpr const char* kCsvHeader = "codec,sequence,metric,qp,rate_bps,quality";

} // namespace

std::vector<RateQualityCurve> load_rd_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(in.good(), "io-failure", "cannot open " + path.string());
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), "malformed-row", "empty file");
    if (!line.empty() && line.back() == '\r')
        line.pop_back();
    require(line == kCsvHeader, "malformed-row", "unexpected header '" + line + "'");

    std::map<std::tuple<std::string, std::string, std::string>, RateQualityCurve> curves;
    std::map<std::tuple<std::string, std::string, std::string, int>, bool> seen;
    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        std::string context = path.filename().string() + ":" + std::to_string(line_no);
        std::vector<std::string> f = split_csv_line(line);
        require(f.size() == 6, "malformed-row", context + ": expected 6 fields, got " +
                                                    std::to_string(f.size()));
        RateQualityPoint p;
        p.qp = parse_int(f[3], context);
        p.rate_bps = parse_double(f[4], context);
        p.quality = parse_double(f[5], context);
        require(p.rate_bps > 0.0, "malformed-row", context + ": rate must be positive");

        auto key = std::make_tuple(f[0], f[1], f[2]);
        auto point_key = std::make_tuple(f[0], f[1], f[2], p.qp);
        require(!seen.count(point_key), "duplicate-point",
                context + ": repeated (codec,sequence,metric,qp)");
        seen[point_key] = true;

        RateQualityCurve& c = curves[key];
        c.codec = f[0];
        c.sequence = f[1];
        c.metric_id = f[2];
        c.points.push_back(p);
    }

    std::vector<RateQualityCurve> out;
    out.reserve(curves.size());
    for (auto& [key, curve] : curves) {
        curve.sort_by_rate();
        out.push_back(std::move(curve));
    }
    return out;
}

void write_rd_csv(const std::vector<RateQualityCurve>& curves, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    require(out.good(), "io-failure", "cannot open " + path.string() + " for writing");
    out << kCsvHeader << "\n";
    for (const RateQualityCurve& c : curves)
        for (const RateQualityPoint& p : c.points)
            out << c.codec << "," << c.sequence << "," << c.metric_id << "," << p.qp << ","
                << format_double(p.rate_bps) << "," << format_double(p.quality) << "\n";
    out.flush();
    require(out.good(), "io-failure", "write failed for " + path.string());
}

} // namespace vst3
