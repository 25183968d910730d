#include "vst3/nn.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <thread>

#include "vst3/error.hpp"

namespace vst3::nn {

using RMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RMat>;
using MapConstMat = Eigen::Map<const RMat>;

size_t shape_size(const Shape& shape) {
    size_t n = 1;
    for (int d : shape) {
        require(d > 0, "shape-mismatch", "non-positive dimension");
        n *= static_cast<size_t>(d);
    }
    return n;
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
    data_.assign(shape_size(shape_), fill);
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data) {
    Tensor t;
    require(shape_size(shape) == data.size(), "shape-mismatch",
            "data length does not match shape");
    t.shape_ = std::move(shape);
    t.data_ = std::move(data);
    return t;
}

void Tensor::fill(double v) {
    std::fill(data_.begin(), data_.end(), v);
}

void Tensor::check_finite(const std::string& context) const {
    for (double v : data_)
        require(std::isfinite(v), "non-finite-value", context);
}

Tensor Tensor::reshaped(Shape new_shape) const {
    require(shape_size(new_shape) == data_.size(), "shape-mismatch", "reshape size mismatch");
    Tensor t;
    t.shape_ = std::move(new_shape);
    t.data_ = data_;
    return t;
}

// ---------------------------------------------------------------------------
// Convolution core: im2col + GEMM, shared by Conv3d and Conv2d.

namespace {

struct ConvGeom {
    int in_ch, out_ch;
    std::array<int, 3> k, s, p;
};

std::array<int, 3> conv_out_dims(const ConvGeom& g, const std::array<int, 3>& in) {
    std::array<int, 3> out;
    for (int i = 0; i < 3; ++i) {
        int span = in[i] + 2 * g.p[i] - g.k[i];
        require(span >= 0, "shape-mismatch", "kernel larger than padded input");
        out[i] = span / g.s[i] + 1;
    }
    return out;
}

void im2col(const double* in, const std::array<int, 3>& in_dims, const ConvGeom& g,
            const std::array<int, 3>& out_dims, double* col) {
    const int D = in_dims[0], H = in_dims[1], W = in_dims[2];
    const int Do = out_dims[0], Ho = out_dims[1], Wo = out_dims[2];
    const size_t N = static_cast<size_t>(Do) * Ho * Wo;
    size_t row = 0;
    for (int ci = 0; ci < g.in_ch; ++ci) {
        const double* in_ch = in + static_cast<size_t>(ci) * D * H * W;
        for (int kz = 0; kz < g.k[0]; ++kz)
            for (int ky = 0; ky < g.k[1]; ++ky)
                for (int kx = 0; kx < g.k[2]; ++kx) {
                    double* dst = col + row++ * N;
                    for (int z = 0; z < Do; ++z) {
                        int iz = z * g.s[0] + kz - g.p[0];
                        double* dz = dst + static_cast<size_t>(z) * Ho * Wo;
                        if (iz < 0 || iz >= D) {
                            std::memset(dz, 0, sizeof(double) * Ho * Wo);
                            continue;
                        }
                        const double* src_z = in_ch + static_cast<size_t>(iz) * H * W;
                        for (int y = 0; y < Ho; ++y) {
                            int iy = y * g.s[1] + ky - g.p[1];
                            double* dy = dz + static_cast<size_t>(y) * Wo;
                            if (iy < 0 || iy >= H) {
                                std::memset(dy, 0, sizeof(double) * Wo);
                                continue;
                            }
                            const double* src = src_z + static_cast<size_t>(iy) * W;
                            if (g.s[2] == 1) {
                                int ix0 = kx - g.p[2];
                                int x_lo = std::clamp(-ix0, 0, Wo);
                                int x_hi = std::clamp(W - ix0, x_lo, Wo);
                                if (x_lo > 0)
                                    std::memset(dy, 0, sizeof(double) * x_lo);
                                if (x_hi > x_lo)
                                    std::memcpy(dy + x_lo, src + ix0 + x_lo,
                                                sizeof(double) * (x_hi - x_lo));
                                if (x_hi < Wo)
                                    std::memset(dy + x_hi, 0, sizeof(double) * (Wo - x_hi));
                            } else {
                                for (int x = 0; x < Wo; ++x) {
                                    int ix = x * g.s[2] + kx - g.p[2];
                                    dy[x] = (ix >= 0 && ix < W) ? src[ix] : 0.0;
                                }
                            }
                        }
                    }
                }
    }
}

void col2im_add(const double* col, const std::array<int, 3>& in_dims, const ConvGeom& g,
                const std::array<int, 3>& out_dims, double* din) {
    const int D = in_dims[0], H = in_dims[1], W = in_dims[2];
    const int Do = out_dims[0], Ho = out_dims[1], Wo = out_dims[2];
    const size_t N = static_cast<size_t>(Do) * Ho * Wo;
    size_t row = 0;
    for (int ci = 0; ci < g.in_ch; ++ci) {
        double* din_ch = din + static_cast<size_t>(ci) * D * H * W;
        for (int kz = 0; kz < g.k[0]; ++kz)
            for (int ky = 0; ky < g.k[1]; ++ky)
                for (int kx = 0; kx < g.k[2]; ++kx) {
                    const double* src_row = col + row++ * N;
                    for (int z = 0; z < Do; ++z) {
                        int iz = z * g.s[0] + kz - g.p[0];
                        if (iz < 0 || iz >= D)
                            continue;
                        double* dz = din_ch + static_cast<size_t>(iz) * H * W;
                        for (int y = 0; y < Ho; ++y) {
                            int iy = y * g.s[1] + ky - g.p[1];
                            if (iy < 0 || iy >= H)
                                continue;
                            double* drow = dz + static_cast<size_t>(iy) * W;
                            const double* srow = src_row + (static_cast<size_t>(z) * Ho + y) * Wo;
                            for (int x = 0; x < Wo; ++x) {
                                int ix = x * g.s[2] + kx - g.p[2];
                                if (ix >= 0 && ix < W)
                                    drow[ix] += srow[x];
                            }
                        }
                    }
                }
    }
}

std::array<int, 3> tensor_spatial_dims(const Tensor& t) {
    return {t.dim(1), t.dim(2), t.dim(3)};
}

Tensor conv_forward(const Tensor& input, const Tensor& weights, const Tensor& bias,
                    const ConvGeom& g, std::vector<double>& col_ws) {
    require(input.rank() == 4 && input.dim(0) == g.in_ch, "shape-mismatch",
            "conv input must be (in_ch, D, H, W)");
    std::array<int, 3> in_dims = tensor_spatial_dims(input);
    std::array<int, 3> out_dims = conv_out_dims(g, in_dims);
    const size_t rows = static_cast<size_t>(g.in_ch) * g.k[0] * g.k[1] * g.k[2];
    const size_t cols = static_cast<size_t>(out_dims[0]) * out_dims[1] * out_dims[2];

    col_ws.resize(rows * cols);
    im2col(input.data(), in_dims, g, out_dims, col_ws.data());

    Tensor out(Shape{g.out_ch, out_dims[0], out_dims[1], out_dims[2]});
    MapConstMat w_map(weights.data(), g.out_ch, static_cast<Eigen::Index>(rows));
    MapConstMat col_map(col_ws.data(), static_cast<Eigen::Index>(rows),
                        static_cast<Eigen::Index>(cols));
    MapMat out_map(out.data(), g.out_ch, static_cast<Eigen::Index>(cols));
    out_map.noalias() = w_map * col_map;
    for (int co = 0; co < g.out_ch; ++co)
        out_map.row(co).array() += bias[static_cast<size_t>(co)];
    return out;
}

Tensor conv_backward(const Tensor& input, const Tensor& output_grad, const Tensor& weights,
                     Tensor& dweights, Tensor& dbias, const ConvGeom& g,
                     std::vector<double>& col_ws, std::vector<double>& dcol_ws) {
    std::array<int, 3> in_dims = tensor_spatial_dims(input);
    std::array<int, 3> out_dims = conv_out_dims(g, in_dims);
    require(output_grad.rank() == 4 && output_grad.dim(0) == g.out_ch &&
                tensor_spatial_dims(output_grad) == out_dims,
            "shape-mismatch", "conv output gradient shape");

    const size_t rows = static_cast<size_t>(g.in_ch) * g.k[0] * g.k[1] * g.k[2];
    const size_t cols = static_cast<size_t>(out_dims[0]) * out_dims[1] * out_dims[2];

    col_ws.resize(rows * cols);
    im2col(input.data(), in_dims, g, out_dims, col_ws.data());

    MapConstMat dout_map(output_grad.data(), g.out_ch, static_cast<Eigen::Index>(cols));
    MapConstMat col_map(col_ws.data(), static_cast<Eigen::Index>(rows),
                        static_cast<Eigen::Index>(cols));
    MapMat dw_map(dweights.data(), g.out_ch, static_cast<Eigen::Index>(rows));
    dw_map.noalias() += dout_map * col_map.transpose();
    for (int co = 0; co < g.out_ch; ++co)
        dbias[static_cast<size_t>(co)] += dout_map.row(co).sum();

    dcol_ws.resize(rows * cols);
    MapMat dcol_map(dcol_ws.data(), static_cast<Eigen::Index>(rows),
                    static_cast<Eigen::Index>(cols));
    MapConstMat w_map(weights.data(), g.out_ch, static_cast<Eigen::Index>(rows));
    dcol_map.noalias() = w_map.transpose() * dout_map;

    Tensor din(input.shape());
    col2im_add(dcol_ws.data(), in_dims, g, out_dims, din.data());
    return din;
}

void he_uniform(Tensor& w, size_t fan_in, std::mt19937_64& rng) {
    double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (size_t i = 0; i < w.size(); ++i)
        w[i] = dist(rng);
}

thread_local std::vector<double> t_col_ws;
thread_local std::vector<double> t_dcol_ws;

} // namespace

// ---------------------------------------------------------------------------
// Conv3d

Conv3d::Conv3d(int in_ch, int out_ch, std::array<int, 3> kernel, std::array<int, 3> stride,
               std::array<int, 3> pad)
    : weights(Shape{out_ch, in_ch, kernel[0], kernel[1], kernel[2]}),
      bias(Shape{out_ch}),
      dweights(weights.shape()),
      dbias(bias.shape()),
      in_ch_(in_ch),
      out_ch_(out_ch),
      kernel_(kernel),
      stride_(stride),
      pad_(pad) {
    for (int i = 0; i < 3; ++i)
        require(kernel[i] >= 1 && stride[i] >= 1 && pad[i] >= 0, "shape-mismatch",
                "bad conv3d geometry");
}

Tensor Conv3d::forward(const Tensor& input) {
    cached_input_ = input;
    ConvGeom g{in_ch_, out_ch_, kernel_, stride_, pad_};
    return conv_forward(input, weights, bias, g, t_col_ws);
}

Tensor Conv3d::backward(const Tensor& output_grad) {
    require(cached_input_.size() > 0, "backward-without-forward", "conv3d");
    ConvGeom g{in_ch_, out_ch_, kernel_, stride_, pad_};
    return conv_backward(cached_input_, output_grad, weights, dweights, dbias, g, t_col_ws,
                         t_dcol_ws);
}

void Conv3d::init_params(std::mt19937_64& rng) {
    he_uniform(weights, static_cast<size_t>(in_ch_) * kernel_[0] * kernel_[1] * kernel_[2], rng);
    bias.fill(0.0);
}

std::vector<int> Conv3d::config() const {
    return {in_ch_,     out_ch_,    kernel_[0], kernel_[1], kernel_[2], stride_[0],
            stride_[1], stride_[2], pad_[0],    pad_[1],    pad_[2]};
}

std::unique_ptr<Layer> Conv3d::clone() const {
    auto copy = std::make_unique<Conv3d>(in_ch_, out_ch_, kernel_, stride_, pad_);
    copy->weights = weights;
    copy->bias = bias;
    return copy;
}

// ---------------------------------------------------------------------------
// Conv2d: the 3-D core with a unit depth axis.

Conv2d::Conv2d(int in_ch, int out_ch, std::array<int, 2> kernel, std::array<int, 2> stride,
               std::array<int, 2> pad)
    : weights(Shape{out_ch, in_ch, kernel[0], kernel[1]}),
      bias(Shape{out_ch}),
      dweights(weights.shape()),
      dbias(bias.shape()),
      in_ch_(in_ch),
      out_ch_(out_ch),
      kernel_(kernel),
      stride_(stride),
      pad_(pad) {
    for (int i = 0; i < 2; ++i)
        require(kernel[i] >= 1 && stride[i] >= 1 && pad[i] >= 0, "shape-mismatch",
                "bad conv2d geometry");
}

Tensor Conv2d::forward(const Tensor& input) {
    require(input.rank() == 3 && input.dim(0) == in_ch_, "shape-mismatch",
            "conv2d input must be (in_ch, H, W)");
    cached_input_ = input;
    ConvGeom g{in_ch_, out_ch_, {1, kernel_[0], kernel_[1]}, {1, stride_[0], stride_[1]},
               {0, pad_[0], pad_[1]}};
    Tensor in4 = input.reshaped({in_ch_, 1, input.dim(1), input.dim(2)});
    Tensor out4 = conv_forward(in4, weights, bias, g, t_col_ws);
    return out4.reshaped({out4.dim(0), out4.dim(2), out4.dim(3)});
}

Tensor Conv2d::backward(const Tensor& output_grad) {
    require(cached_input_.size() > 0, "backward-without-forward", "conv2d");
    require(output_grad.rank() == 3, "shape-mismatch", "conv2d output gradient rank");
    ConvGeom g{in_ch_, out_ch_, {1, kernel_[0], kernel_[1]}, {1, stride_[0], stride_[1]},
               {0, pad_[0], pad_[1]}};
    Tensor in4 = cached_input_.reshaped({in_ch_, 1, cached_input_.dim(1), cached_input_.dim(2)});
    Tensor dout4 =
        output_grad.reshaped({output_grad.dim(0), 1, output_grad.dim(1), output_grad.dim(2)});
    Tensor din4 = conv_backward(in4, dout4, weights, dweights, dbias, g, t_col_ws, t_dcol_ws);
    return din4.reshaped(cached_input_.shape());
}

void Conv2d::init_params(std::mt19937_64& rng) {
    he_uniform(weights, static_cast<size_t>(in_ch_) * kernel_[0] * kernel_[1], rng);
    bias.fill(0.0);
}

std::vector<int> Conv2d::config() const {
    return {in_ch_, out_ch_, kernel_[0], kernel_[1], stride_[0], stride_[1], pad_[0], pad_[1]};
}

std::unique_ptr<Layer> Conv2d::clone() const {
    auto copy = std::make_unique<Conv2d>(in_ch_, out_ch_, kernel_, stride_, pad_);
    copy->weights = weights;
    copy->bias = bias;
    return copy;
}

// ---------------------------------------------------------------------------
// Pointwise / pooling / dense layers

Tensor ReLU::forward(const Tensor& input) {
    cached_input_ = input;
    Tensor out = input;
    for (size_t i = 0; i < out.size(); ++i)
        out[i] = std::max(out[i], 0.0);
    return out;
}

Tensor ReLU::backward(const Tensor& output_grad) {
    require(cached_input_.size() > 0, "backward-without-forward", "relu");
    require(output_grad.same_shape(cached_input_), "shape-mismatch", "relu gradient shape");
    Tensor din = output_grad;
    for (size_t i = 0; i < din.size(); ++i)
        if (cached_input_[i] <= 0.0)
            din[i] = 0.0;
    return din;
}

Tensor GlobalAvgPool::forward(const Tensor& input) {
    require(input.rank() >= 2, "shape-mismatch", "gap input must have a channel axis");
    cached_shape_ = input.shape();
    int channels = input.dim(0);
    size_t per_ch = input.size() / static_cast<size_t>(channels);
    Tensor out(Shape{channels});
    for (int c = 0; c < channels; ++c) {
        double acc = 0.0;
        const double* src = input.data() + static_cast<size_t>(c) * per_ch;
        for (size_t i = 0; i < per_ch; ++i)
            acc += src[i];
        out[static_cast<size_t>(c)] = acc / static_cast<double>(per_ch);
    }
    return out;
}

Tensor GlobalAvgPool::backward(const Tensor& output_grad) {
    require(!cached_shape_.empty(), "backward-without-forward", "gap");
    int channels = cached_shape_[0];
    require(output_grad.rank() == 1 && output_grad.dim(0) == channels, "shape-mismatch",
            "gap gradient shape");
    Tensor din(cached_shape_);
    size_t per_ch = din.size() / static_cast<size_t>(channels);
    for (int c = 0; c < channels; ++c) {
        double g = output_grad[static_cast<size_t>(c)] / static_cast<double>(per_ch);
        double* dst = din.data() + static_cast<size_t>(c) * per_ch;
        for (size_t i = 0; i < per_ch; ++i)
            dst[i] = g;
    }
    return din;
}

Dense::Dense(int in_dim, int out_dim)
    : weights(Shape{out_dim, in_dim}),
      bias(Shape{out_dim}),
      dweights(weights.shape()),
      dbias(bias.shape()),
      in_dim_(in_dim),
      out_dim_(out_dim) {}

Tensor Dense::forward(const Tensor& input) {
    require(input.rank() == 1 && input.dim(0) == in_dim_, "shape-mismatch",
            "dense input must be a vector of size " + std::to_string(in_dim_));
    cached_input_ = input;
    Tensor out(Shape{out_dim_});
    MapConstMat w(weights.data(), out_dim_, in_dim_);
    Eigen::Map<const Eigen::VectorXd> x(input.data(), in_dim_);
    Eigen::Map<Eigen::VectorXd> y(out.data(), out_dim_);
    y.noalias() = w * x;
    for (int o = 0; o < out_dim_; ++o)
        out[static_cast<size_t>(o)] += bias[static_cast<size_t>(o)];
    return out;
}

Tensor Dense::backward(const Tensor& output_grad) {
    require(cached_input_.size() > 0, "backward-without-forward", "dense");
    require(output_grad.rank() == 1 && output_grad.dim(0) == out_dim_, "shape-mismatch",
            "dense gradient shape");
    MapMat dw(dweights.data(), out_dim_, in_dim_);
    Eigen::Map<const Eigen::VectorXd> dy(output_grad.data(), out_dim_);
    Eigen::Map<const Eigen::VectorXd> x(cached_input_.data(), in_dim_);
    dw.noalias() += dy * x.transpose();
    for (int o = 0; o < out_dim_; ++o)
        dbias[static_cast<size_t>(o)] += output_grad[static_cast<size_t>(o)];

    Tensor din(Shape{in_dim_});
    MapConstMat w(weights.data(), out_dim_, in_dim_);
    Eigen::Map<Eigen::VectorXd> dx(din.data(), in_dim_);
    dx.noalias() = w.transpose() * dy;
    return din;
}

void Dense::init_params(std::mt19937_64& rng) {
    he_uniform(weights, static_cast<size_t>(in_dim_), rng);
    bias.fill(0.0);
}

std::unique_ptr<Layer> Dense::clone() const {
    auto copy = std::make_unique<Dense>(in_dim_, out_dim_);
    copy->weights = weights;
    copy->bias = bias;
    return copy;
}

Tensor Softmax::forward(const Tensor& input) {
    cached_output_ = softmax(input);
    return cached_output_;
}

Tensor Softmax::backward(const Tensor& output_grad) {
    require(cached_output_.size() > 0, "backward-without-forward", "softmax");
    require(output_grad.same_shape(cached_output_), "shape-mismatch", "softmax gradient shape");
    double dot = 0.0;
    for (size_t i = 0; i < output_grad.size(); ++i)
        dot += output_grad[i] * cached_output_[i];
    Tensor din = output_grad;
    for (size_t i = 0; i < din.size(); ++i)
        din[i] = cached_output_[i] * (output_grad[i] - dot);
    return din;
}

Tensor softmax(const Tensor& logits) {
    require(logits.size() > 0, "shape-mismatch", "softmax of empty tensor");
    logits.check_finite("softmax input");
    double max_v = logits[0];
    for (size_t i = 1; i < logits.size(); ++i)
        max_v = std::max(max_v, logits[i]);
    Tensor out = logits;
    double sum = 0.0;
    for (size_t i = 0; i < out.size(); ++i) {
        out[i] = std::exp(out[i] - max_v);
        sum += out[i];
    }
    for (size_t i = 0; i < out.size(); ++i)
        out[i] /= sum;
    return out;
}

double cross_entropy_with_logits(const Tensor& logits, int label, Tensor* dlogits) {
    require(label >= 0 && static_cast<size_t>(label) < logits.size(), "shape-mismatch",
            "label out of range");
    double max_v = logits[0];
    for (size_t i = 1; i < logits.size(); ++i)
        max_v = std::max(max_v, logits[i]);
    double sum_exp = 0.0;
    for (size_t i = 0; i < logits.size(); ++i)
        sum_exp += std::exp(logits[i] - max_v);
    double lse = max_v + std::log(sum_exp);
    double loss = lse - logits[static_cast<size_t>(label)];
    if (dlogits) {
        *dlogits = logits;
        for (size_t i = 0; i < logits.size(); ++i)
            (*dlogits)[i] = std::exp(logits[i] - lse);
        (*dlogits)[static_cast<size_t>(label)] -= 1.0;
    }
    return loss;
}

// ---------------------------------------------------------------------------
// Model

void Model::add(std::unique_ptr<Layer> layer) {
    layers_.push_back(std::move(layer));
}

Tensor Model::forward(const Tensor& input) {
    require(!layers_.empty(), "empty-model");
    Tensor x = input;
    for (auto& layer : layers_)
        x = layer->forward(x);
    forward_recorded_ = true;
    return x;
}

Tensor Model::backward(const Tensor& loss_grad) {
    require(forward_recorded_, "backward-without-forward");
    Tensor g = loss_grad;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
        g = (*it)->backward(g);
    return g;
}

std::vector<Tensor*> Model::params() {
    std::vector<Tensor*> out;
    for (auto& layer : layers_)
        for (Tensor* p : layer->params())
            out.push_back(p);
    return out;
}

std::vector<Tensor*> Model::param_grads() {
    std::vector<Tensor*> out;
    for (auto& layer : layers_)
        for (Tensor* g : layer->param_grads())
            out.push_back(g);
    return out;
}

void Model::zero_grads() {
    for (Tensor* g : param_grads())
        g->fill(0.0);
}

size_t Model::param_count() {
    size_t n = 0;
    for (Tensor* p : params())
        n += p->size();
    return n;
}

void Model::init_params(uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (auto& layer : layers_)
        layer->init_params(rng);
}

Model Model::clone() const {
    Model copy;
    for (const auto& layer : layers_)
        copy.add(layer->clone());
    return copy;
}

// ---------------------------------------------------------------------------
// ADAM

AdamOptimizer::AdamOptimizer(double beta1, double beta2, double epsilon)
    : beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {}

void AdamOptimizer::step(Model& model, double lr) {
    std::vector<Tensor*> ps = model.params();
    std::vector<Tensor*> gs = model.param_grads();
    require(ps.size() == gs.size(), "shape-mismatch", "params/grads count");
    if (m_.empty()) {
        for (Tensor* p : ps) {
            m_.emplace_back(p->shape());
            v_.emplace_back(p->shape());
        }
    }
    require(m_.size() == ps.size(), "shape-mismatch", "optimizer state count");

    ++step_count_;
    double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_count_));
    double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_count_));
    for (size_t i = 0; i < ps.size(); ++i) {
        Tensor& p = *ps[i];
        Tensor& g = *gs[i];
        require(p.same_shape(g) && p.same_shape(m_[i]), "shape-mismatch",
                "parameter/gradient shape");
        for (size_t j = 0; j < p.size(); ++j) {
            double grad = g[j];
            m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * grad;
            v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * grad * grad;
            double m_hat = m_[i][j] / bc1;
            double v_hat = v_[i][j] / bc2;
            p[j] -= lr * m_hat / (std::sqrt(v_hat) + epsilon_);
        }
    }
}

// ---------------------------------------------------------------------------
// Checkpoint I/O. Binary little-endian: magic "VNN1", version, then per
// layer the type string, integer config and raw parameter blobs.

namespace {

constexpr char kCheckpointMagic[4] = {'V', 'N', 'N', '1'};
constexpr uint32_t kCheckpointVersion = 1;

void write_u32(std::ostream& out, uint32_t v) {
    uint8_t b[4];
    for (int i = 0; i < 4; ++i)
        b[i] = static_cast<uint8_t>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 4);
}

void write_f64(std::ostream& out, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    uint8_t b[8];
    for (int i = 0; i < 8; ++i)
        b[i] = static_cast<uint8_t>((bits >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 8);
}

uint32_t read_u32(std::istream& in) {
    uint8_t b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    require(in.gcount() == 4, "bad-checkpoint", "truncated");
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
        v |= static_cast<uint32_t>(b[i]) << (8 * i);
    return v;
}

double read_f64(std::istream& in) {
    uint8_t b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    require(in.gcount() == 8, "bad-checkpoint", "truncated");
    uint64_t bits = 0;
    for (int i = 0; i < 8; ++i)
        bits |= static_cast<uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

std::unique_ptr<Layer> make_layer(const std::string& type, const std::vector<int>& c) {
    if (type == "conv3d") {
        require(c.size() == 11, "bad-checkpoint", "conv3d config");
        return std::make_unique<Conv3d>(c[0], c[1], std::array<int, 3>{c[2], c[3], c[4]},
                                        std::array<int, 3>{c[5], c[6], c[7]},
                                        std::array<int, 3>{c[8], c[9], c[10]});
    }
    if (type == "conv2d") {
        require(c.size() == 8, "bad-checkpoint", "conv2d config");
        return std::make_unique<Conv2d>(c[0], c[1], std::array<int, 2>{c[2], c[3]},
                                        std::array<int, 2>{c[4], c[5]},
                                        std::array<int, 2>{c[6], c[7]});
    }
    if (type == "relu")
        return std::make_unique<ReLU>();
    if (type == "gap")
        return std::make_unique<GlobalAvgPool>();
    if (type == "dense") {
        require(c.size() == 2, "bad-checkpoint", "dense config");
        return std::make_unique<Dense>(c[0], c[1]);
    }
    if (type == "softmax")
        return std::make_unique<Softmax>();
    fail("bad-checkpoint", "unknown layer type '" + type + "'");
}

} // namespace

void Model::save(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(out.good(), "io-failure", "cannot open " + path.string() + " for writing");
    out.write(kCheckpointMagic, 4);
    write_u32(out, kCheckpointVersion);
    write_u32(out, static_cast<uint32_t>(layers_.size()));
    for (const auto& layer : layers_) {
        std::string type = layer->type();
        write_u32(out, static_cast<uint32_t>(type.size()));
        out.write(type.data(), static_cast<std::streamsize>(type.size()));
        std::vector<int> cfg = layer->config();
        write_u32(out, static_cast<uint32_t>(cfg.size()));
        for (int v : cfg)
            write_u32(out, static_cast<uint32_t>(v));
        std::vector<Tensor*> ps = layer->params();
        write_u32(out, static_cast<uint32_t>(ps.size()));
        for (Tensor* p : ps) {
            write_u32(out, static_cast<uint32_t>(p->rank()));
            for (int d : p->shape())
                write_u32(out, static_cast<uint32_t>(d));
            for (size_t i = 0; i < p->size(); ++i)
                write_f64(out, (*p)[i]);
        }
    }
    out.flush();
    require(out.good(), "io-failure", "write failed for " + path.string());
}

Model Model::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "io-failure", "cannot open " + path.string());
    char magic[4];
    in.read(magic, 4);
    require(in.gcount() == 4 && std::memcmp(magic, kCheckpointMagic, 4) == 0, "bad-checkpoint",
            "bad magic");
    uint32_t version = read_u32(in);
    require(version == kCheckpointVersion, "bad-checkpoint",
            "unsupported version " + std::to_string(version));
    uint32_t layer_count = read_u32(in);

    Model model;
    for (uint32_t li = 0; li < layer_count; ++li) {
        uint32_t type_len = read_u32(in);
        require(type_len <= 64, "bad-checkpoint", "type name too long");
        std::string type(type_len, '\0');
        in.read(type.data(), type_len);
        require(static_cast<uint32_t>(in.gcount()) == type_len, "bad-checkpoint", "truncated");
        uint32_t cfg_len = read_u32(in);
        require(cfg_len <= 64, "bad-checkpoint", "config too long");
        std::vector<int> cfg(cfg_len);
        for (uint32_t i = 0; i < cfg_len; ++i)
            cfg[i] = static_cast<int>(read_u32(in));
        std::unique_ptr<Layer> layer = make_layer(type, cfg);

        uint32_t param_count = read_u32(in);
        std::vector<Tensor*> ps = layer->params();
        require(param_count == ps.size(), "bad-checkpoint", "parameter count mismatch");
        for (Tensor* p : ps) {
            uint32_t ndim = read_u32(in);
            require(ndim == p->rank(), "bad-checkpoint", "parameter rank mismatch");
            for (size_t d = 0; d < ndim; ++d)
                require(static_cast<int>(read_u32(in)) == p->shape()[d], "bad-checkpoint",
                        "parameter shape mismatch");
            for (size_t i = 0; i < p->size(); ++i)
                (*p)[i] = read_f64(in);
        }
        model.add(std::move(layer));
    }
    return model;
}

// ---------------------------------------------------------------------------
// Batch execution

std::vector<double> batch_forward_backward(Model& model, const std::vector<const Tensor*>& inputs,
                                           const SampleLossFn& loss_fn, int threads) {
    const size_t batch = inputs.size();
    require(batch > 0, "empty-batch");
    int workers = std::max(1, std::min<int>(threads, static_cast<int>(batch)));

    std::vector<std::vector<Tensor>> sample_grads(batch);
    std::vector<double> losses(batch, 0.0);
    std::vector<std::exception_ptr> errors(static_cast<size_t>(workers));

    auto run_worker = [&](int w) {
        try {
            Model replica = model.clone();
            for (size_t i = static_cast<size_t>(w); i < batch; i += static_cast<size_t>(workers)) {
                replica.zero_grads();
                Tensor out = replica.forward(*inputs[i]);
                Tensor dout(out.shape());
                losses[i] = loss_fn(i, out, dout);
                replica.backward(dout);
                std::vector<Tensor*> gs = replica.param_grads();
                sample_grads[i].reserve(gs.size());
                for (Tensor* g : gs)
                    sample_grads[i].push_back(*g);
            }
        } catch (...) {
            errors[static_cast<size_t>(w)] = std::current_exception();
        }
    };

    if (workers == 1) {
        run_worker(0);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<size_t>(workers));
        for (int w = 0; w < workers; ++w)
            pool.emplace_back(run_worker, w);
        for (auto& t : pool)
            t.join();
    }
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);

    // Reduce in sample order: this keeps the sums identical for any worker
    // count.
    std::vector<Tensor*> gs = model.param_grads();
    for (size_t i = 0; i < batch; ++i) {
        require(sample_grads[i].size() == gs.size(), "shape-mismatch", "batch gradient count");
        for (size_t p = 0; p < gs.size(); ++p) {
            Tensor& acc = *gs[p];
            const Tensor& add = sample_grads[i][p];
            for (size_t j = 0; j < acc.size(); ++j)
                acc[j] += add[j];
        }
    }
    return losses;
}

} // namespace vst3::nn
