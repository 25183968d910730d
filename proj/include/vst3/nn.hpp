#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace vst3::nn {

using Shape = std::vector<int>;

// Dense n-dimensional array of doubles, row-major.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    static Tensor from_data(Shape shape, std::vector<double> data);

    const Shape& shape() const { return shape_; }
    size_t size() const { return data_.size(); }
    int dim(size_t i) const { return shape_[i]; }
    size_t rank() const { return shape_.size(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double& operator[](size_t i) { return data_[i]; }
    double operator[](size_t i) const { return data_[i]; }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    void fill(double v);
    void check_finite(const std::string& context) const;

    Tensor reshaped(Shape new_shape) const;

    bool operator==(const Tensor&) const = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

size_t shape_size(const Shape& shape);

// A layer owns its parameters and gradient buffers. forward() caches
// whatever backward() needs; backward() accumulates parameter gradients and
// returns the input gradient.
class Layer {
public:
    virtual ~Layer() = default;

    virtual Tensor forward(const Tensor& input) = 0;
    virtual Tensor backward(const Tensor& output_grad) = 0;

    virtual std::vector<Tensor*> params() { return {}; }
    virtual std::vector<Tensor*> param_grads() { return {}; }
    virtual void init_params(std::mt19937_64&) {}

    virtual std::string type() const = 0;
    virtual std::vector<int> config() const { return {}; }
    virtual std::unique_ptr<Layer> clone() const = 0;
};

class Conv3d : public Layer {
public:
    // kernel/stride/pad are (depth, height, width); zero padding.
    Conv3d(int in_ch, int out_ch, std::array<int, 3> kernel, std::array<int, 3> stride,
           std::array<int, 3> pad);

    Tensor forward(const Tensor& input) override;
    Tensor backward(const Tensor& output_grad) override;
    std::vector<Tensor*> params() override { return {&weights, &bias}; }
    std::vector<Tensor*> param_grads() override { return {&dweights, &dbias}; }
    void init_params(std::mt19937_64& rng) override;
    std::string type() const override { return "conv3d"; }
    std::vector<int> config() const override;
    std::unique_ptr<Layer> clone() const override;

    Tensor weights; // (out_ch, in_ch, kd, kh, kw)
    Tensor bias;    // (out_ch)
    Tensor dweights;
    Tensor dbias;

private:
    int in_ch_, out_ch_;
    std::array<int, 3> kernel_, stride_, pad_;
    Tensor cached_input_;
};

class Conv2d : public Layer {
public:
    Conv2d(int in_ch, int out_ch, std::array<int, 2> kernel, std::array<int, 2> stride,
           std::array<int, 2> pad);

    Tensor forward(const Tensor& input) override;
    Tensor backward(const Tensor& output_grad) override;
    std::vector<Tensor*> params() override { return {&weights, &bias}; }
    std::vector<Tensor*> param_grads() override { return {&dweights, &dbias}; }
    void init_params(std::mt19937_64& rng) override;
    std::string type() const override { return "conv2d"; }
    std::vector<int> config() const override;
    std::unique_ptr<Layer> clone() const override;

    Tensor weights; // (out_ch, in_ch, kh, kw)
    Tensor bias;
    Tensor dweights;
    Tensor dbias;

private:
    int in_ch_, out_ch_;
    std::array<int, 2> kernel_, stride_, pad_;
    Tensor cached_input_;
};

class ReLU : public Layer {
public:
    Tensor forward(const Tensor& input) override;
    Tensor backward(const Tensor& output_grad) override;
    std::string type() const override { return "relu"; }
    std::unique_ptr<Layer> clone() const override { return std::make_unique<ReLU>(); }

private:
    Tensor cached_input_;
};

// Mean over every axis but the first (channel) axis.
class GlobalAvgPool : public Layer {
public:
    Tensor forward(const Tensor& input) override;
    Tensor backward(const Tensor& output_grad) override;
    std::string type() const override { return "gap"; }
    std::unique_ptr<Layer> clone() const override { return std::make_unique<GlobalAvgPool>(); }

private:
    Shape cached_shape_;
};

class Dense : public Layer {
public:
    Dense(int in_dim, int out_dim);

    Tensor forward(const Tensor& input) override;
    Tensor backward(const Tensor& output_grad) override;
    std::vector<Tensor*> params() override { return {&weights, &bias}; }
    std::vector<Tensor*> param_grads() override { return {&dweights, &dbias}; }
    void init_params(std::mt19937_64& rng) override;
    std::string type() const override { return "dense"; }
    std::vector<int> config() const override { return {in_dim_, out_dim_}; }
    std::unique_ptr<Layer> clone() const override;

    Tensor weights; // (out_dim, in_dim)
    Tensor bias;
    Tensor dweights;
    Tensor dbias;

private:
    int in_dim_, out_dim_;
    Tensor cached_input_;
};

class Softmax : public Layer {
public:
    Tensor forward(const Tensor& input) override;
    Tensor backward(const Tensor& output_grad) override;
    std::string type() const override { return "softmax"; }
    std::unique_ptr<Layer> clone() const override { return std::make_unique<Softmax>(); }

private:
    Tensor cached_output_;
};

// Numerically stable softmax (max subtraction) over a 1-D tensor.
Tensor softmax(const Tensor& logits);

// Cross-entropy of softmax(logits) against a class index. Fills dlogits
// (same shape as logits) with the gradient when non-null.
double cross_entropy_with_logits(const Tensor& logits, int label, Tensor* dlogits);

// An ordered layer stack with shared forward/backward plumbing.
class Model {
public:
    Model() = default;
    Model(Model&&) = default;
    Model& operator=(Model&&) = default;

    void add(std::unique_ptr<Layer> layer);
    Tensor forward(const Tensor& input);
    Tensor backward(const Tensor& loss_grad); // throws backward-without-forward

    size_t layer_count() const { return layers_.size(); }
    Layer& layer(size_t i) { return *layers_[i]; }
    const Layer& layer(size_t i) const { return *layers_[i]; }

    std::vector<Tensor*> params();
    std::vector<Tensor*> param_grads();
    void zero_grads();
    size_t param_count();

    // He-uniform weights, zero biases, layer order fixed.
    void init_params(uint64_t seed);

    Model clone() const;

    void save(const std::filesystem::path& path);
    static Model load(const std::filesystem::path& path);

private:
    std::vector<std::unique_ptr<Layer>> layers_;
    bool forward_recorded_ = false;
};

// Bias-corrected ADAM. Moment buffers are lazily shaped from the model's
// parameters on first step.
class AdamOptimizer {
public:
    explicit AdamOptimizer(double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8);

    void step(Model& model, double lr);
    int64_t step_count() const { return step_count_; }

    double beta1() const { return beta1_; }
    double beta2() const { return beta2_; }

private:
    double beta1_, beta2_, epsilon_;
    int64_t step_count_ = 0;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
};

// Per-sample loss callback: given the sample index and the model output,
// return the loss and fill output_grad (same shape as output).
using SampleLossFn = std::function<double(size_t index, const Tensor& output, Tensor& output_grad)>;

// Forward/backward over a batch using `threads` worker replicas. Gradient
// sums are accumulated in sample-index order, so results are bit-identical
// for any thread count. Returns per-sample losses; gradient sums are ADDED
// into the model's gradient buffers.
std::vector<double> batch_forward_backward(Model& model, const std::vector<const Tensor*>& inputs,
                                           const SampleLossFn& loss_fn, int threads);

} // namespace vst3::nn
