#pragma once

// Sequential convolutional network trained with binary cross-entropy.
//
// Tensors are NHWC. Convolutions are "valid" (no padding) and computed as
// im2col + GEMM. The scalar type is a template parameter so gradient checks
// can run in double while training runs in float.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "jamdet/specgen.hpp"

namespace jamdet::cnn {

struct Shape {
    std::size_t h = 0, w = 0, c = 0;

    std::size_t size() const { return h * w * c; }
    bool operator==(const Shape&) const = default;
    std::string str() const;
};

enum class Activation : std::uint8_t { None = 0, Relu = 1, Sigmoid = 2 };

enum class LayerKind : std::uint8_t { Conv2D = 0, BatchNorm = 1, AvgPool = 2, Flatten = 3, Dense = 4 };

struct LayerSpec {
    LayerKind kind = LayerKind::Dense;
    std::size_t units = 0;  // filters for Conv2D, neurons for Dense
    std::size_t kernel = 3;
    std::size_t stride = 1;
    Activation activation = Activation::None;

    static LayerSpec conv(std::size_t filters, std::size_t kernel, std::size_t stride,
                          Activation act = Activation::Relu) {
        return {LayerKind::Conv2D, filters, kernel, stride, act};
    }
    static LayerSpec batch_norm() { return {LayerKind::BatchNorm, 0, 0, 0, Activation::None}; }
    static LayerSpec avg_pool() { return {LayerKind::AvgPool, 0, 2, 2, Activation::None}; }
    static LayerSpec flatten() { return {LayerKind::Flatten, 0, 0, 0, Activation::None}; }
    static LayerSpec dense(std::size_t units, Activation act = Activation::Relu) {
        return {LayerKind::Dense, units, 0, 0, act};
    }
};

/// The detector architecture: input 100x1024x1, three conv/pool/batchnorm
/// blocks, then dense 64-32-16-1.
std::vector<LayerSpec> detector_architecture();
inline constexpr Shape kDetectorInput{100, 1024, 1};

template <typename T>
struct Tensor {
    std::size_t n = 0;
    Shape shape;
    std::vector<T> data;

    Tensor() = default;
    Tensor(std::size_t batch, Shape s) : n(batch), shape(s), data(batch * s.size()) {}

    void resize(std::size_t batch, Shape s) {
        n = batch;
        shape = s;
        data.resize(batch * s.size());
    }
    T* sample(std::size_t i) { return data.data() + i * shape.size(); }
    const T* sample(std::size_t i) const { return data.data() + i * shape.size(); }
};

template <typename T>
struct ParamView {
    std::span<T> value;
    std::span<T> grad;
};

template <typename T>
class Layer {
public:
    virtual ~Layer() = default;

    virtual LayerSpec spec() const = 0;
    virtual std::string name() const = 0;
    const Shape& input_shape() const { return input_; }
    const Shape& output_shape() const { return output_; }

    /// Trainable parameters plus non-trainable state (batchnorm running stats).
    virtual std::size_t param_count() const = 0;

    virtual void forward(const Tensor<T>& in, Tensor<T>& out, bool training) = 0;

    /// `grad_out` holds dL/d(out) and may be overwritten. When
    /// `pre_activation` is set it already holds dL/d(pre-activation).
    /// Parameter gradients are overwritten, not accumulated. `grad_in` may be
    /// null when the input gradient is not needed.
    virtual void backward(const Tensor<T>& in, const Tensor<T>& out, Tensor<T>& grad_out, Tensor<T>* grad_in,
                          bool pre_activation = false) = 0;

    virtual std::vector<ParamView<T>> params() { return {}; }
    /// Every persistent buffer, trainable first.
    virtual std::vector<std::span<T>> state() { return {}; }

protected:
    Shape input_, output_;
};

/// Builds one layer with seeded initialization (He-uniform, Glorot-uniform for
/// a sigmoid output).
template <typename T>
std::unique_ptr<Layer<T>> make_layer(const LayerSpec& spec, Shape input, std::uint64_t seed);

struct LayerSummary {
    std::string name;
    Shape output;
    std::size_t params = 0;
};

/// Clamped binary cross-entropy, mean over the batch.
double bce_loss(std::span<const double> predictions, std::span<const std::uint8_t> labels);

inline constexpr double kBceClamp = 1e-7;

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-7;
};

template <typename T>
class Network;

template <typename T>
class Adam {
public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}
    void step(Network<T>& net);

private:
    AdamConfig cfg_;
    std::size_t t_ = 0;
    std::vector<std::vector<T>> m_, v_;
};

template <typename T>
class Network {
public:
    Network(Shape input, const std::vector<LayerSpec>& specs, std::uint64_t seed);

    Network(Network&&) noexcept = default;
    Network& operator=(Network&&) noexcept = default;

    const Shape& input_shape() const { return input_; }
    std::size_t size() const { return layers_.size(); }
    Layer<T>& layer(std::size_t i) { return *layers_[i]; }
    const std::vector<LayerSpec>& specs() const { return specs_; }

    std::vector<LayerSummary> summary() const;
    std::size_t param_count() const;

    /// Output probabilities, one per sample.
    std::vector<double> forward(const Tensor<T>& x, bool training);
    std::vector<double> predict(const Tensor<T>& x) { return forward(x, false); }

    /// Forward in training mode, fused sigmoid/BCE backward. Fills parameter
    /// gradients and returns the loss.
    double compute_gradients(const Tensor<T>& x, std::span<const std::uint8_t> labels);

    std::vector<ParamView<T>> params();

    std::vector<std::vector<T>> snapshot();
    void restore(const std::vector<std::vector<T>>& snap);

    /// dL/d(input) from the last compute_gradients call.
    const Tensor<T>& input_gradient() const { return grad_input_; }

private:
    Shape input_;
    std::vector<LayerSpec> specs_;
    std::vector<std::unique_ptr<Layer<T>>> layers_;
    std::vector<Tensor<T>> acts_;
    Tensor<T> grad_a_, grad_b_, grad_input_;
    const Tensor<T>* last_input_ = nullptr;
};

/// Float network used for training and inference.
using CnnModel = Network<float>;

/// Packs spectrograms [first, first+count) of `samples` (through `order`)
/// into an NHWC batch with one channel.
template <typename T>
Tensor<T> make_batch(std::span<const Spectrogram> samples, std::span<const std::size_t> order, std::size_t first,
                     std::size_t count);

enum class EarlyStopRule : std::uint8_t {
    /// Counter grows every epoch that does not improve on the best loss so far.
    NoImprovement = 0,
    /// Counter grows on each epoch-over-epoch increase and resets otherwise.
    ConsecutiveIncreases = 1,
};

class EarlyStopping {
public:
    explicit EarlyStopping(std::size_t patience = 3, EarlyStopRule rule = EarlyStopRule::NoImprovement);

    /// Feeds one epoch's validation loss; true when training should stop.
    bool update(double val_loss);
    /// 1-based epoch with the lowest loss seen.
    std::size_t best_epoch() const { return best_epoch_; }
    double best_loss() const { return best_; }
    bool last_was_best() const { return best_epoch_ == epoch_; }

private:
    std::size_t patience_;
    EarlyStopRule rule_;
    std::size_t epoch_ = 0, best_epoch_ = 0, counter_ = 0;
    double best_, prev_;
};

struct TrainConfig {
    std::size_t batch_size = 32;
    AdamConfig adam;
    std::size_t patience = 3;
    EarlyStopRule rule = EarlyStopRule::NoImprovement;
    std::size_t max_epochs = 50;
    std::uint64_t seed = 7;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
};

struct TrainResult {
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
    bool stopped_early = false;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Minibatch Adam on shuffled training data, validation loss after each
/// epoch, early stopping, best-epoch weights restored on return.
TrainResult train(CnnModel& model, std::span<const Spectrogram> train_set, std::span<const Spectrogram> val_set,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Mean BCE over a set in inference mode.
double evaluate_loss(CnnModel& model, std::span<const Spectrogram> samples, std::size_t batch_size = 32);

/// Inference-mode probabilities for every sample.
std::vector<double> predict_all(CnnModel& model, std::span<const Spectrogram> samples, std::size_t batch_size = 32);

/// Probability for one spectrogram.
double predict_one(CnnModel& model, const Spectrogram& s);

enum class Detection : std::uint8_t { NoJamming = 0, Jamming = 1 };

/// Jamming iff score >= tau. Throws for tau outside [0, 1].
Detection classify(double score, double tau);

CnnModel make_detector(std::uint64_t seed);

// SSBCNN01: "SSBCNN01", u32 h, u32 w, u32 c, u32 L, L x {u8 kind, u32 units,
// u32 kernel, u32 stride, u8 activation}, then per layer u32 buffer count and
// per buffer u32 length + float32 values.
void write_cnn(std::ostream& os, CnnModel& model);
CnnModel read_cnn(std::istream& is);

void write_history_csv(std::ostream& os, const TrainResult& result);

}  // namespace jamdet::cnn
