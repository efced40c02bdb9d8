#include "jamdet/cnn.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>

#include <Eigen/Dense>

#include "jamdet/common.hpp"

namespace jamdet::cnn {

std::string Shape::str() const {
    return std::to_string(h) + "x" + std::to_string(w) + "x" + std::to_string(c);
}

std::vector<LayerSpec> detector_architecture() {
    return {
        LayerSpec::conv(32, 3, 2), LayerSpec::batch_norm(), LayerSpec::avg_pool(),
        LayerSpec::conv(64, 3, 1), LayerSpec::batch_norm(), LayerSpec::avg_pool(),
        LayerSpec::conv(128, 3, 1), LayerSpec::avg_pool(), LayerSpec::batch_norm(),
        LayerSpec::flatten(),
        LayerSpec::dense(64), LayerSpec::dense(32), LayerSpec::dense(16),
        LayerSpec::dense(1, Activation::Sigmoid),
    };
}

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;
template <typename T>
using VecMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>;

template <typename T>
void activate(std::span<T> v, Activation act) {
    switch (act) {
        case Activation::None: break;
        case Activation::Relu:
            for (auto& x : v) x = x < T(0) ? T(0) : x;  // NaN passes through
            break;
        case Activation::Sigmoid:
            for (auto& x : v) x = T(1) / (T(1) + std::exp(-x));
            break;
    }
}

// grad *= act'(pre) expressed through the activation output.
template <typename T>
void activation_backward(std::span<T> grad, std::span<const T> out, Activation act) {
    switch (act) {
        case Activation::None: break;
        case Activation::Relu:
            for (std::size_t i = 0; i < grad.size(); ++i)
                if (!(out[i] > T(0))) grad[i] = T(0);
            break;
        case Activation::Sigmoid:
            for (std::size_t i = 0; i < grad.size(); ++i) grad[i] *= out[i] * (T(1) - out[i]);
            break;
    }
}

template <typename T>
void fill_uniform(std::vector<T>& v, double limit, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-limit, limit);
    for (auto& x : v) x = static_cast<T>(u(rng));
}

template <typename T>
class Conv2D final : public Layer<T> {
public:
    Conv2D(const LayerSpec& spec, Shape in, std::uint64_t seed) : spec_(spec) {
        if (spec.kernel == 0 || spec.stride == 0 || spec.units == 0) throw Error("conv2d: bad spec");
        if (in.h < spec.kernel || in.w < spec.kernel) throw Error("conv2d: input smaller than kernel " + in.str());
        this->input_ = in;
        this->output_ = {(in.h - spec.kernel) / spec.stride + 1, (in.w - spec.kernel) / spec.stride + 1, spec.units};
        patch_ = spec.kernel * spec.kernel * in.c;
        w_.resize(patch_ * spec.units);
        b_.assign(spec.units, T(0));
        dw_.assign(w_.size(), T(0));
        db_.assign(b_.size(), T(0));
        double fan_in = static_cast<double>(patch_);
        double limit = spec.activation == Activation::Sigmoid
                           ? std::sqrt(6.0 / (fan_in + static_cast<double>(spec.units * spec.kernel * spec.kernel)))
                           : std::sqrt(6.0 / fan_in);
        fill_uniform(w_, limit, seed);
    }

    LayerSpec spec() const override { return spec_; }
    std::string name() const override { return "conv2d"; }
    std::size_t param_count() const override { return w_.size() + b_.size(); }

    void forward(const Tensor<T>& in, Tensor<T>& out, bool) override {
        const auto& o = this->output_;
        out.resize(in.n, o);
        const std::size_t rows = o.h * o.w;
        cols_.resize(rows * patch_);
        ConstMatMap<T> W(w_.data(), patch_, o.c);
        VecMap<T> b(b_.data(), o.c);
        for (std::size_t i = 0; i < in.n; ++i) {
            im2col(in.sample(i));
            MatMap<T> y(out.sample(i), rows, o.c);
            y.noalias() = ConstMatMap<T>(cols_.data(), rows, patch_) * W;
            y.rowwise() += b.transpose();
            activate(std::span<T>(out.sample(i), rows * o.c), spec_.activation);
        }
    }

    void backward(const Tensor<T>& in, const Tensor<T>& out, Tensor<T>& grad_out, Tensor<T>* grad_in,
                  bool pre_activation) override {
        const auto& o = this->output_;
        const std::size_t rows = o.h * o.w;
        std::fill(dw_.begin(), dw_.end(), T(0));
        std::fill(db_.begin(), db_.end(), T(0));
        MatMap<T> dW(dw_.data(), patch_, o.c);
        VecMap<T> db(db_.data(), o.c);
        ConstMatMap<T> W(w_.data(), patch_, o.c);
        if (grad_in) grad_in->resize(in.n, this->input_);
        cols_.resize(rows * patch_);
        for (std::size_t i = 0; i < in.n; ++i) {
            std::span<T> g(grad_out.sample(i), rows * o.c);
            if (!pre_activation) activation_backward<T>(g, {out.sample(i), rows * o.c}, spec_.activation);
            MatMap<T> G(g.data(), rows, o.c);
            im2col(in.sample(i));
            ConstMatMap<T> cols(cols_.data(), rows, patch_);
            dW.noalias() += cols.transpose() * G;
            db += G.colwise().sum().transpose();
            if (grad_in) {
                dcols_.resize(rows * patch_);
                MatMap<T>(dcols_.data(), rows, patch_).noalias() = G * W.transpose();
                col2im(grad_in->sample(i));
            }
        }
    }

    std::vector<ParamView<T>> params() override { return {{w_, dw_}, {b_, db_}}; }
    std::vector<std::span<T>> state() override { return {w_, b_}; }

private:
    void im2col(const T* src) {
        const auto& in = this->input_;
        const auto& o = this->output_;
        const std::size_t k = spec_.kernel, s = spec_.stride, c = in.c;
        T* dst = cols_.data();
        for (std::size_t oy = 0; oy < o.h; ++oy)
            for (std::size_t ox = 0; ox < o.w; ++ox)
                for (std::size_t ky = 0; ky < k; ++ky) {
                    const T* row = src + ((oy * s + ky) * in.w + ox * s) * c;
                    dst = std::copy(row, row + k * c, dst);
                }
    }

    void col2im(T* dst) {
        const auto& in = this->input_;
        const auto& o = this->output_;
        const std::size_t k = spec_.kernel, s = spec_.stride, c = in.c;
        std::fill(dst, dst + in.size(), T(0));
        const T* src = dcols_.data();
        for (std::size_t oy = 0; oy < o.h; ++oy)
            for (std::size_t ox = 0; ox < o.w; ++ox)
                for (std::size_t ky = 0; ky < k; ++ky) {
                    T* row = dst + ((oy * s + ky) * in.w + ox * s) * c;
                    for (std::size_t j = 0; j < k * c; ++j) row[j] += *src++;
                }
    }

    LayerSpec spec_;
    std::size_t patch_ = 0;
    std::vector<T> w_, b_, dw_, db_, cols_, dcols_;
};

template <typename T>
class BatchNorm final : public Layer<T> {
public:
    static constexpr double kMomentum = 0.9;
    static constexpr double kEps = 1e-5;

    explicit BatchNorm(Shape in) {
        this->input_ = in;
        this->output_ = in;
        const std::size_t c = in.c;
        gamma_.assign(c, T(1));
        beta_.assign(c, T(0));
        mean_.assign(c, T(0));
        var_.assign(c, T(1));
        dgamma_.assign(c, T(0));
        dbeta_.assign(c, T(0));
    }

    LayerSpec spec() const override { return LayerSpec::batch_norm(); }
    std::string name() const override { return "batch_norm"; }
    std::size_t param_count() const override { return 4 * gamma_.size(); }

    void forward(const Tensor<T>& in, Tensor<T>& out, bool training) override {
        const std::size_t c = this->input_.c;
        const std::size_t positions = in.data.size() / c;
        out.resize(in.n, this->output_);
        inv_std_.resize(c);
        trained_ = training;
        if (training) {
            std::vector<double> sum(c, 0.0), sq(c, 0.0);
            for (std::size_t p = 0; p < positions; ++p)
                for (std::size_t j = 0; j < c; ++j) sum[j] += in.data[p * c + j];
            std::vector<double> mu(c);
            for (std::size_t j = 0; j < c; ++j) mu[j] = sum[j] / static_cast<double>(positions);
            for (std::size_t p = 0; p < positions; ++p)
                for (std::size_t j = 0; j < c; ++j) {
                    double d = in.data[p * c + j] - mu[j];
                    sq[j] += d * d;
                }
            xhat_.resize(in.data.size());
            std::vector<T> mu_t(c);
            for (std::size_t j = 0; j < c; ++j) {
                double var = sq[j] / static_cast<double>(positions);
                inv_std_[j] = static_cast<T>(1.0 / std::sqrt(var + kEps));
                mu_t[j] = static_cast<T>(mu[j]);
                mean_[j] = static_cast<T>(kMomentum * mean_[j] + (1.0 - kMomentum) * mu[j]);
                var_[j] = static_cast<T>(kMomentum * var_[j] + (1.0 - kMomentum) * var);
            }
            for (std::size_t p = 0; p < positions; ++p)
                for (std::size_t j = 0; j < c; ++j) {
                    const std::size_t idx = p * c + j;
                    xhat_[idx] = (in.data[idx] - mu_t[j]) * inv_std_[j];
                    out.data[idx] = gamma_[j] * xhat_[idx] + beta_[j];
                }
        } else {
            for (std::size_t j = 0; j < c; ++j) inv_std_[j] = static_cast<T>(1.0 / std::sqrt(double(var_[j]) + kEps));
            for (std::size_t p = 0; p < positions; ++p)
                for (std::size_t j = 0; j < c; ++j) {
                    const std::size_t idx = p * c + j;
                    out.data[idx] = gamma_[j] * (in.data[idx] - mean_[j]) * inv_std_[j] + beta_[j];
                }
        }
    }

    void backward(const Tensor<T>& in, const Tensor<T>&, Tensor<T>& grad_out, Tensor<T>* grad_in, bool) override {
        const std::size_t c = this->input_.c;
        const std::size_t positions = in.data.size() / c;
        std::vector<double> sum_g(c, 0.0), sum_gx(c, 0.0);
        for (std::size_t p = 0; p < positions; ++p)
            for (std::size_t j = 0; j < c; ++j) {
                const std::size_t idx = p * c + j;
                const double xh = trained_ ? double(xhat_[idx]) : (double(in.data[idx]) - mean_[j]) * inv_std_[j];
                sum_g[j] += grad_out.data[idx];
                sum_gx[j] += grad_out.data[idx] * xh;
            }
        for (std::size_t j = 0; j < c; ++j) {
            dgamma_[j] = static_cast<T>(sum_gx[j]);
            dbeta_[j] = static_cast<T>(sum_g[j]);
        }
        if (!grad_in) return;
        grad_in->resize(in.n, this->input_);
        const double m = static_cast<double>(positions);
        for (std::size_t p = 0; p < positions; ++p)
            for (std::size_t j = 0; j < c; ++j) {
                const std::size_t idx = p * c + j;
                const double g = grad_out.data[idx];
                if (trained_) {
                    const double xh = xhat_[idx];
                    grad_in->data[idx] = static_cast<T>(gamma_[j] * inv_std_[j] / m * (m * g - sum_g[j] - xh * sum_gx[j]));
                } else {
                    grad_in->data[idx] = static_cast<T>(g * gamma_[j] * inv_std_[j]);
                }
            }
    }

    std::vector<ParamView<T>> params() override { return {{gamma_, dgamma_}, {beta_, dbeta_}}; }
    std::vector<std::span<T>> state() override { return {gamma_, beta_, mean_, var_}; }

private:
    std::vector<T> gamma_, beta_, mean_, var_, dgamma_, dbeta_, xhat_, inv_std_;
    bool trained_ = false;
};

template <typename T>
class AvgPool final : public Layer<T> {
public:
    explicit AvgPool(Shape in) {
        if (in.h < 2 || in.w < 2) throw Error("avg_pool: input smaller than 2x2 " + in.str());
        this->input_ = in;
        this->output_ = {in.h / 2, in.w / 2, in.c};
    }

    LayerSpec spec() const override { return LayerSpec::avg_pool(); }
    std::string name() const override { return "average_pooling"; }
    std::size_t param_count() const override { return 0; }

    void forward(const Tensor<T>& in, Tensor<T>& out, bool) override {
        const auto& is = this->input_;
        const auto& o = this->output_;
        out.resize(in.n, o);
        for (std::size_t i = 0; i < in.n; ++i) {
            const T* src = in.sample(i);
            T* dst = out.sample(i);
            for (std::size_t y = 0; y < o.h; ++y)
                for (std::size_t x = 0; x < o.w; ++x) {
                    const T* a = src + ((2 * y) * is.w + 2 * x) * is.c;
                    const T* b = a + is.w * is.c;
                    T* d = dst + (y * o.w + x) * o.c;
                    for (std::size_t c = 0; c < o.c; ++c) d[c] = T(0.25) * (a[c] + a[c + is.c] + b[c] + b[c + is.c]);
                }
        }
    }

    void backward(const Tensor<T>& in, const Tensor<T>&, Tensor<T>& grad_out, Tensor<T>* grad_in, bool) override {
        if (!grad_in) return;
        const auto& is = this->input_;
        const auto& o = this->output_;
        grad_in->resize(in.n, is);
        std::fill(grad_in->data.begin(), grad_in->data.end(), T(0));
        for (std::size_t i = 0; i < in.n; ++i) {
            const T* g = grad_out.sample(i);
            T* dst = grad_in->sample(i);
            for (std::size_t y = 0; y < o.h; ++y)
                for (std::size_t x = 0; x < o.w; ++x) {
                    T* a = dst + ((2 * y) * is.w + 2 * x) * is.c;
                    T* b = a + is.w * is.c;
                    const T* gg = g + (y * o.w + x) * o.c;
                    for (std::size_t c = 0; c < o.c; ++c) {
                        const T v = T(0.25) * gg[c];
                        a[c] = v;
                        a[c + is.c] = v;
                        b[c] = v;
                        b[c + is.c] = v;
                    }
                }
        }
    }
};

template <typename T>
class Flatten final : public Layer<T> {
public:
    explicit Flatten(Shape in) {
        this->input_ = in;
        this->output_ = {1, 1, in.size()};
    }

    LayerSpec spec() const override { return LayerSpec::flatten(); }
    std::string name() const override { return "flatten"; }
    std::size_t param_count() const override { return 0; }

    void forward(const Tensor<T>& in, Tensor<T>& out, bool) override {
        out.resize(in.n, this->output_);
        std::copy(in.data.begin(), in.data.end(), out.data.begin());
    }

    void backward(const Tensor<T>& in, const Tensor<T>&, Tensor<T>& grad_out, Tensor<T>* grad_in, bool) override {
        if (!grad_in) return;
        grad_in->resize(in.n, this->input_);
        std::copy(grad_out.data.begin(), grad_out.data.end(), grad_in->data.begin());
    }
};

template <typename T>
class Dense final : public Layer<T> {
public:
    Dense(const LayerSpec& spec, Shape in, std::uint64_t seed) : spec_(spec) {
        if (in.h != 1 || in.w != 1) throw Error("dense: input must be flat, got " + in.str());
        if (spec.units == 0) throw Error("dense: zero units");
        this->input_ = in;
        this->output_ = {1, 1, spec.units};
        w_.resize(in.c * spec.units);
        b_.assign(spec.units, T(0));
        dw_.assign(w_.size(), T(0));
        db_.assign(b_.size(), T(0));
        double fan_in = static_cast<double>(in.c), fan_out = static_cast<double>(spec.units);
        double limit = spec.activation == Activation::Sigmoid ? std::sqrt(6.0 / (fan_in + fan_out)) : std::sqrt(6.0 / fan_in);
        fill_uniform(w_, limit, seed);
    }

    LayerSpec spec() const override { return spec_; }
    std::string name() const override { return "dense"; }
    std::size_t param_count() const override { return w_.size() + b_.size(); }

    void forward(const Tensor<T>& in, Tensor<T>& out, bool) override {
        const std::size_t f = this->input_.c, u = spec_.units;
        out.resize(in.n, this->output_);
        MatMap<T> y(out.data.data(), in.n, u);
        y.noalias() = ConstMatMap<T>(in.data.data(), in.n, f) * ConstMatMap<T>(w_.data(), f, u);
        y.rowwise() += VecMap<T>(b_.data(), u).transpose();
        activate<T>(out.data, spec_.activation);
    }

    void backward(const Tensor<T>& in, const Tensor<T>& out, Tensor<T>& grad_out, Tensor<T>* grad_in,
                  bool pre_activation) override {
        const std::size_t f = this->input_.c, u = spec_.units;
        if (!pre_activation) activation_backward<T>(grad_out.data, out.data, spec_.activation);
        ConstMatMap<T> G(grad_out.data.data(), in.n, u);
        MatMap<T>(dw_.data(), f, u).noalias() = ConstMatMap<T>(in.data.data(), in.n, f).transpose() * G;
        VecMap<T>(db_.data(), u) = G.colwise().sum().transpose();
        if (grad_in) {
            grad_in->resize(in.n, this->input_);
            MatMap<T>(grad_in->data.data(), in.n, f).noalias() = G * ConstMatMap<T>(w_.data(), f, u).transpose();
        }
    }

    std::vector<ParamView<T>> params() override { return {{w_, dw_}, {b_, db_}}; }
    std::vector<std::span<T>> state() override { return {w_, b_}; }

private:
    LayerSpec spec_;
    std::vector<T> w_, b_, dw_, db_;
};

}  // namespace

template <typename T>
std::unique_ptr<Layer<T>> make_layer(const LayerSpec& spec, Shape input, std::uint64_t seed) {
    switch (spec.kind) {
        case LayerKind::Conv2D: return std::make_unique<Conv2D<T>>(spec, input, seed);
        case LayerKind::BatchNorm: return std::make_unique<BatchNorm<T>>(input);
        case LayerKind::AvgPool: return std::make_unique<AvgPool<T>>(input);
        case LayerKind::Flatten: return std::make_unique<Flatten<T>>(input);
        case LayerKind::Dense: return std::make_unique<Dense<T>>(spec, input, seed);
    }
    throw Error("unknown layer kind");
}

double bce_loss(std::span<const double> predictions, std::span<const std::uint8_t> labels) {
    if (predictions.size() != labels.size()) throw Error("bce_loss: size mismatch");
    if (predictions.empty()) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const double p = std::clamp(predictions[i], kBceClamp, 1.0 - kBceClamp);
        acc += labels[i] ? std::log(p) : std::log(1.0 - p);
    }
    return -acc / static_cast<double>(predictions.size());
}

template <typename T>
void Adam<T>::step(Network<T>& net) {
    auto ps = net.params();
    if (m_.empty()) {
        for (auto& p : ps) {
            m_.emplace_back(p.value.size(), T(0));
            v_.emplace_back(p.value.size(), T(0));
        }
    }
    if (m_.size() != ps.size()) throw Error("Adam: parameter layout changed");
    ++t_;
    const double b1 = cfg_.beta1, b2 = cfg_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    const T lr = static_cast<T>(cfg_.learning_rate);
    for (std::size_t k = 0; k < ps.size(); ++k) {
        auto& m = m_[k];
        auto& v = v_[k];
        auto val = ps[k].value;
        auto g = ps[k].grad;
        for (std::size_t i = 0; i < val.size(); ++i) {
            m[i] = static_cast<T>(b1 * m[i] + (1.0 - b1) * g[i]);
            v[i] = static_cast<T>(b2 * v[i] + (1.0 - b2) * g[i] * g[i]);
            const double mh = m[i] / c1, vh = v[i] / c2;
            val[i] -= lr * static_cast<T>(mh / (std::sqrt(vh) + cfg_.epsilon));
        }
    }
}

template <typename T>
Network<T>::Network(Shape input, const std::vector<LayerSpec>& specs, std::uint64_t seed)
    : input_(input), specs_(specs) {
    if (specs.empty()) throw Error("network: no layers");
    const auto& last = specs.back();
    if (last.kind != LayerKind::Dense || last.units != 1 || last.activation != Activation::Sigmoid)
        throw Error("network: the last layer must be a single sigmoid neuron");
    Shape s = input;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        layers_.push_back(make_layer<T>(specs[i], s, derive_seed(seed, {i})));
        s = layers_.back()->output_shape();
    }
    acts_.resize(layers_.size());
}

template <typename T>
std::vector<LayerSummary> Network<T>::summary() const {
    std::vector<LayerSummary> out;
    out.push_back({"input", input_, 0});
    for (const auto& l : layers_) out.push_back({l->name(), l->output_shape(), l->param_count()});
    return out;
}

template <typename T>
std::size_t Network<T>::param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l->param_count();
    return n;
}

template <typename T>
std::vector<double> Network<T>::forward(const Tensor<T>& x, bool training) {
    if (x.shape != input_) throw Error("network: input shape " + x.shape.str() + " != " + input_.str());
    last_input_ = &x;
    const Tensor<T>* cur = &x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        layers_[l]->forward(*cur, acts_[l], training);
        cur = &acts_[l];
    }
    return {cur->data.begin(), cur->data.end()};
}

template <typename T>
double Network<T>::compute_gradients(const Tensor<T>& x, std::span<const std::uint8_t> labels) {
    if (labels.size() != x.n) throw Error("network: label count mismatch");
    auto probs = forward(x, true);
    const double loss = bce_loss(probs, labels);
    const double inv_n = 1.0 / static_cast<double>(x.n);
    grad_a_.resize(x.n, acts_.back().shape);
    for (std::size_t i = 0; i < x.n; ++i) grad_a_.data[i] = static_cast<T>((probs[i] - labels[i]) * inv_n);

    Tensor<T>* g = &grad_a_;
    Tensor<T>* next = &grad_b_;
    for (std::size_t l = layers_.size(); l-- > 0;) {
        const Tensor<T>& in = l == 0 ? x : acts_[l - 1];
        Tensor<T>* gin = l == 0 ? &grad_input_ : next;
        layers_[l]->backward(in, acts_[l], *g, gin, l + 1 == layers_.size());
        std::swap(g, next);
    }
    return loss;
}

template <typename T>
std::vector<ParamView<T>> Network<T>::params() {
    std::vector<ParamView<T>> out;
    for (auto& l : layers_)
        for (auto& p : l->params()) out.push_back(p);
    return out;
}

template <typename T>
std::vector<std::vector<T>> Network<T>::snapshot() {
    std::vector<std::vector<T>> snap;
    for (auto& l : layers_)
        for (auto s : l->state()) snap.emplace_back(s.begin(), s.end());
    return snap;
}

template <typename T>
void Network<T>::restore(const std::vector<std::vector<T>>& snap) {
    std::size_t k = 0;
    for (auto& l : layers_)
        for (auto s : l->state()) {
            if (k >= snap.size() || snap[k].size() != s.size()) throw Error("network: snapshot layout mismatch");
            std::copy(snap[k].begin(), snap[k].end(), s.begin());
            ++k;
        }
    if (k != snap.size()) throw Error("network: snapshot layout mismatch");
}

template <typename T>
Tensor<T> make_batch(std::span<const Spectrogram> samples, std::span<const std::size_t> order, std::size_t first,
                     std::size_t count) {
    if (count == 0) throw Error("make_batch: empty batch");
    const auto& s0 = samples[order[first]];
    Tensor<T> t(count, {s0.rows, s0.cols, 1});
    for (std::size_t i = 0; i < count; ++i) {
        const auto& s = samples[order[first + i]];
        if (s.rows != s0.rows || s.cols != s0.cols) throw Error("make_batch: mixed spectrogram shapes");
        std::copy(s.values.begin(), s.values.end(), t.sample(i));
    }
    return t;
}

EarlyStopping::EarlyStopping(std::size_t patience, EarlyStopRule rule)
    : patience_(patience),
      rule_(rule),
      best_(std::numeric_limits<double>::infinity()),
      prev_(std::numeric_limits<double>::infinity()) {
    if (patience == 0) throw Error("early stopping: patience must be >= 1");
}

bool EarlyStopping::update(double val_loss) {
    ++epoch_;
    const bool improved = val_loss < best_;
    if (improved) {
        best_ = val_loss;
        best_epoch_ = epoch_;
    }
    if (rule_ == EarlyStopRule::NoImprovement) {
        counter_ = improved ? 0 : counter_ + 1;
    } else {
        counter_ = val_loss > prev_ ? counter_ + 1 : 0;
    }
    prev_ = val_loss;
    return counter_ >= patience_;
}

namespace {

std::vector<std::size_t> iota_order(std::size_t n) {
    std::vector<std::size_t> v(n);
    std::iota(v.begin(), v.end(), 0);
    return v;
}

}  // namespace

std::vector<double> predict_all(CnnModel& model, std::span<const Spectrogram> samples, std::size_t batch_size) {
    auto order = iota_order(samples.size());
    std::vector<double> out;
    out.reserve(samples.size());
    for (std::size_t first = 0; first < samples.size(); first += batch_size) {
        const std::size_t count = std::min(batch_size, samples.size() - first);
        auto x = make_batch<float>(samples, order, first, count);
        auto p = model.predict(x);
        out.insert(out.end(), p.begin(), p.end());
    }
    return out;
}

double evaluate_loss(CnnModel& model, std::span<const Spectrogram> samples, std::size_t batch_size) {
    auto probs = predict_all(model, samples, batch_size);
    std::vector<std::uint8_t> y;
    y.reserve(samples.size());
    for (const auto& s : samples) y.push_back(s.binary());
    return bce_loss(probs, y);
}

double predict_one(CnnModel& model, const Spectrogram& s) {
    Tensor<float> x(1, {s.rows, s.cols, 1});
    std::copy(s.values.begin(), s.values.end(), x.data.begin());
    return model.predict(x).front();
}

TrainResult train(CnnModel& model, std::span<const Spectrogram> train_set, std::span<const Spectrogram> val_set,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
    if (train_set.empty() || val_set.empty()) throw Error("cnn train: empty training or validation split");
    if (config.batch_size == 0 || config.max_epochs == 0) throw Error("cnn train: batch size and max epochs must be >= 1");

    std::mt19937_64 rng(splitmix64(config.seed));
    auto order = iota_order(train_set.size());
    Adam<float> opt(config.adam);
    EarlyStopping stopper(config.patience, config.rule);
    TrainResult result;
    auto best = model.snapshot();

    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        for (std::size_t first = 0; first < order.size(); first += config.batch_size) {
            const std::size_t count = std::min(config.batch_size, order.size() - first);
            auto x = make_batch<float>(train_set, order, first, count);
            std::vector<std::uint8_t> y(count);
            for (std::size_t i = 0; i < count; ++i) y[i] = train_set[order[first + i]].binary();
            const double loss = model.compute_gradients(x, y);
            if (!std::isfinite(loss))
                throw Error("cnn train: non-finite loss at epoch " + std::to_string(epoch) + ", batch offset " +
                            std::to_string(first));
            opt.step(model);
            loss_sum += loss * static_cast<double>(count);
        }
        EpochRecord rec{epoch, loss_sum / static_cast<double>(order.size()), evaluate_loss(model, val_set)};
        const bool stop = stopper.update(rec.val_loss);
        if (stopper.last_was_best()) best = model.snapshot();
        result.history.push_back(rec);
        if (on_epoch) on_epoch(rec);
        if (stop) {
            result.stopped_early = true;
            break;
        }
    }
    model.restore(best);
    result.best_epoch = stopper.best_epoch();
    return result;
}

Detection classify(double score, double tau) {
    if (!(tau >= 0.0 && tau <= 1.0)) throw Error("classify: tau must lie in [0, 1]");
    return score >= tau ? Detection::Jamming : Detection::NoJamming;
}

CnnModel make_detector(std::uint64_t seed) { return CnnModel(kDetectorInput, detector_architecture(), seed); }

namespace {
constexpr std::string_view kCnnMagic = "SSBCNN01";
}

void write_cnn(std::ostream& os, CnnModel& model) {
    binio::write_magic(os, kCnnMagic);
    const auto& in = model.input_shape();
    binio::write_pod(os, static_cast<std::uint32_t>(in.h));
    binio::write_pod(os, static_cast<std::uint32_t>(in.w));
    binio::write_pod(os, static_cast<std::uint32_t>(in.c));
    binio::write_pod(os, static_cast<std::uint32_t>(model.size()));
    for (const auto& s : model.specs()) {
        binio::write_pod(os, static_cast<std::uint8_t>(s.kind));
        binio::write_pod(os, static_cast<std::uint32_t>(s.units));
        binio::write_pod(os, static_cast<std::uint32_t>(s.kernel));
        binio::write_pod(os, static_cast<std::uint32_t>(s.stride));
        binio::write_pod(os, static_cast<std::uint8_t>(s.activation));
    }
    for (std::size_t l = 0; l < model.size(); ++l) {
        auto st = model.layer(l).state();
        binio::write_pod(os, static_cast<std::uint32_t>(st.size()));
        for (auto buf : st) {
            binio::write_pod(os, static_cast<std::uint32_t>(buf.size()));
            binio::write_f32(os, buf);
        }
    }
    if (!os) throw Error("write_cnn: write failed");
}

CnnModel read_cnn(std::istream& is) {
    binio::expect_magic(is, kCnnMagic);
    Shape in;
    in.h = binio::read_pod<std::uint32_t>(is);
    in.w = binio::read_pod<std::uint32_t>(is);
    in.c = binio::read_pod<std::uint32_t>(is);
    auto n = binio::read_pod<std::uint32_t>(is);
    std::vector<LayerSpec> specs(n);
    for (auto& s : specs) {
        auto kind = binio::read_pod<std::uint8_t>(is);
        if (kind > 4) throw Error("SSBCNN01: unknown layer kind");
        s.kind = static_cast<LayerKind>(kind);
        s.units = binio::read_pod<std::uint32_t>(is);
        s.kernel = binio::read_pod<std::uint32_t>(is);
        s.stride = binio::read_pod<std::uint32_t>(is);
        auto act = binio::read_pod<std::uint8_t>(is);
        if (act > 2) throw Error("SSBCNN01: unknown activation");
        s.activation = static_cast<Activation>(act);
    }
    CnnModel model(in, specs, 0);
    for (std::size_t l = 0; l < model.size(); ++l) {
        auto st = model.layer(l).state();
        auto count = binio::read_pod<std::uint32_t>(is);
        if (count != st.size()) throw Error("SSBCNN01: buffer count mismatch");
        for (auto buf : st) {
            auto len = binio::read_pod<std::uint32_t>(is);
            if (len != buf.size()) throw Error("SSBCNN01: buffer size mismatch");
            binio::read_f32(is, buf);
        }
    }
    return model;
}

void write_history_csv(std::ostream& os, const TrainResult& result) {
    os << "epoch,train_loss,val_loss,best\n";
    os.precision(10);
    for (const auto& r : result.history)
        os << r.epoch << ',' << r.train_loss << ',' << r.val_loss << ',' << (r.epoch == result.best_epoch ? 1 : 0) << '\n';
}

template class Adam<float>;
template class Adam<double>;
template class Network<float>;
template class Network<double>;
template std::unique_ptr<Layer<float>> make_layer<float>(const LayerSpec&, Shape, std::uint64_t);
template std::unique_ptr<Layer<double>> make_layer<double>(const LayerSpec&, Shape, std::uint64_t);
template Tensor<float> make_batch<float>(std::span<const Spectrogram>, std::span<const std::size_t>, std::size_t,
                                         std::size_t);
template Tensor<double> make_batch<double>(std::span<const Spectrogram>, std::span<const std::size_t>, std::size_t,
                                           std::size_t);

}  // namespace jamdet::cnn
