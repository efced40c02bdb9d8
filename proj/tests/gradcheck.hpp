#pragma once

// Central finite-difference checks for the CNN, shared by the unit tests and
// the acceptance run.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "jamdet/cnn.hpp"

namespace gradcheck {

using jamdet::cnn::Layer;
using jamdet::cnn::LayerSpec;
using jamdet::cnn::Network;
using jamdet::cnn::Shape;
using jamdet::cnn::Tensor;

inline constexpr double kStep = 1e-4;
inline constexpr double kRelTol = 1e-3;
// Gradients below this magnitude are compared against it instead, so that
// truncation error of the difference quotient on near-zero entries does
// not dominate.
inline constexpr double kFloor = 1e-5;

struct Result {
    std::size_t checked = 0;
    double worst = 0.0;
    std::string where;

    bool ok() const { return checked > 0 && worst <= kRelTol; }
    void add(double analytic, double numeric, const std::string& tag) {
        ++checked;
        const double e = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), kFloor});
        if (e > worst) {
            worst = e;
            where = tag;
        }
    }
    void merge(const Result& r) {
        checked += r.checked;
        if (r.worst > worst) {
            worst = r.worst;
            where = r.where;
        }
    }
};

inline Tensor<double> random_tensor(std::size_t n, Shape s, std::uint64_t seed, double scale = 1.0) {
    Tensor<double> t(n, s);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, scale);
    for (auto& v : t.data) v = g(rng);
    return t;
}

// One layer in isolation: f(x, theta) = sum(r * layer(x)) for a fixed random r.
inline Result check_layer(Layer<double>& layer, Tensor<double>& x, std::uint64_t seed) {
    Tensor<double> out;
    layer.forward(x, out, true);
    const Tensor<double> r = random_tensor(x.n, layer.output_shape(), seed);
    auto f = [&] {
        Tensor<double> o;
        layer.forward(x, o, true);
        double s = 0.0;
        for (std::size_t i = 0; i < o.data.size(); ++i) s += r.data[i] * o.data[i];
        return s;
    };
    Tensor<double> g = r, gin;
    layer.backward(x, out, g, &gin);

    Result res;
    const std::string name = layer.name();
    auto params = layer.params();
    std::vector<std::vector<double>> analytic;
    for (auto& p : params) analytic.emplace_back(p.grad.begin(), p.grad.end());
    for (std::size_t k = 0; k < params.size(); ++k)
        for (std::size_t i = 0; i < params[k].value.size(); ++i) {
            double& v = params[k].value[i];
            const double keep = v;
            v = keep + kStep;
            const double up = f();
            v = keep - kStep;
            const double down = f();
            v = keep;
            res.add(analytic[k][i], (up - down) / (2 * kStep), name + " param " + std::to_string(k));
        }
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        const double keep = x.data[i];
        x.data[i] = keep + kStep;
        const double up = f();
        x.data[i] = keep - kStep;
        const double down = f();
        x.data[i] = keep;
        res.add(gin.data[i], (up - down) / (2 * kStep), name + " input");
    }
    return res;
}

// Whole network against the batch-mean cross-entropy, including the fused
// sigmoid output and the input gradient.
inline Result check_network(Network<double>& net, Tensor<double>& x, std::span<const std::uint8_t> labels) {
    net.compute_gradients(x, labels);
    auto params = net.params();
    std::vector<std::vector<double>> analytic;
    for (auto& p : params) analytic.emplace_back(p.grad.begin(), p.grad.end());
    const std::vector<double> gin = net.input_gradient().data;
    auto loss = [&] { return jamdet::cnn::bce_loss(net.forward(x, true), labels); };

    Result res;
    for (std::size_t k = 0; k < params.size(); ++k)
        for (std::size_t i = 0; i < params[k].value.size(); ++i) {
            double& v = params[k].value[i];
            const double keep = v;
            v = keep + kStep;
            const double up = loss();
            v = keep - kStep;
            const double down = loss();
            v = keep;
            res.add(analytic[k][i], (up - down) / (2 * kStep), "network param buffer " + std::to_string(k));
        }
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        const double keep = x.data[i];
        x.data[i] = keep + kStep;
        const double up = loss();
        x.data[i] = keep - kStep;
        const double down = loss();
        x.data[i] = keep;
        res.add(gin[i], (up - down) / (2 * kStep), "network input");
    }
    return res;
}

// Every layer type alone, then two small networks on a batch of four 6x8
// inputs (one with a stride-2 convolution).
inline Result check_all(std::uint64_t seed = 1) {
    using jamdet::cnn::Activation;
    using jamdet::cnn::make_layer;
    Result total;
    const Shape in{6, 8, 2};
    {
        auto l = make_layer<double>(LayerSpec::conv(3, 3, 1, Activation::Relu), in, seed);
        auto x = random_tensor(4, in, seed + 1);
        total.merge(check_layer(*l, x, seed + 2));
    }
    {
        auto l = make_layer<double>(LayerSpec::conv(2, 3, 2, Activation::None), in, seed);
        auto x = random_tensor(4, in, seed + 3);
        total.merge(check_layer(*l, x, seed + 4));
    }
    {
        auto l = make_layer<double>(LayerSpec::batch_norm(), in, seed);
        // Non-default scale and shift so their gradients are exercised away from 1 and 0.
        auto st = l->state();
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u(0.5, 1.5);
        for (auto& v : st[0]) v = u(rng);
        for (auto& v : st[1]) v = u(rng) - 1.0;
        auto x = random_tensor(4, in, seed + 5, 2.0);
        total.merge(check_layer(*l, x, seed + 6));
    }
    {
        auto l = make_layer<double>(LayerSpec::avg_pool(), in, seed);
        auto x = random_tensor(4, in, seed + 7);
        total.merge(check_layer(*l, x, seed + 8));
    }
    {
        auto l = make_layer<double>(LayerSpec::flatten(), in, seed);
        auto x = random_tensor(4, in, seed + 9);
        total.merge(check_layer(*l, x, seed + 10));
    }
    {
        const Shape flat{1, 1, 12};
        auto l = make_layer<double>(LayerSpec::dense(5, Activation::Relu), flat, seed);
        auto x = random_tensor(4, flat, seed + 11);
        total.merge(check_layer(*l, x, seed + 12));
    }
    const std::vector<std::uint8_t> labels{1, 0, 0, 1};
    {
        Network<double> net({6, 8, 1},
                            {LayerSpec::conv(3, 3, 1), LayerSpec::batch_norm(), LayerSpec::avg_pool(),
                             LayerSpec::flatten(), LayerSpec::dense(4), LayerSpec::dense(1, Activation::Sigmoid)},
                            seed);
        auto x = random_tensor(4, {6, 8, 1}, seed + 13);
        total.merge(check_network(net, x, labels));
    }
    {
        Network<double> net({6, 8, 1},
                            {LayerSpec::conv(4, 3, 2), LayerSpec::batch_norm(), LayerSpec::flatten(),
                             LayerSpec::dense(1, Activation::Sigmoid)},
                            seed + 1);
        auto x = random_tensor(4, {6, 8, 1}, seed + 14);
        total.merge(check_network(net, x, labels));
    }
    return total;
}

}  // namespace gradcheck
