#include "urllc/neural.hpp"

#include "urllc/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>

namespace urllc::neural {

namespace {

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }
double sigmoid(double z) { return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

Eigen::MatrixXd activate(const Eigen::MatrixXd& z, Activation a) {
    switch (a) {
        case Activation::sigmoid: return z.unaryExpr([](double v) { return sigmoid(v); });
        case Activation::relu: return z.cwiseMax(0.0);
        case Activation::tanh: return z.array().tanh().matrix();
        case Activation::identity: return z;
        case Activation::softplus: return z.unaryExpr([](double v) { return softplus(v); });
    }
    return z;
}

// Elementwise derivative given pre-activation z and output y.
Eigen::MatrixXd derivative(const Eigen::MatrixXd& z, const Eigen::MatrixXd& y, Activation a) {
    switch (a) {
        case Activation::sigmoid: return (y.array() * (1.0 - y.array())).matrix();
        case Activation::relu: return (z.array() > 0.0).cast<double>().matrix();
        case Activation::tanh: return (1.0 - y.array().square()).matrix();
        case Activation::identity: return Eigen::MatrixXd::Ones(z.rows(), z.cols());
        case Activation::softplus: return z.unaryExpr([](double v) { return sigmoid(v); });
    }
    return Eigen::MatrixXd::Ones(z.rows(), z.cols());
}

}  // namespace

std::string to_string(Activation a) {
    switch (a) {
        case Activation::sigmoid: return "sigmoid";
        case Activation::relu: return "relu";
        case Activation::tanh: return "tanh";
        case Activation::identity: return "identity";
        case Activation::softplus: return "softplus";
    }
    return "identity";
}

Activation activation_from_string(const std::string& name) {
    for (auto a : {Activation::sigmoid, Activation::relu, Activation::tanh, Activation::identity, Activation::softplus})
        if (to_string(a) == name) return a;
    throw std::invalid_argument("unknown activation '" + name + "'");
}

FnnModel::FnnModel(const std::vector<std::size_t>& sizes, const std::vector<Activation>& activations) {
    if (sizes.size() < 2) throw ShapeError("FnnModel: need at least input and output sizes");
    if (activations.size() != sizes.size() - 1) throw ShapeError("FnnModel: one activation per layer");
    for (std::size_t n = 1; n < sizes.size(); ++n) {
        if (sizes[n] == 0 || sizes[n - 1] == 0) throw ShapeError("FnnModel: layer sizes must be positive");
        layers_.push_back({Eigen::MatrixXd::Zero(sizes[n], sizes[n - 1]), Eigen::VectorXd::Zero(sizes[n]),
                           activations[n - 1]});
    }
}

FnnModel FnnModel::initialized(const std::vector<std::size_t>& sizes, const std::vector<Activation>& activations,
                               std::uint64_t seed, double scale) {
    FnnModel m(sizes, activations);
    CounterRng rng(seed, 0x4e4e);
    for (auto& l : m.layers_) {
        const double limit = scale * std::sqrt(3.0 / double(l.weights.cols()));
        for (Eigen::Index i = 0; i < l.weights.rows(); ++i)
            for (Eigen::Index j = 0; j < l.weights.cols(); ++j) l.weights(i, j) = limit * (2.0 * rng.uniform() - 1.0);
    }
    return m;
}

std::size_t FnnModel::input_size() const { return layers_.empty() ? 0 : std::size_t(layers_.front().weights.cols()); }
std::size_t FnnModel::output_size() const { return layers_.empty() ? 0 : std::size_t(layers_.back().weights.rows()); }

std::vector<std::size_t> FnnModel::layer_sizes() const {
    std::vector<std::size_t> s;
    if (layers_.empty()) return s;
    s.push_back(input_size());
    for (const auto& l : layers_) s.push_back(std::size_t(l.weights.rows()));
    return s;
}

std::size_t FnnModel::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += std::size_t(l.weights.size() + l.bias.size());
    return n;
}

void FnnModel::freeze_prefix(std::size_t k) {
    if (k > layers_.size()) throw std::out_of_range("freeze_prefix: k exceeds the layer count");
    frozen_ = k;
}

void FnnModel::check_shapes() const {
    for (std::size_t n = 0; n < layers_.size(); ++n) {
        const auto& l = layers_[n];
        if (l.bias.size() != l.weights.rows()) throw ShapeError("FnnModel: bias size does not match layer " + std::to_string(n));
        if (n > 0 && l.weights.cols() != layers_[n - 1].weights.rows())
            throw ShapeError("FnnModel: layer " + std::to_string(n) + " does not chain");
    }
    if (frozen_ > layers_.size()) throw ShapeError("FnnModel: frozen prefix exceeds layer count");
}

Eigen::VectorXd FnnModel::forward(const Eigen::VectorXd& x) const {
    if (std::size_t(x.size()) != input_size()) throw ShapeError("forward: input has the wrong length");
    Eigen::VectorXd a = x;
    for (const auto& l : layers_) a = activate(l.weights * a + l.bias, l.activation);
    return a;
}

Eigen::MatrixXd FnnModel::forward_batch(const Eigen::MatrixXd& x) const {
    if (std::size_t(x.rows()) != input_size()) throw ShapeError("forward_batch: input has the wrong row count");
    Eigen::MatrixXd a = x;
    for (const auto& l : layers_) a = activate((l.weights * a).colwise() + l.bias, l.activation);
    return a;
}

ForwardCache forward_cached(const FnnModel& model, const Eigen::MatrixXd& x) {
    if (std::size_t(x.rows()) != model.input_size()) throw ShapeError("forward_cached: input has the wrong row count");
    ForwardCache c;
    c.outputs.reserve(model.layer_count() + 1);
    c.pre.reserve(model.layer_count());
    c.outputs.push_back(x);
    for (const auto& l : model.layers()) {
        c.pre.push_back((l.weights * c.outputs.back()).colwise() + l.bias);
        c.outputs.push_back(activate(c.pre.back(), l.activation));
    }
    return c;
}

Gradients Gradients::zeros_like(const FnnModel& model) {
    Gradients g;
    for (std::size_t n = 0; n < model.layer_count(); ++n) {
        const auto& l = model.layer(n);
        if (n < model.frozen_prefix()) {
            g.weights.emplace_back();
            g.bias.emplace_back();
        } else {
            g.weights.push_back(Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()));
            g.bias.push_back(Eigen::VectorXd::Zero(l.bias.size()));
        }
    }
    return g;
}

void Gradients::add_scaled(const Gradients& other, double s) {
    for (std::size_t n = 0; n < weights.size(); ++n) {
        if (weights[n].size() == 0) continue;
        weights[n] += s * other.weights[n];
        bias[n] += s * other.bias[n];
    }
}

void Gradients::scale(double s) {
    for (auto& w : weights) w *= s;
    for (auto& b : bias) b *= s;
}

double Gradients::squared_norm() const {
    double acc = 0.0;
    for (const auto& w : weights) acc += w.squaredNorm();
    for (const auto& b : bias) acc += b.squaredNorm();
    return acc;
}

bool Gradients::finite() const {
    for (const auto& w : weights)
        if (!w.allFinite()) return false;
    for (const auto& b : bias)
        if (!b.allFinite()) return false;
    return input.allFinite();
}

Gradients backward(const FnnModel& model, const ForwardCache& cache, const Eigen::MatrixXd& upstream,
                   const Eigen::MatrixXd& output_pre_gradient) {
    const std::size_t layers = model.layer_count();
    if (cache.pre.size() != layers) throw ShapeError("backward: cache does not match the model");
    if (std::size_t(upstream.rows()) != model.output_size() || upstream.cols() != cache.outputs.back().cols())
        throw ShapeError("backward: upstream gradient has the wrong shape");
    if (output_pre_gradient.size() != 0 &&
        (output_pre_gradient.rows() != upstream.rows() || output_pre_gradient.cols() != upstream.cols()))
        throw ShapeError("backward: pre-activation gradient has the wrong shape");

    Gradients g;
    g.weights.resize(layers);
    g.bias.resize(layers);
    Eigen::MatrixXd delta = upstream;
    for (std::size_t n = layers; n-- > 0;) {
        const auto& l = model.layer(n);
        delta = delta.cwiseProduct(derivative(cache.pre[n], cache.outputs[n + 1], l.activation));
        if (n + 1 == layers && output_pre_gradient.size() != 0) delta += output_pre_gradient;
        if (n >= model.frozen_prefix()) {
            g.weights[n] = delta * cache.outputs[n].transpose();
            g.bias[n] = delta.rowwise().sum();
        }
        delta = l.weights.transpose() * delta;
    }
    g.input = std::move(delta);
    return g;
}

Gradients backward(const FnnModel& model, const ForwardCache& cache, const Eigen::MatrixXd& upstream) {
    return backward(model, cache, upstream, Eigen::MatrixXd());
}

Gradients backward(const FnnModel& model, const Eigen::VectorXd& x, const Eigen::VectorXd& upstream) {
    return backward(model, forward_cached(model, x), upstream);
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("TrainConfig: learning rate must be positive");
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch size must be at least 1");
    if (!(final_lr_fraction > 0.0 && final_lr_fraction <= 1.0))
        throw std::invalid_argument("TrainConfig: final learning-rate fraction must lie in (0, 1]");
}

double TrainConfig::learning_rate_at(std::size_t epoch) const {
    if (final_lr_fraction == 1.0 || epochs <= 1) return learning_rate;
    const double t = std::min(1.0, double(epoch) / double(epochs - 1));
    return learning_rate * (final_lr_fraction + (1.0 - final_lr_fraction) * 0.5 * (1.0 + std::cos(std::numbers::pi * t)));
}

void sgd_step(FnnModel& model, const Gradients& grads, double learning_rate) {
    if (grads.weights.size() != model.layer_count()) throw ShapeError("sgd_step: gradient count does not match");
    for (std::size_t n = model.frozen_prefix(); n < model.layer_count(); ++n) {
        auto& l = model.layer(n);
        if (grads.weights[n].rows() != l.weights.rows() || grads.weights[n].cols() != l.weights.cols())
            throw ShapeError("sgd_step: gradient shape mismatch at layer " + std::to_string(n));
        l.weights -= learning_rate * grads.weights[n];
        l.bias -= learning_rate * grads.bias[n];
    }
}

Optimizer::Optimizer(const FnnModel& model, const TrainConfig& cfg)
    : cfg_(cfg), first_(Gradients::zeros_like(model)), second_(Gradients::zeros_like(model)) {
    cfg_.validate();
}

void Optimizer::step(FnnModel& model, const Gradients& grads) {
    if (cfg_.optimizer == OptimizerKind::sgd) {
        sgd_step(model, grads, cfg_.learning_rate);
        return;
    }
    ++t_;
    for (std::size_t n = model.frozen_prefix(); n < model.layer_count(); ++n) {
        auto& l = model.layer(n);
        if (first_.weights[n].size() == 0) {
            first_.weights[n] = Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols());
            first_.bias[n] = Eigen::VectorXd::Zero(l.bias.size());
            second_.weights[n] = first_.weights[n];
            second_.bias[n] = first_.bias[n];
        }
        if (cfg_.optimizer == OptimizerKind::momentum) {
            first_.weights[n] = cfg_.momentum * first_.weights[n] + grads.weights[n];
            first_.bias[n] = cfg_.momentum * first_.bias[n] + grads.bias[n];
            l.weights -= cfg_.learning_rate * first_.weights[n];
            l.bias -= cfg_.learning_rate * first_.bias[n];
            continue;
        }
        const double b1 = cfg_.beta1, b2 = cfg_.beta2;
        const double c1 = 1.0 - std::pow(b1, double(t_)), c2 = 1.0 - std::pow(b2, double(t_));
        first_.weights[n] = b1 * first_.weights[n] + (1.0 - b1) * grads.weights[n];
        first_.bias[n] = b1 * first_.bias[n] + (1.0 - b1) * grads.bias[n];
        second_.weights[n] = b2 * second_.weights[n] + (1.0 - b2) * grads.weights[n].cwiseAbs2();
        second_.bias[n] = b2 * second_.bias[n] + (1.0 - b2) * grads.bias[n].cwiseAbs2();
        const double eps = cfg_.adam_epsilon;
        l.weights.array() -= cfg_.learning_rate * (first_.weights[n].array() / c1) /
                             ((second_.weights[n].array() / c2).sqrt() + eps);
        l.bias.array() -=
            cfg_.learning_rate * (first_.bias[n].array() / c1) / ((second_.bias[n].array() / c2).sqrt() + eps);
    }
}

void soft_update(FnnModel& target, const FnnModel& source, double tau) {
    if (target.layer_sizes() != source.layer_sizes()) throw ShapeError("soft_update: models differ in shape");
    for (std::size_t n = 0; n < target.layer_count(); ++n) {
        target.layer(n).weights = tau * source.layer(n).weights + (1.0 - tau) * target.layer(n).weights;
        target.layer(n).bias = tau * source.layer(n).bias + (1.0 - tau) * target.layer(n).bias;
    }
}

void save_model(const FnnModel& model, std::ostream& out) {
    out << "urllc-fnn 1\n" << model.frozen_prefix() << ' ' << model.layer_count() << '\n';
    out << std::setprecision(17);
    for (const auto& l : model.layers()) {
        out << l.weights.rows() << ' ' << l.weights.cols() << ' ' << to_string(l.activation) << '\n';
        for (Eigen::Index i = 0; i < l.weights.rows(); ++i) {
            for (Eigen::Index j = 0; j < l.weights.cols(); ++j) out << (j ? " " : "") << l.weights(i, j);
            out << '\n';
        }
        for (Eigen::Index i = 0; i < l.bias.size(); ++i) out << (i ? " " : "") << l.bias(i);
        out << '\n';
    }
}

FnnModel load_model(std::istream& in) {
    std::string magic;
    int version = 0;
    in >> magic >> version;
    if (magic != "urllc-fnn" || version != 1) throw std::runtime_error("load_model: not a urllc-fnn v1 stream");
    std::size_t frozen = 0, count = 0;
    in >> frozen >> count;
    if (!in || count == 0) throw std::runtime_error("load_model: bad header");
    std::vector<std::size_t> sizes;
    std::vector<Activation> acts;
    std::vector<Layer> layers;
    for (std::size_t n = 0; n < count; ++n) {
        Eigen::Index rows = 0, cols = 0;
        std::string act;
        in >> rows >> cols >> act;
        if (!in || rows <= 0 || cols <= 0) throw std::runtime_error("load_model: bad layer header");
        Layer l{Eigen::MatrixXd(rows, cols), Eigen::VectorXd(rows), activation_from_string(act)};
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j = 0; j < cols; ++j) in >> l.weights(i, j);
        for (Eigen::Index i = 0; i < rows; ++i) in >> l.bias(i);
        if (!in) throw std::runtime_error("load_model: truncated layer " + std::to_string(n));
        if (n == 0) sizes.push_back(std::size_t(cols));
        sizes.push_back(std::size_t(rows));
        acts.push_back(l.activation);
        layers.push_back(std::move(l));
    }
    FnnModel m(sizes, acts);
    for (std::size_t n = 0; n < count; ++n) {
        if (m.layer(n).weights.cols() != layers[n].weights.cols()) throw ShapeError("load_model: layers do not chain");
        m.layer(n) = std::move(layers[n]);
    }
    m.freeze_prefix(frozen);
    return m;
}

void save_model(const FnnModel& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_model: cannot open " + path);
    save_model(model, out);
}

FnnModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_model: cannot open " + path);
    return load_model(in);
}

}  // namespace urllc::neural
