#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace urllc::neural {

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class Activation { sigmoid, relu, tanh, identity, softplus };

std::string to_string(Activation a);
/// Throws std::invalid_argument on an unknown name.
Activation activation_from_string(const std::string& name);

struct Layer {
    Eigen::MatrixXd weights;  // M[n] x M[n-1]
    Eigen::VectorXd bias;     // M[n]
    Activation activation;
};

/// Fully connected feed-forward network x[n] = f(W[n] x[n-1] + b[n]).
class FnnModel {
public:
    FnnModel() = default;

    /// Zero weights and biases. `sizes` holds M[0..N]; one activation per layer.
    FnnModel(const std::vector<std::size_t>& sizes, const std::vector<Activation>& activations);

    /// Fan-in scaled uniform weights in +-scale*sqrt(3/fan_in), zero biases.
    static FnnModel initialized(const std::vector<std::size_t>& sizes, const std::vector<Activation>& activations,
                                std::uint64_t seed, double scale = 1.0);

    std::size_t layer_count() const { return layers_.size(); }
    std::size_t input_size() const;
    std::size_t output_size() const;
    std::vector<std::size_t> layer_sizes() const;
    std::size_t parameter_count() const;

    const std::vector<Layer>& layers() const { return layers_; }
    Layer& layer(std::size_t n) { return layers_.at(n); }
    const Layer& layer(std::size_t n) const { return layers_.at(n); }

    std::size_t frozen_prefix() const { return frozen_; }
    /// Excludes the first k layers from gradients and updates. Throws on k > layer_count().
    void freeze_prefix(std::size_t k);

    Eigen::VectorXd forward(const Eigen::VectorXd& x) const;
    /// Columns are samples.
    Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& x) const;

    /// Throws ShapeError if the layers do not chain.
    void check_shapes() const;

private:
    std::vector<Layer> layers_;
    std::size_t frozen_ = 0;
};

struct ForwardCache {
    std::vector<Eigen::MatrixXd> outputs;  // outputs[0] is the input batch
    std::vector<Eigen::MatrixXd> pre;      // pre-activations per layer
};

ForwardCache forward_cached(const FnnModel& model, const Eigen::MatrixXd& x);

struct Gradients {
    std::vector<Eigen::MatrixXd> weights;  // empty (0x0) for frozen layers
    std::vector<Eigen::VectorXd> bias;     // empty for frozen layers
    Eigen::MatrixXd input;                 // d loss / d input, one column per sample

    /// Zero gradients of matching shape; frozen layers left empty.
    static Gradients zeros_like(const FnnModel& model);
    void add_scaled(const Gradients& other, double scale);
    void scale(double s);
    double squared_norm() const;
    bool finite() const;
};

/// Parameter gradients summed over the batch for upstream d loss / d output.
Gradients backward(const FnnModel& model, const ForwardCache& cache, const Eigen::MatrixXd& upstream);
Gradients backward(const FnnModel& model, const Eigen::VectorXd& x, const Eigen::VectorXd& upstream);
/// As above, plus output_pre_gradient added to the gradient w.r.t. the output
/// layer's pre-activation, e.g. for a penalty on saturating outputs.
Gradients backward(const FnnModel& model, const ForwardCache& cache, const Eigen::MatrixXd& upstream,
                   const Eigen::MatrixXd& output_pre_gradient);

enum class OptimizerKind { sgd, momentum, adam };

struct TrainConfig {
    double learning_rate = 1e-3;
    std::size_t batch_size = 32;
    std::size_t epochs = 100;
    std::uint64_t seed = 1;
    OptimizerKind optimizer = OptimizerKind::sgd;
    double momentum = 0.9;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_epsilon = 1e-8;
    /// Cosine decay of the learning rate over the epochs down to this fraction
    /// of its initial value; 1 keeps it constant.
    double final_lr_fraction = 1.0;

    /// Throws std::invalid_argument unless learning_rate > 0, batch_size >= 1 and
    /// final_lr_fraction lies in (0, 1].
    void validate() const;
    /// Learning rate for a 0-based epoch index.
    double learning_rate_at(std::size_t epoch) const;
};

/// theta <- theta - lr * grad on unfrozen layers.
void sgd_step(FnnModel& model, const Gradients& grads, double learning_rate);

/// Stateful optimizer; state is sized for the model it was built with.
class Optimizer {
public:
    Optimizer(const FnnModel& model, const TrainConfig& cfg);
    void step(FnnModel& model, const Gradients& grads);
    void set_learning_rate(double lr) { cfg_.learning_rate = lr; }
    double learning_rate() const { return cfg_.learning_rate; }

private:
    TrainConfig cfg_;
    Gradients first_;
    Gradients second_;
    std::size_t t_ = 0;
};

/// Soft update target <- tau * source + (1 - tau) * target.
void soft_update(FnnModel& target, const FnnModel& source, double tau);

/// Text format: "urllc-fnn 1", frozen prefix, layer count, then per layer
/// "rows cols activation" followed by row-major weights and the bias.
void save_model(const FnnModel& model, std::ostream& out);
FnnModel load_model(std::istream& in);
void save_model(const FnnModel& model, const std::string& path);
FnnModel load_model(const std::string& path);

}  // namespace urllc::neural
