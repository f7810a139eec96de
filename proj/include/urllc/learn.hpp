#pragma once

#include "urllc/crosslayer.hpp"
#include "urllc/neural.hpp"
#include "urllc/rng.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace urllc::learn {

class SystematicallyInfeasible : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class Diverged : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class LabelKind {
    bandwidth,  // per-user minimum W_k with fixed power (separable bandwidth problem)
    power       // per-user P_k of the joint minimum-total-power allocation
};

/// Distribution of network states: user templates whose large-scale gains are
/// redrawn uniformly in dB, and optionally whose arrival rates are rescaled.
struct LearningScenario {
    std::vector<crosslayer::UserProfile> users;
    crosslayer::SystemBudget budget;
    double gain_db_min;
    double gain_db_max;
    double rate_scale_min = 1.0;  // multiplies each URLLC user's arrival rate
    double rate_scale_max = 1.0;
    LabelKind label = LabelKind::bandwidth;
    crosslayer::SolverOptions solver;
    std::size_t max_retries = 100;

    void validate() const;
    std::size_t feature_size() const { return 2 * users.size(); }
    std::size_t label_size() const { return users.size(); }
};

struct LabeledSample {
    std::vector<double> gains;        // linear large-scale gain per user
    std::vector<double> rate_scales;  // arrival-rate multiplier per user
    Eigen::VectorXd features;         // gains in dB and rate scales, each mapped to [-1, 1]
    Eigen::VectorXd label;            // W_k in Hz or P_k in W; empty for unlabeled states
};

/// Draws one unlabeled state.
LabeledSample draw_state(const LearningScenario& scenario, CounterRng& rng);

/// Users of the scenario with the state's gains and rates applied.
std::vector<crosslayer::UserProfile> users_for(const LearningScenario& scenario, const LabeledSample& state);

/// Optimal label for a state. Throws crosslayer::Infeasible.
Eigen::VectorXd solve_label(const LearningScenario& scenario, const LabeledSample& state);

struct LabelSet {
    std::vector<LabeledSample> samples;
    std::size_t resampled = 0;  // infeasible draws that were replaced
};

/// Sample i uses stream i of `seed`, so sets are reproducible and prefixes of
/// larger sets. Throws SystematicallyInfeasible after max_retries consecutive
/// infeasible draws for one sample.
LabelSet generate_labels(const LearningScenario& scenario, std::size_t count, std::uint64_t seed);

/// CSV with header gain_db_<k>..., rate_scale_<k>..., label_<k>...
void write_samples_csv(std::ostream& out, const std::vector<LabeledSample>& samples);

// ------------------------------------------------------------------ supervised

enum class LabelScaling { none, standardize, log_standardize };

/// Maps physical labels to network targets and back.
struct LabelScaler {
    LabelScaling scaling = LabelScaling::none;
    Eigen::VectorXd mean;
    Eigen::VectorXd stddev;

    static LabelScaler fit(const std::vector<LabeledSample>& samples, LabelScaling scaling);
    Eigen::VectorXd to_target(const Eigen::VectorXd& label) const;
    Eigen::VectorXd to_label(const Eigen::VectorXd& output) const;
};

struct SupervisedConfig {
    neural::TrainConfig train;
    double holdout_fraction = 0.2;
    LabelScaling scaling = LabelScaling::log_standardize;
    std::optional<LabelScaler> scaler;  // reuse instead of fitting (transfer)
};

struct SupervisedResult {
    neural::FnnModel model;
    LabelScaler scaler;
    std::vector<double> train_loss;    // per epoch, entry 0 before any update
    std::vector<double> holdout_loss;  // empty when there is no holdout
    std::size_t steps = 0;
};

/// Minimizes the mean squared error between outputs and scaled labels.
/// Throws Diverged if the loss becomes non-finite.
SupervisedResult train_supervised(neural::FnnModel model, const std::vector<LabeledSample>& samples,
                                  const SupervisedConfig& cfg);

Eigen::VectorXd predict(const neural::FnnModel& model, const LabelScaler& scaler, const Eigen::VectorXd& features);

/// Freezes the first k layers of the source model and trains the rest on the
/// new samples with the source scaler and learning rate times lr_scale.
SupervisedResult finetune_transfer(const SupervisedResult& source, const std::vector<LabeledSample>& new_samples,
                                   std::size_t frozen_layers, SupervisedConfig cfg, double lr_scale = 0.1);

/// 1 - (sum approx - sum optimal) / sum optimal. Exceeds 1 when the
/// approximation undershoots. Throws std::invalid_argument on a zero optimum
/// or length mismatch.
double normalized_accuracy(const Eigen::VectorXd& approx, const Eigen::VectorXd& optimal);

/// Mean over samples of min(eta, 2 - eta), so undershooting is penalized like overshooting.
double mean_symmetric_accuracy(const neural::FnnModel& model, const LabelScaler& scaler,
                               const std::vector<LabeledSample>& samples);

struct LadderPoint {
    std::size_t samples;
    double accuracy;
};

/// relative_qos_error of each user's bandwidth in the given state.
std::vector<double> qos_errors(const LearningScenario& scenario, const LabeledSample& state,
                               const Eigen::VectorXd& bandwidth_hz);

/// Smallest sample count whose accuracy reaches the target, if any.
std::optional<std::size_t> samples_to_accuracy(const std::vector<LadderPoint>& ladder, double target);

// --------------------------------------------------------------- primal-dual

/// A per-state constrained problem min_a f(s, a) s.t. c(s, a) <= 0, where a
/// is the policy output.
class PrimalDualProblem {
public:
    virtual ~PrimalDualProblem() = default;
    virtual std::size_t action_size() const = 0;
    virtual std::size_t constraint_size() const = 0;

    struct Evaluation {
        double objective;
        Eigen::VectorXd objective_grad;  // d f / d a
        Eigen::VectorXd constraints;
        Eigen::MatrixXd constraint_jacobian;  // d c / d a
    };
    virtual Evaluation evaluate(const LabeledSample& state, const Eigen::VectorXd& action) const = 0;
};

/// min sum_k W_k subject to the per-user normalized effective-capacity
/// constraint. Actions are bandwidths in units of reference_hz.
class BandwidthProblem : public PrimalDualProblem {
public:
    /// reference_hz defaults to the mean minimum bandwidth at the mid gain.
    explicit BandwidthProblem(LearningScenario scenario, std::optional<double> reference_hz = {});

    std::size_t action_size() const override { return scenario_.users.size(); }
    std::size_t constraint_size() const override { return scenario_.users.size(); }
    Evaluation evaluate(const LabeledSample& state, const Eigen::VectorXd& action) const override;

    double reference_hz() const { return reference_hz_; }
    const LearningScenario& scenario() const { return scenario_; }

private:
    LearningScenario scenario_;
    double reference_hz_;
};

struct PrimalDualConfig {
    neural::TrainConfig primal;
    double dual_rate_ratio = 10.0;   // dual learning rate / primal learning rate
    bool scalar_multiplier = false;  // one multiplier per constraint instead of a network
    double penalty = 0.0;            // augmented-Lagrangian weight on max(c, 0)^2
    std::size_t patience = 20;       // epochs without violation improvement before flagging
};

struct PrimalDualResult {
    neural::FnnModel policy;
    neural::FnnModel multiplier;          // unused with scalar multipliers
    Eigen::VectorXd scalar_multipliers;   // used with scalar multipliers
    std::vector<double> violation_trace;  // mean max(c, 0) per epoch
    std::vector<double> objective_trace;  // mean objective per epoch
    std::vector<double> multiplier_trace; // mean multiplier per epoch
    double min_multiplier_seen = 0.0;
    bool stalled = false;  // violation did not improve within the patience window
};

/// Alternates descent on the Lagrangian over the policy with ascent over the
/// multipliers. The multiplier network must end in softplus so its outputs
/// stay nonnegative; scalar multipliers are projected onto [0, inf).
PrimalDualResult train_unsupervised_primal_dual(neural::FnnModel policy, neural::FnnModel multiplier,
                                                const PrimalDualProblem& problem,
                                                const std::vector<LabeledSample>& states,
                                                const PrimalDualConfig& cfg);

}  // namespace urllc::learn
