#pragma once

#include "urllc/fbl.hpp"
#include "urllc/neural.hpp"
#include "urllc/rng.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <deque>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <vector>

namespace urllc::sched {

class RbCapExceeded : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class BudgetViolation : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Smallest n with decoding_error(n * rb_symbols, snr, bits) <= eps, searched
/// upward from the Shannon bound ceil(bits / (rb_symbols log2(1 + snr))).
/// Throws RbCapExceeded if n would exceed cap, DomainError unless 0 < eps <= 0.5.
int required_rbs(double snr, double packet_bits, double eps, int rb_symbols, int cap);
int required_rbs(const fbl::LinkConfig& link, double packet_bits, double eps, int rb_symbols, int cap);
std::optional<int> try_required_rbs(double snr, double packet_bits, double eps, int rb_symbols, int cap);

struct DelayWindow {
    int d_min;
    int d_max;
    bool contains(int d) const { return d >= d_min && d <= d_max; }
};

/// r1: 1 iff scheduled, in window and decoded.
double reward_indicator(int hol_delay, bool scheduled, bool decode_ok, DelayWindow window);

/// Decoding errors below this floor are treated as equal to it by the log
/// reward, which would otherwise be infinite when the error underflows.
inline constexpr double kLogRewardErrorFloor = 1e-12;

/// r2: in-window indicator times (1 - eps_c) when scheduled; with log_transform
/// returns -ln(1 - r2), evaluated as -ln(max(eps_c, floor)).
double reward_model_based(int hol_delay, bool scheduled, double eps_c, DelayWindow window, bool log_transform);

struct PotentialSpec {
    int d_min;
    int d_max;
    double peak = 1.0;
    int d_end;  // potential reaches zero here; >= d_max

    void validate() const;
};

/// Rises linearly from 0 at d = 0 to the peak at d_min, falls to 0 at d_end, 0 beyond.
double potential_triangular(double hol_delay, const PotentialSpec& spec);

/// r - psi(s) + gamma psi(s').
double shape_reward(double reward, double psi_now, double psi_next, double gamma);

/// max(0, lambda + step (C - budget)).
double cmdp_dual_update(double lambda, double measured_cost, double cost_budget, double step);

/// r - sum_m lambda_m c_m.
double lagrangian_reward(double reward, const std::vector<double>& lambdas, const std::vector<double>& costs);

// ---------------------------------------------------------------- environment

enum class RewardMode { indicator, model_based, model_based_log };
enum class StateEncoding { required_rbs, raw_cqi };

struct EnvConfig {
    std::size_t users = 4;
    int rb_budget = 12;
    int rb_symbols = 84;
    double packet_bits = 256.0;
    double target_eps = 1e-5;
    DelayWindow window{2, 5};
    std::vector<double> mean_snr_db{6.0, 9.0, 12.0, 15.0};
    std::vector<double> arrival_prob{0.3, 0.3, 0.3, 0.3};
    std::size_t queue_cap = 16;
    int cqi_levels = 16;
    double cqi_min_db = -10.0;
    double cqi_max_db = 30.0;
    RewardMode reward = RewardMode::model_based_log;
    std::optional<double> decode_error_override;  // forces eps_c of every transmission
    std::uint64_t seed = 1;

    void validate() const;
};

/// Shifts mean SNRs and scales arrival probabilities, emulating model mismatch.
EnvConfig perturbed(const EnvConfig& cfg, double snr_shift_db, double arrival_scale);

struct SchedState {
    std::vector<int> hol_delay;         // slots; 0 when idle
    std::vector<int> required_rbs;      // rb_budget + 1 when unservable
    std::vector<int> cqi;               // quantized SNR level
    std::vector<std::size_t> queue_len;
    std::vector<double> snr;            // linear, this slot
};

struct SchedAction {
    std::vector<int> rbs;  // 0 = not scheduled
};

struct StepInfo {
    std::size_t arrivals = 0;
    std::size_t delivered = 0;
    std::size_t decode_losses = 0;
    std::size_t early_losses = 0;    // transmitted before d_min
    std::size_t expired_losses = 0;  // aged past d_max
    std::size_t overflow_losses = 0; // queue full at arrival
    std::size_t losses() const { return decode_losses + early_losses + expired_losses + overflow_losses; }
};

struct StepResult {
    std::vector<double> rewards;
    std::vector<double> user_losses;  // packets lost per user this slot
    StepInfo info;
};

class SchedulerEnv {
public:
    explicit SchedulerEnv(EnvConfig cfg);

    const SchedState& state() const { return state_; }
    const EnvConfig& config() const { return cfg_; }

    /// Throws BudgetViolation, without touching the state, if the action
    /// grants more RBs than the budget or has the wrong length.
    StepResult step(const SchedAction& action);

    /// Decoding error probability of n RBs for user k in the current slot.
    double decode_error(std::size_t k, int rbs) const;

private:
    void draw_channels();

    EnvConfig cfg_;
    CounterRng rng_;
    std::vector<std::deque<int>> queues_;
    SchedState state_;
};

/// Network input: per user [pending, d/d_max, n/budget or cqi/levels, queue/cap].
Eigen::VectorXd encode_state(const SchedState& s, const EnvConfig& cfg, StateEncoding encoding);

/// Scores in [-1,1]: users with positive score and a pending packet get their
/// required RBs, highest score first, while the budget lasts.
SchedAction decode_scores(const Eigen::VectorXd& scores, const SchedState& s, const EnvConfig& cfg);

/// Values in [-1,1] mapped to RB counts round((a+1)/2 * budget), trimmed
/// greedily by value when the budget is exceeded.
SchedAction decode_rb_levels(const Eigen::VectorXd& levels, const SchedState& s, const EnvConfig& cfg);

// ------------------------------------------------------------- replay buffer

struct Transition {
    Eigen::VectorXd state;
    Eigen::VectorXd action;
    Eigen::VectorXd rewards;  // one per critic head
    Eigen::VectorXd next_state;
    bool done = false;
};

/// Sum-tree replay with selection probability proportional to w + eps_w.
class PrioritizedReplay {
public:
    PrioritizedReplay(std::size_t capacity, double eps_w = 1e-3, double beta = 1.0);

    /// New transitions get the largest priority seen so far.
    void add(Transition t);
    std::size_t size() const { return size_; }
    std::size_t capacity() const { return capacity_; }

    struct Batch {
        std::vector<std::size_t> indices;
        std::vector<double> corrections;  // (1 / (N P(i)))^beta, normalized to max 1
    };
    /// Throws std::logic_error on an empty buffer.
    Batch sample(std::size_t batch, CounterRng& rng) const;
    /// Uniform sampling with unit corrections.
    Batch sample_uniform(std::size_t batch, CounterRng& rng) const;

    void update_priority(std::size_t index, double w);
    double probability(std::size_t index) const;
    const Transition& at(std::size_t index) const { return data_.at(index); }

private:
    void set_leaf(std::size_t index, double value);

    std::size_t capacity_;
    double eps_w_;
    double beta_;
    std::size_t next_ = 0;
    std::size_t size_ = 0;
    double max_w_ = 1.0;
    std::vector<Transition> data_;
    std::vector<double> tree_;  // 2 * leaves, node i has children 2i, 2i+1
    std::size_t leaves_;
};

// ----------------------------------------------------------------------- DDPG

struct AgentConfig {
    StateEncoding encoding = StateEncoding::required_rbs;
    RewardMode reward = RewardMode::model_based_log;  // must match the environment
    bool shaping = true;
    PotentialSpec potential{2, 5, 1.0, 5};
    bool multi_head = true;
    bool prioritized = true;
    std::size_t hidden = 64;
    std::size_t hidden_layers = 2;
    double actor_lr = 1e-4;
    double critic_lr = 1e-3;
    double finetune_lr = 1e-4;
    double gamma = 0.9;
    double tau = 0.005;
    std::size_t batch = 64;
    std::size_t replay_capacity = 100000;
    double eps_w = 1e-3;
    double priority_beta = 1.0;
    double exploration_sigma = 0.3;
    /// Actor penalty (c/2) mean |z|^2 on the pre-tanh outputs z; keeps the
    /// actor out of saturation, where its gradient vanishes.
    double action_reg = 1e-2;
    std::size_t warmup_slots = 1000;
    std::size_t update_every = 1;
    std::uint64_t seed = 1;

    /// Raw CQI state, indicator reward, single head, uniform replay, no shaping.
    static AgentConfig plain(std::uint64_t seed = 1);
    /// Required-RB state with log model-based reward, shaping, multi-head critic, prioritized replay.
    static AgentConfig knowledge_assisted(std::uint64_t seed = 1);
};

struct DdpgNetworks {
    neural::FnnModel actor, critic, actor_target, critic_target;
};

DdpgNetworks make_networks(std::size_t state_size, std::size_t action_size, std::size_t heads,
                           const AgentConfig& cfg);

struct DdpgStats {
    std::vector<double> td_errors;  // squared, summed over heads, per transition
    double critic_loss = 0.0;
};

/// One update: each critic head regresses toward r_k + gamma Q'_k(s', mu'(s')),
/// weighted by the replay corrections; the actor ascends sum_k Q_k(s, mu(s));
/// action_reg penalizes the actor's pre-tanh outputs; targets are soft-updated with rate tau. Throws std::runtime_error on NaN.
DdpgStats ddpg_update(DdpgNetworks& nets, neural::Optimizer& actor_opt, neural::Optimizer& critic_opt,
                      const std::vector<const Transition*>& batch, const std::vector<double>& corrections,
                      double gamma, double tau, double action_reg = 0.0);

/// d sum_k Q_k(s, a) / d a.
Eigen::VectorXd critic_action_gradient(const neural::FnnModel& critic, const Eigen::VectorXd& state,
                                       const Eigen::VectorXd& action);

struct CmdpConfig {
    bool enabled = false;
    double loss_budget = 1e-2;  // allowed packet loss rate
    double step = 1.0;
};

struct TrainSchedule {
    std::size_t slots = 100000;
    std::size_t eval_window = 1000;
    bool explore = true;
    CmdpConfig cmdp;
};

struct WindowRecord {
    std::size_t slot;
    double loss_rate;
    double mean_reward;
    double lambda;
};

class SchedulerAgent {
public:
    SchedulerAgent(const EnvConfig& env, AgentConfig cfg);

    const AgentConfig& config() const { return cfg_; }
    const DdpgNetworks& networks() const { return nets_; }

    /// Runs the environment for schedule.slots, learning as it goes.
    std::vector<WindowRecord> train(SchedulerEnv& env, const TrainSchedule& schedule);

    /// Greedy rollout without learning or exploration; returns the loss rate.
    double evaluate(SchedulerEnv& env, std::size_t slots) const;

    /// Lowers the learning rates to finetune_lr for fine-tuning.
    void enter_finetune();

    /// Replaces actor and actor target, e.g. with a saved model. Throws
    /// neural::ShapeError if the layer sizes differ.
    void set_actor(const neural::FnnModel& actor);

    SchedAction act(const SchedState& s, const EnvConfig& env, CounterRng* noise) const;

private:
    Eigen::VectorXd head_rewards(const StepResult& r, const SchedState& before, const SchedState& after,
                                 double lambda) const;

    AgentConfig cfg_;
    std::size_t users_;
    DdpgNetworks nets_;
    neural::Optimizer actor_opt_;
    neural::Optimizer critic_opt_;
    PrioritizedReplay replay_;
    CounterRng rng_;
};

void write_windows_csv(std::ostream& out, const std::vector<WindowRecord>& windows);

}  // namespace urllc::sched
