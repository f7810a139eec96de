#pragma once

#include "urllc/crosslayer.hpp"
#include "urllc/learn.hpp"
#include "urllc/sched.hpp"
#include "urllc/sim.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace urllc::scenario {

/// Parse or validation failure with the offending field and, when known, the
/// 1-based line in the scenario text.
class ScenarioError : public std::runtime_error {
public:
    ScenarioError(const std::string& message, std::string field, int line = -1)
        : std::runtime_error(message), field_(std::move(field)), line_(line) {}
    const std::string& field() const { return field_; }
    int line() const { return line_; }

private:
    std::string field_;
    int line_;
};

struct UserSpec {
    std::string service = "urllc";  // urllc | delay_tolerant
    double gain_db = 0.0;
    double arrival_rate_pkts_per_s = 0.0;
    double packet_bits = 0.0;
    double mean_rate_bps = 0.0;
    std::optional<double> fixed_power_w;
};

struct BudgetSpec {
    double total_bandwidth_hz = 0.0;
    int antennas = 1;
    double noise_psd_dbm_per_hz = -174.0;
    std::string fading = "gamma";  // gamma | deterministic
    double deterministic_gain = 1.0;
};

struct QosSpec {
    double e2e_delay_ms = 1.0;
    double overall_loss = 1e-3;
    double frame_ms = 0.125;
    double decoding_fraction = 0.5;  // eps_c / eps_tot; the rest goes to queueing
};

struct SolverSpec {
    std::size_t quadrature_order = 128;
    std::size_t grid_points = 200;
    bool refine = true;
    double power_cap_w = 1e6;
    std::string rate_dispersion = "exact";  // exact | unit
    std::vector<double> split_fractions;    // decoding fractions for the split experiment
};

struct SimSpec {
    std::size_t horizon_packets = 1000000;
    double warmup_fraction = 0.1;
    std::string arrivals = "poisson";  // poisson | deterministic | bernoulli
    double slot_ms = 0.125;
};

struct LearnSpec {
    std::string label = "bandwidth";  // bandwidth | power
    double gain_db_min = -110.0;      // large-scale gain range, all users
    double gain_db_max = -90.0;
    double rate_scale_min = 1.0;
    double rate_scale_max = 1.0;
    std::size_t train_samples = 1000;
    std::size_t eval_samples = 1000;
    std::size_t hidden_layers = 3;
    std::size_t hidden_units = 64;
    std::size_t epochs = 50;
    double learning_rate = 1e-3;
    double final_lr_fraction = 1.0;  // cosine decay floor, 1 = constant
    std::size_t batch_size = 64;
    std::string optimizer = "adam";  // sgd | momentum | adam
    std::size_t frozen_layers = 3;
    double transfer_noise_shift_db = 3.0;  // target-task perturbation
    std::size_t transfer_samples = 100;
    double dual_rate_ratio = 10.0;
    double penalty = 0.0;  // quadratic term on constraint violations
};

struct SchedSpec {
    std::size_t users = 4;
    int rb_budget = 12;
    int rb_symbols = 84;
    double packet_bits = 256.0;
    double target_eps = 1e-5;
    int d_min_slots = 2;
    int d_max_slots = 5;
    std::vector<double> mean_snr_db{6.0, 9.0, 12.0, 15.0};
    std::vector<double> arrival_prob{0.3, 0.3, 0.3, 0.3};
    std::string agent = "knowledge_assisted";  // knowledge_assisted | plain
    std::size_t train_slots = 100000;
    std::size_t eval_slots = 20000;
    std::size_t eval_window = 1000;
};

struct FblSpec {
    double bandwidth_hz = 1e6;
    double frame_ms = 0.125;
    double payload_bits = 160.0;
    std::vector<double> snr_db{0.0, 5.0, 10.0, 20.0};
    std::vector<double> eps{1e-5, 1e-7};
};

struct Scenario {
    std::optional<BudgetSpec> budget;
    std::optional<QosSpec> qos;
    std::vector<UserSpec> users;
    SolverSpec solver;
    SimSpec sim;
    std::optional<LearnSpec> learn;
    std::optional<SchedSpec> sched;
    std::optional<FblSpec> fbl;

    /// Throws ScenarioError naming the missing section.
    crosslayer::SystemBudget system_budget() const;
    std::vector<crosslayer::UserProfile> user_profiles() const;
    crosslayer::SolverOptions solver_options() const;
    sim::SimConfig sim_config(std::uint64_t seed) const;
    learn::LearningScenario learning_scenario() const;
    sched::EnvConfig env_config(std::uint64_t seed) const;
};

/// Parses YAML text after applying `key.path=value` overrides. Unknown keys,
/// wrong types and out-of-range values raise ScenarioError.
Scenario parse_scenario(const std::string& text, const std::vector<std::string>& overrides = {});
Scenario load_scenario(const std::string& path, const std::vector<std::string>& overrides = {});

/// Canonical YAML; parse_scenario(to_yaml(s)) reproduces s.
std::string to_yaml(const Scenario& s);

/// 64-bit FNV-1a of the text, as 16 hex digits.
std::string config_hash(const std::string& text);

}  // namespace urllc::scenario
