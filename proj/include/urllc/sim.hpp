#pragma once

#include "urllc/crosslayer.hpp"
#include "urllc/fbl.hpp"
#include "urllc/numerics.hpp"
#include "urllc/qos.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace urllc::sim {

enum class ArrivalModel { poisson, deterministic, bernoulli };
enum class ServiceModel { constant_rate, finite_blocklength };

struct SimConfig {
    std::uint64_t seed = 1;
    std::size_t horizon = 100000;  // packets
    double warmup_fraction = 0.1;
    ArrivalModel arrivals = ArrivalModel::poisson;
    ServiceModel service = ServiceModel::constant_rate;
    double slot_s = 1.25e-4;  // slot length for bernoulli arrivals
    bool keep_records = false;
    bool keep_samples = true;              // per-packet delays; off for very long runs
    std::vector<double> tail_thresholds_s; // tails reported in the summary
    std::optional<double> target_eps;      // for the resolution flag

    /// Throws std::invalid_argument unless horizon > 0 and warmup in [0, 0.5).
    void validate() const;
};

enum class Outcome { delivered, decode_loss, deadline_loss };

struct PacketRecord {
    double arrival_s;
    double departure_s;  // service end, or drop time for deadline losses
    Outcome outcome;
};

struct TailEstimate {
    double estimate;
    double lower;  // Wilson 99%
    double upper;
    std::size_t exceed;
    std::size_t samples;
    bool insufficient_resolution;  // samples < 100 / target
};

/// Fraction of samples strictly above threshold with a Wilson 99% interval.
/// Throws std::invalid_argument on empty input.
TailEstimate tail_probability(std::span<const double> samples, double threshold,
                              std::optional<double> target_eps = {});

struct QueueSummary {
    std::size_t packets = 0;  // after warmup
    double mean_waiting_s = 0.0;
    double mean_sojourn_s = 0.0;
    double p50_sojourn_s = 0.0;
    double p99_sojourn_s = 0.0;
    double p999_sojourn_s = 0.0;
    double arrival_rate_hat = 0.0;    // packets/s over the observation window
    double mean_in_system = 0.0;      // time average of the number in system
    double littles_law_rel_err = 0.0; // |L - lambda D| / L
    std::vector<TailEstimate> waiting_tails;  // one per threshold
    std::vector<TailEstimate> sojourn_tails;
    bool overloaded = false;
    std::string warning;
};

struct QueueSimResult {
    std::vector<double> waiting_s;  // after warmup, in arrival order; only with keep_samples
    std::vector<double> sojourn_s;
    std::vector<PacketRecord> records;  // only with keep_records
    QueueSummary summary;
};

/// FCFS single server, service time packet_bits / service_rate_bps per packet,
/// Lindley recursion in exact event time. Runs even when overloaded.
QueueSimResult run_queue_sim(const qos::PoissonSource& src, double service_rate_bps, const SimConfig& cfg);

struct LinkSimOptions {
    fbl::Dispersion dispersion = fbl::Dispersion::unit;
    std::optional<double> power_override_w;    // e.g. infinity to remove decoding errors
    std::optional<double> arrival_rate_override;  // packets/s, may be 0
};

struct LinkSimResult {
    std::size_t packets = 0;
    std::size_t decode_losses = 0;
    std::size_t deadline_losses = 0;
    double eps_c_hat = 0.0;    // decode losses / transmitted packets
    double eps_q_hat = 0.0;    // deadline losses / packets
    double eps_tot_hat = 0.0;  // all losses / packets (disjoint counting)
    double eps_tot_independent = 0.0;  // eps_c + eps_q - eps_c eps_q
    double overlap = 0.0;              // eps_c eps_q
    numerics::WilsonInterval eps_tot_interval{0.0, 0.0, 0.0};
    double service_rate_bps = 0.0;
    std::vector<PacketRecord> records;  // only with keep_records
};

/// Packets of a URLLC user are served FCFS at the constant rate E_B u0; a
/// packet whose waiting time would exceed D_q is dropped, otherwise it is
/// sent in one frame and lost with the decoding error of that frame's fade.
/// Fades are Gamma(N_T, 1) (or the budget's fading model), quasi-static per
/// frame and keyed by frame index.
LinkSimResult run_link_sim(const crosslayer::UserProfile& user, const crosslayer::SystemBudget& budget,
                           double bandwidth_hz, double power_w, const SimConfig& cfg, const LinkSimOptions& opts = {});

/// CSV with arrival_s, departure_s, outcome.
void write_records_csv(std::ostream& out, const std::vector<PacketRecord>& records);

std::string to_string(Outcome o);

}  // namespace urllc::sim
