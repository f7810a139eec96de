#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>

namespace urllc::qos {

class DegenerateQos : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class UnitMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// How the overall loss budget is divided between decoding errors, queueing
/// delay violations and proactive dropping.
struct LossSplit {
    double decoding;
    double queueing;
    double dropping = 0.0;
};

/// End-to-end delay and loss requirement of a URLLC service.
///
/// Transmission takes exactly one frame, so the queueing delay bound is
/// e2e_delay - frame. The loss budget defaults to an equal split between
/// decoding and queueing.
class QosTarget {
public:
    /// Throws DegenerateQos unless e2e_delay > frame > 0 and 0 < overall_loss < 0.5.
    QosTarget(double e2e_delay_s, double overall_loss, double frame_s);

    /// Explicit split. Components must be positive (dropping may be zero) and
    /// sum to at most overall_loss.
    QosTarget(double e2e_delay_s, double overall_loss, double frame_s, LossSplit split);

    double e2e_delay_s() const { return e2e_delay_s_; }
    double overall_loss() const { return overall_loss_; }
    double frame_s() const { return frame_s_; }
    double queue_delay_s() const { return e2e_delay_s_ - frame_s_; }
    double eps_c() const { return split_.decoding; }
    double eps_q() const { return split_.queueing; }
    double eps_p() const { return split_.dropping; }
    const LossSplit& split() const { return split_; }

    QosTarget with_split(LossSplit split) const { return QosTarget(e2e_delay_s_, overall_loss_, frame_s_, split); }

private:
    double e2e_delay_s_;
    double overall_loss_;
    double frame_s_;
    LossSplit split_;
};

/// Poisson packet arrivals.
struct PoissonSource {
    double rate_pkts_per_s;
    double packet_bits;

    /// Throws std::invalid_argument unless both are positive.
    PoissonSource(double rate, double bits);
};

/// Decay rate of the queueing-delay tail. Its unit is the reciprocal of the
/// unit of the effective bandwidth it was derived from times seconds.
struct QosExponent {
    double value;
};

/// Mean number in system from mean arrival rate and mean delay.
double littles_law(double mean_arrival_rate, double mean_delay_s);

enum class DeadlineViolation { none, causality, deadline };

struct DeadlineVerdict {
    bool feasible;
    std::optional<std::size_t> first_violation;
    DeadlineViolation kind = DeadlineViolation::none;
};

/// Checks S(t) <= A(t) for all t and S(t) >= A(t - deadline_steps) for all
/// t >= deadline_steps on cumulative traces. Throws std::invalid_argument on a
/// length mismatch or a decreasing trace.
DeadlineVerdict hard_deadline_check(std::span<const double> arrivals, std::span<const double> service,
                                    std::size_t deadline_steps);

/// Effective bandwidth (packets/s) of a Poisson source for the target's
/// queueing-delay bound and violation probability.
double effective_bandwidth_poisson(const PoissonSource& src, const QosTarget& qos);

/// Same formula on raw values; throws DegenerateQos if queue_delay_s <= 0 and
/// numerics::DomainError unless 0 < eps_q < 1.
double effective_bandwidth_poisson(double rate_pkts_per_s, double queue_delay_s, double eps_q);

/// theta = ln(1/eps_q) / (E_B * D_q).
QosExponent qos_exponent(double effective_bandwidth, const QosTarget& qos);
QosExponent qos_exponent(double effective_bandwidth, double queue_delay_s, double eps_q);

/// exp(-theta E_B D).
double delay_violation_prob(QosExponent theta, double effective_bandwidth, double delay_s);

struct EffectiveCapacityEstimate {
    double value;     // bits/s
    double ci_lower;  // bootstrap percentile interval
    double ci_upper;
};

struct BootstrapOptions {
    std::size_t resamples = 200;
    double confidence = 0.95;
    std::uint64_t seed = 1;
};

/// Finite-sample effective capacity  -(1/(theta T_f)) ln mean exp(-theta s T_f)
/// from per-frame service rates s (bits/s), with theta in 1/bit. Requires at
/// least 1000 samples and at least one nonzero sample.
EffectiveCapacityEstimate effective_capacity_estimate(std::span<const double> service_rates_bps,
                                                      QosExponent theta, double frame_s,
                                                      const BootstrapOptions& bootstrap = {});

enum class RateUnit { bits_per_s, packets_per_s };

struct Rate {
    double value;
    RateUnit unit;
};

/// Converts a packet rate to bits/s using the packet size. Bit rates pass through.
Rate to_bits_per_s(Rate rate, double packet_bits);

struct RateComparison {
    bool satisfied;
    double margin;  // E_C - E_B
};

/// E_C >= E_B. Throws UnitMismatch if the units differ.
RateComparison check_ec_ge_eb(Rate effective_capacity, Rate effective_bandwidth);

}  // namespace urllc::qos
