#include "urllc/qos.hpp"

#include "urllc/numerics.hpp"
#include "urllc/rng.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace urllc::qos {

QosTarget::QosTarget(double e2e_delay_s, double overall_loss, double frame_s)
    : QosTarget(e2e_delay_s, overall_loss, frame_s, LossSplit{overall_loss / 2.0, overall_loss / 2.0, 0.0}) {}

QosTarget::QosTarget(double e2e_delay_s, double overall_loss, double frame_s, LossSplit split)
    : e2e_delay_s_(e2e_delay_s), overall_loss_(overall_loss), frame_s_(frame_s), split_(split) {
    if (!(frame_s > 0.0)) throw DegenerateQos("QosTarget: frame duration must be positive");
    if (!(e2e_delay_s > frame_s)) throw DegenerateQos("QosTarget: e2e delay must exceed one frame");
    if (!(overall_loss > 0.0 && overall_loss < 0.5)) throw DegenerateQos("QosTarget: overall loss must lie in (0, 0.5)");
    if (!(split.decoding > 0.0 && split.queueing > 0.0 && split.dropping >= 0.0))
        throw DegenerateQos("QosTarget: split components must be positive");
    if (split.decoding + split.queueing + split.dropping > overall_loss * (1.0 + 1e-12))
        throw DegenerateQos("QosTarget: split exceeds the overall loss budget");
}

PoissonSource::PoissonSource(double rate, double bits) : rate_pkts_per_s(rate), packet_bits(bits) {
    if (!(rate > 0.0) || !(bits > 0.0)) throw std::invalid_argument("PoissonSource: rate and packet size must be positive");
}

double littles_law(double mean_arrival_rate, double mean_delay_s) {
    return mean_arrival_rate * mean_delay_s;
}

DeadlineVerdict hard_deadline_check(std::span<const double> arrivals, std::span<const double> service,
                                    std::size_t deadline_steps) {
    if (arrivals.size() != service.size())
        throw std::invalid_argument("hard_deadline_check: traces differ in length");
    for (std::size_t t = 1; t < arrivals.size(); ++t)
        if (arrivals[t] < arrivals[t - 1] || service[t] < service[t - 1])
            throw std::invalid_argument("hard_deadline_check: cumulative traces must be nondecreasing");

    for (std::size_t t = 0; t < arrivals.size(); ++t) {
        if (service[t] > arrivals[t]) return {false, t, DeadlineViolation::causality};
        if (t >= deadline_steps && service[t] < arrivals[t - deadline_steps])
            return {false, t, DeadlineViolation::deadline};
    }
    return {true, std::nullopt, DeadlineViolation::none};
}

double effective_bandwidth_poisson(double rate_pkts_per_s, double queue_delay_s, double eps_q) {
    if (!(queue_delay_s > 0.0)) throw DegenerateQos("effective_bandwidth_poisson: queueing delay bound must be positive");
    if (!(eps_q > 0.0 && eps_q < 1.0)) throw numerics::DomainError("effective_bandwidth_poisson: eps_q must lie in (0,1)");
    if (!(rate_pkts_per_s > 0.0)) throw std::invalid_argument("effective_bandwidth_poisson: rate must be positive");
    // The queueing exponent per packet solves lambda (e^theta - 1) D = ln(1/eps).
    const double log_inv = std::log(1.0 / eps_q);
    const double theta_per_packet = std::log1p(log_inv / (rate_pkts_per_s * queue_delay_s));
    return log_inv / (queue_delay_s * theta_per_packet);
}

double effective_bandwidth_poisson(const PoissonSource& src, const QosTarget& qos) {
    return effective_bandwidth_poisson(src.rate_pkts_per_s, qos.queue_delay_s(), qos.eps_q());
}

QosExponent qos_exponent(double effective_bandwidth, double queue_delay_s, double eps_q) {
    if (!(effective_bandwidth > 0.0)) throw std::invalid_argument("qos_exponent: effective bandwidth must be positive");
    if (!(queue_delay_s > 0.0)) throw DegenerateQos("qos_exponent: delay bound must be positive");
    if (!(eps_q > 0.0 && eps_q < 1.0)) throw numerics::DomainError("qos_exponent: eps_q must lie in (0,1)");
    return {std::log(1.0 / eps_q) / (effective_bandwidth * queue_delay_s)};
}

QosExponent qos_exponent(double effective_bandwidth, const QosTarget& qos) {
    return qos_exponent(effective_bandwidth, qos.queue_delay_s(), qos.eps_q());
}

double delay_violation_prob(QosExponent theta, double effective_bandwidth, double delay_s) {
    return std::exp(-theta.value * effective_bandwidth * delay_s);
}

namespace {

// -(1/(theta T)) ln mean exp(-theta T s_i), stabilised by shifting by the largest exponent.
double capacity_from(std::span<const double> rates, const std::vector<std::size_t>* index, double scale) {
    const std::size_t n = index ? index->size() : rates.size();
    auto at = [&](std::size_t i) { return index ? rates[(*index)[i]] : rates[i]; };
    double top = -INFINITY;
    for (std::size_t i = 0; i < n; ++i) top = std::max(top, -scale * at(i));
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += std::exp(-scale * at(i) - top);
    const double log_mean = top + std::log(acc / double(n));
    return -log_mean / scale;
}

}  // namespace

EffectiveCapacityEstimate effective_capacity_estimate(std::span<const double> service_rates_bps, QosExponent theta,
                                                      double frame_s, const BootstrapOptions& bootstrap) {
    if (service_rates_bps.size() < 1000)
        throw std::invalid_argument("effective_capacity_estimate: need at least 1000 samples");
    if (!(theta.value > 0.0) || !(frame_s > 0.0))
        throw std::invalid_argument("effective_capacity_estimate: theta and frame must be positive");
    if (std::all_of(service_rates_bps.begin(), service_rates_bps.end(), [](double s) { return s == 0.0; }))
        throw std::invalid_argument("effective_capacity_estimate: all service samples are zero");

    const double scale = theta.value * frame_s;
    const double value = capacity_from(service_rates_bps, nullptr, scale);

    std::vector<double> boots;
    boots.reserve(bootstrap.resamples);
    CounterRng rng(bootstrap.seed);
    std::vector<std::size_t> index(service_rates_bps.size());
    for (std::size_t b = 0; b < bootstrap.resamples; ++b) {
        for (auto& i : index) i = std::size_t(rng() % service_rates_bps.size());
        boots.push_back(capacity_from(service_rates_bps, &index, scale));
    }
    if (boots.empty()) return {value, value, value};
    std::sort(boots.begin(), boots.end());
    const double tail = (1.0 - bootstrap.confidence) / 2.0;
    auto pick = [&](double q) {
        const auto k = std::size_t(std::clamp(q * double(boots.size() - 1), 0.0, double(boots.size() - 1)));
        return boots[k];
    };
    return {value, pick(tail), pick(1.0 - tail)};
}

Rate to_bits_per_s(Rate rate, double packet_bits) {
    if (rate.unit == RateUnit::bits_per_s) return rate;
    return {rate.value * packet_bits, RateUnit::bits_per_s};
}

RateComparison check_ec_ge_eb(Rate effective_capacity, Rate effective_bandwidth) {
    if (effective_capacity.unit != effective_bandwidth.unit)
        throw UnitMismatch("check_ec_ge_eb: effective capacity and bandwidth are in different units");
    const double margin = effective_capacity.value - effective_bandwidth.value;
    return {margin >= 0.0, margin};
}

}  // namespace urllc::qos
