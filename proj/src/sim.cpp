#include "urllc/sim.hpp"

#include "urllc/rng.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <iomanip>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>

namespace urllc::sim {

void SimConfig::validate() const {
    if (horizon == 0) throw std::invalid_argument("SimConfig: horizon must be positive");
    if (!(warmup_fraction >= 0.0 && warmup_fraction < 0.5)) throw std::invalid_argument("SimConfig: warmup must lie in [0, 0.5)");
    if (!(slot_s > 0.0)) throw std::invalid_argument("SimConfig: slot length must be positive");
    for (double t : tail_thresholds_s)
        if (!(t >= 0.0)) throw std::invalid_argument("SimConfig: tail thresholds must be nonnegative");
    if (target_eps && !(*target_eps > 0.0 && *target_eps < 1.0)) throw std::invalid_argument("SimConfig: target eps must lie in (0,1)");
}

std::string to_string(Outcome o) {
    switch (o) {
        case Outcome::delivered: return "delivered";
        case Outcome::decode_loss: return "decode_loss";
        case Outcome::deadline_loss: return "deadline_loss";
    }
    return "delivered";
}

namespace {

TailEstimate make_tail(std::size_t exceed, std::size_t n, std::optional<double> target) {
    const auto w = numerics::wilson_interval(exceed, n);
    return {w.estimate, w.lower, w.upper, exceed, n, target && double(n) < 100.0 / *target};
}

double quantile(std::vector<double> v, double q) {
    if (v.empty()) return 0.0;
    const auto k = std::size_t(std::min(double(v.size() - 1), std::floor(q * double(v.size()))));
    std::nth_element(v.begin(), v.begin() + std::ptrdiff_t(k), v.end());
    return v[k];
}

// Generates arrival epochs for the configured model.
class ArrivalStream {
public:
    ArrivalStream(ArrivalModel model, double rate, double slot_s, CounterRng rng)
        : model_(model), rate_(rate), slot_s_(slot_s), rng_(rng) {
        if (model == ArrivalModel::bernoulli) {
            p_ = rate * slot_s;
            if (p_ > 1.0) throw std::invalid_argument("bernoulli arrivals: rate times slot exceeds 1");
        }
    }

    double next() {
        switch (model_) {
            case ArrivalModel::poisson: t_ += -std::log1p(-rng_.uniform()) / rate_; break;
            case ArrivalModel::deterministic: t_ = double(count_) / rate_; break;
            case ArrivalModel::bernoulli: {
                // Slots until the next arrival, at least one after the previous.
                const double gap = p_ >= 1.0 ? 0.0 : std::floor(std::log1p(-rng_.uniform()) / std::log1p(-p_));
                slot_ += (count_ == 0 ? 0.0 : 1.0) + gap;
                t_ = slot_ * slot_s_;
                break;
            }
        }
        ++count_;
        return t_;
    }

private:
    ArrivalModel model_;
    double rate_;
    double slot_s_;
    CounterRng rng_;
    double p_ = 0.0;
    double t_ = 0.0;
    double slot_ = 0.0;
    std::size_t count_ = 0;
};

}  // namespace

TailEstimate tail_probability(std::span<const double> samples, double threshold, std::optional<double> target_eps) {
    if (samples.empty()) throw std::invalid_argument("tail_probability: no samples");
    const auto exceed = std::size_t(std::count_if(samples.begin(), samples.end(), [&](double x) { return x > threshold; }));
    return make_tail(exceed, samples.size(), target_eps);
}

QueueSimResult run_queue_sim(const qos::PoissonSource& src, double service_rate_bps, const SimConfig& cfg) {
    cfg.validate();
    if (!(service_rate_bps > 0.0)) throw std::invalid_argument("run_queue_sim: service rate must be positive");
    QueueSimResult out;
    auto& sum = out.summary;
    if (src.rate_pkts_per_s * src.packet_bits >= service_rate_bps) {
        sum.overloaded = true;
        sum.warning = "offered load is at or above the service rate; delays grow without bound";
    }

    const double service_s = src.packet_bits / service_rate_bps;
    const std::size_t warmup = std::size_t(double(cfg.horizon) * cfg.warmup_fraction);
    ArrivalStream arrivals(cfg.arrivals, src.rate_pkts_per_s, cfg.slot_s, CounterRng(cfg.seed, 1));
    const std::size_t thresholds = cfg.tail_thresholds_s.size();
    std::vector<std::size_t> wait_exceed(thresholds, 0), sojourn_exceed(thresholds, 0);

    double last_departure = -std::numeric_limits<double>::infinity();
    double window_start = 0.0, last_arrival = 0.0;
    double area = 0.0;  // integral of the number in system over the window
    double wait_sum = 0.0, sojourn_sum = 0.0;
    std::deque<double> recent;  // departures later than the latest arrival
    if (cfg.keep_samples) {
        out.waiting_s.reserve(cfg.horizon - warmup);
        out.sojourn_s.reserve(cfg.horizon - warmup);
    }

    for (std::size_t i = 0; i < cfg.horizon; ++i) {
        const double a = arrivals.next();
        while (!recent.empty() && recent.front() <= a) recent.pop_front();
        if (i == warmup) {
            // Warmup packets still in the system when the window opens.
            window_start = a;
            for (double d : recent) area += d - a;
        }
        const double start = std::max(a, last_departure);
        const double d = start + service_s;
        last_departure = d;
        last_arrival = a;
        recent.push_back(d);
        if (i >= warmup) {
            area += d - a;
            const double w = start - a, s = d - a;
            wait_sum += w;
            sojourn_sum += s;
            for (std::size_t k = 0; k < thresholds; ++k) {
                wait_exceed[k] += w > cfg.tail_thresholds_s[k];
                sojourn_exceed[k] += s > cfg.tail_thresholds_s[k];
            }
            if (cfg.keep_samples) {
                out.waiting_s.push_back(w);
                out.sojourn_s.push_back(s);
            }
        }
        if (cfg.keep_records) out.records.push_back({a, d, Outcome::delivered});
    }

    // Clip time spent in the system after the last arrival.
    const std::size_t n = cfg.horizon - warmup;
    sum.packets = n;
    const double span = last_arrival - window_start;
    for (double d : recent)
        if (d > last_arrival) area -= d - last_arrival;
    if (span > 0.0) {
        sum.arrival_rate_hat = double(n) / span;
        sum.mean_in_system = area / span;
    }
    sum.mean_waiting_s = wait_sum / double(n);
    sum.mean_sojourn_s = sojourn_sum / double(n);
    if (sum.mean_in_system > 0.0)
        sum.littles_law_rel_err =
            std::abs(sum.mean_in_system - sum.arrival_rate_hat * sum.mean_sojourn_s) / sum.mean_in_system;
    if (cfg.keep_samples) {
        sum.p50_sojourn_s = quantile(out.sojourn_s, 0.5);
        sum.p99_sojourn_s = quantile(out.sojourn_s, 0.99);
        sum.p999_sojourn_s = quantile(out.sojourn_s, 0.999);
    }
    for (std::size_t k = 0; k < thresholds; ++k) {
        sum.waiting_tails.push_back(make_tail(wait_exceed[k], n, cfg.target_eps));
        sum.sojourn_tails.push_back(make_tail(sojourn_exceed[k], n, cfg.target_eps));
    }
    return out;
}

LinkSimResult run_link_sim(const crosslayer::UserProfile& user, const crosslayer::SystemBudget& budget,
                           double bandwidth_hz, double power_w, const SimConfig& cfg, const LinkSimOptions& opts) {
    cfg.validate();
    if (!(bandwidth_hz > 0.0)) throw std::invalid_argument("run_link_sim: bandwidth must be positive");
    const auto demand = crosslayer::demand(user, budget);
    LinkSimResult out;
    out.service_rate_bps = demand.eb_bits_per_s;
    const double rate = opts.arrival_rate_override ? *opts.arrival_rate_override : user.source->rate_pkts_per_s;
    if (!(rate >= 0.0)) throw std::invalid_argument("run_link_sim: arrival rate must be nonnegative");
    if (rate == 0.0) return out;

    const double power = opts.power_override_w ? *opts.power_override_w : power_w;
    const double scale = crosslayer::snr_scale(user, budget, bandwidth_hz, power);
    const double frame_s = budget.frame_s();
    const double blocklength = frame_s * bandwidth_hz;
    const double frame_bits = demand.eb_bits_per_s * frame_s;
    const double service_s = 1.0 / demand.eb_pkts_per_s;
    const double d_q = budget.qos.queue_delay_s();
    const std::size_t warmup = std::size_t(double(cfg.horizon) * cfg.warmup_fraction);

    ArrivalStream arrivals(cfg.arrivals, rate, cfg.slot_s, CounterRng(cfg.seed, 1));
    CounterRng decode_rng(cfg.seed, 2);
    const CounterRng fade_keys(cfg.seed, 3);
    const auto& fading = budget.fading;
    std::gamma_distribution<double> gamma(fading.is_deterministic() ? 1.0 : fading.shape(), 1.0);
    std::int64_t cached_frame = -1;
    double cached_eps = 0.0;

    double server_free = 0.0;
    std::size_t transmitted = 0;
    for (std::size_t i = 0; i < cfg.horizon; ++i) {
        const double a = arrivals.next();
        const double start = std::max(a, server_free);
        Outcome outcome;
        double end;
        if (start - a > d_q) {
            outcome = Outcome::deadline_loss;
            end = a + d_q;
        } else {
            server_free = start + service_s;
            end = server_free;
            const auto frame = std::int64_t(std::floor(start / frame_s));
            if (frame != cached_frame) {
                double g = fading.gain();
                if (!fading.is_deterministic()) {
                    CounterRng frame_rng(fade_keys.at(std::uint64_t(frame)), 0);
                    gamma.reset();
                    g = gamma(frame_rng);
                }
                cached_eps = std::isinf(scale) ? 0.0 : fbl::decoding_error(blocklength, scale * g, frame_bits, opts.dispersion);
                cached_frame = frame;
            }
            const bool ok = decode_rng.uniform() >= cached_eps;
            outcome = ok ? Outcome::delivered : Outcome::decode_loss;
        }
        if (cfg.keep_records) out.records.push_back({a, end, outcome});
        if (i < warmup) continue;
        ++out.packets;
        if (outcome == Outcome::deadline_loss) {
            ++out.deadline_losses;
        } else {
            ++transmitted;
            if (outcome == Outcome::decode_loss) ++out.decode_losses;
        }
    }
    if (out.packets == 0) return out;
    out.eps_c_hat = transmitted ? double(out.decode_losses) / double(transmitted) : 0.0;
    out.eps_q_hat = double(out.deadline_losses) / double(out.packets);
    out.eps_tot_hat = double(out.decode_losses + out.deadline_losses) / double(out.packets);
    out.overlap = out.eps_c_hat * out.eps_q_hat;
    out.eps_tot_independent = out.eps_c_hat + out.eps_q_hat - out.overlap;
    out.eps_tot_interval = numerics::wilson_interval(out.decode_losses + out.deadline_losses, out.packets);
    return out;
}

void write_records_csv(std::ostream& out, const std::vector<PacketRecord>& records) {
    out << "arrival_s,departure_s,outcome\n" << std::setprecision(17);
    for (const auto& r : records) out << r.arrival_s << ',' << r.departure_s << ',' << to_string(r.outcome) << '\n';
}

}  // namespace urllc::sim
