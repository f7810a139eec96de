#include "urllc/crosslayer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

namespace urllc::crosslayer {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_positive_bandwidth(double bandwidth_hz) {
    if (!(bandwidth_hz > 0.0)) throw std::invalid_argument("bandwidth must be positive");
}

// Geometric bisection for the smallest power at which gap(P) <= 0. gap must be
// nonincreasing in P.
template <typename Gap>
PowerSolution bisect_power(Gap&& gap, double guess, const SolverOptions& opts) {
    const double at_zero = gap(0.0);
    if (at_zero <= 0.0) return {0.0, at_zero};

    const double cap = opts.power_cap_w;
    double hi = (std::isfinite(guess) && guess > 0.0) ? std::min(guess, cap) : std::min(1.0, cap);
    double lo;
    double gap_hi = gap(hi);
    if (gap_hi <= 0.0) {
        lo = hi;
        double gap_lo = gap_hi;
        while (gap_lo <= 0.0) {
            hi = lo;
            gap_hi = gap_lo;
            lo /= 4.0;
            if (lo < 1e-300) return {hi, gap_hi};
            gap_lo = gap(lo);
        }
    } else {
        do {
            lo = hi;
            if (hi >= cap) throw Infeasible("no power up to the cap satisfies the constraint");
            hi = std::min(hi * 4.0, cap);
            gap_hi = gap(hi);
        } while (gap_hi > 0.0);
    }
    while (hi / lo - 1.0 > opts.power_rel_tol) {
        const double mid = std::sqrt(lo * hi);
        const double g = gap(mid);
        if (g <= 0.0) {
            hi = mid;
            gap_hi = g;
        } else {
            lo = mid;
        }
    }
    return {hi, gap_hi};
}

double mean_gain(const FadingModel& fading) {
    return fading.is_deterministic() ? fading.gain() : fading.shape();
}

}  // namespace

UserProfile UserProfile::urllc(double gain, qos::PoissonSource src, std::optional<double> fixed_power_w) {
    UserProfile u;
    u.large_scale_gain = gain;
    u.service = ServiceClass::urllc;
    u.source = src;
    u.fixed_power_w = fixed_power_w;
    u.validate();
    return u;
}

UserProfile UserProfile::delay_tolerant(double gain, double mean_rate_bps) {
    UserProfile u;
    u.large_scale_gain = gain;
    u.service = ServiceClass::delay_tolerant;
    u.mean_rate_bps = mean_rate_bps;
    u.validate();
    return u;
}

void UserProfile::validate() const {
    if (!(large_scale_gain > 0.0)) throw std::invalid_argument("UserProfile: large-scale gain must be positive");
    if (service == ServiceClass::urllc) {
        if (!source) throw std::invalid_argument("UserProfile: URLLC user needs a Poisson source");
        if (mean_rate_bps != 0.0) throw std::invalid_argument("UserProfile: URLLC user must not set a mean rate");
    } else {
        if (source) throw std::invalid_argument("UserProfile: delay-tolerant user must not set a Poisson source");
        if (!(mean_rate_bps >= 0.0)) throw std::invalid_argument("UserProfile: mean rate must be nonnegative");
    }
    if (fixed_power_w && !(*fixed_power_w > 0.0)) throw std::invalid_argument("UserProfile: fixed power must be positive");
}

FadingModel FadingModel::gamma(double shape) {
    if (!(shape > 0.0)) throw std::invalid_argument("FadingModel: shape must be positive");
    return FadingModel(false, shape, 0.0);
}

FadingModel FadingModel::deterministic(double gain) {
    if (!(gain > 0.0)) throw std::invalid_argument("FadingModel: gain must be positive");
    return FadingModel(true, 0.0, gain);
}

SystemBudget::SystemBudget(double total_bandwidth_hz_, int antennas_, double noise_psd_w_per_hz_, qos::QosTarget qos_)
    : total_bandwidth_hz(total_bandwidth_hz_),
      antennas(antennas_),
      noise_psd_w_per_hz(noise_psd_w_per_hz_),
      qos(qos_),
      fading(FadingModel::gamma(antennas_ > 0 ? antennas_ : 1)) {
    if (!(total_bandwidth_hz > 0.0)) throw std::invalid_argument("SystemBudget: total bandwidth must be positive");
    if (antennas < 1) throw std::invalid_argument("SystemBudget: need at least one antenna");
    if (!(noise_psd_w_per_hz > 0.0)) throw std::invalid_argument("SystemBudget: noise PSD must be positive");
}

Demand demand(const UserProfile& user, const SystemBudget& budget) {
    if (user.service != ServiceClass::urllc || !user.source)
        throw std::invalid_argument("demand: user is not a URLLC user");
    const double eb = qos::effective_bandwidth_poisson(*user.source, budget.qos);
    const double eb_bits = eb * user.source->packet_bits;
    return {eb, eb_bits, qos::qos_exponent(eb_bits, budget.qos).value, budget.frame_s()};
}

double snr_scale(const UserProfile& user, const SystemBudget& budget, double bandwidth_hz, double power_w) {
    return user.large_scale_gain * power_w / (bandwidth_hz * budget.noise_psd_w_per_hz * budget.antennas);
}

// ---------------------------------------------------------------- power problem

double decoding_outage(const UserProfile& user, const SystemBudget& budget, double bandwidth_hz, double power_w,
                       const SolverOptions& opts) {
    require_positive_bandwidth(bandwidth_hz);
    const Demand d = demand(user, budget);
    const double root_blocklength = std::sqrt(budget.frame_s() * bandwidth_hz);
    const double required = d.eb_bits_per_s * std::numbers::ln2 / bandwidth_hz;
    const double scale = snr_scale(user, budget, bandwidth_hz, power_w);
    return budget.fading.mean(
        [&](double g) { return numerics::q_func(root_blocklength * (std::log1p(scale * g) - required)); },
        opts.quadrature_order);
}

double urllc_constraint_gap(const UserProfile& user, const SystemBudget& budget, double bandwidth_hz,
                            double power_w, const SolverOptions& opts, bool verify) {
    if (!verify) return decoding_outage(user, budget, bandwidth_hz, power_w, opts) - budget.qos.eps_c();

    require_positive_bandwidth(bandwidth_hz);
    const Demand d = demand(user, budget);
    const double root_blocklength = std::sqrt(budget.frame_s() * bandwidth_hz);
    const double required = d.eb_bits_per_s * std::numbers::ln2 / bandwidth_hz;
    const double scale = snr_scale(user, budget, bandwidth_hz, power_w);
    const auto e = budget.fading.verified_mean(
        [&](double g) { return numerics::q_func(root_blocklength * (std::log1p(scale * g) - required)); },
        opts.quadrature_order);
    if (!e.converged) throw QuadratureNotConverged("urllc_constraint_gap: expectation did not converge");
    return e.value - budget.qos.eps_c();
}

PowerSolution min_power_for_target(const UserProfile& user, const SystemBudget& budget, double bandwidth_hz,
                                   double target, const SolverOptions& opts) {
    require_positive_bandwidth(bandwidth_hz);
    if (!(target > 0.0 && target < 1.0)) throw numerics::DomainError("min_power_for_target: target must lie in (0,1)");
    const Demand d = demand(user, budget);
    const double blocklength = budget.frame_s() * bandwidth_hz;
    const double required = d.eb_bits_per_s * std::numbers::ln2 / bandwidth_hz;
    const double unit_scale = snr_scale(user, budget, bandwidth_hz, 1.0);
    const double exponent = required + numerics::q_func_inv(target) / std::sqrt(blocklength);
    const double guess = std::expm1(exponent) / (unit_scale * mean_gain(budget.fading));

    const double root_blocklength = std::sqrt(blocklength);
    auto gap = [&](double power) {
        const double scale = unit_scale * power;
        return budget.fading.mean(
                   [&](double g) { return numerics::q_func(root_blocklength * (std::log1p(scale * g) - required)); },
                   opts.quadrature_order) -
               target;
    };
    return bisect_power(gap, guess, opts);
}

PowerSolution min_power_for_user(const UserProfile& user, const SystemBudget& budget, double bandwidth_hz,
                                 const SolverOptions& opts) {
    return min_power_for_target(user, budget, bandwidth_hz, budget.qos.eps_c(), opts);
}

double mean_shannon_rate(const UserProfile& user, const SystemBudget& budget, double bandwidth_hz, double power_w,
                         const SolverOptions& opts) {
    require_positive_bandwidth(bandwidth_hz);
    const double scale = snr_scale(user, budget, bandwidth_hz, power_w);
    return bandwidth_hz / std::numbers::ln2 *
           budget.fading.mean([&](double g) { return std::log1p(scale * g); }, opts.quadrature_order);
}

PowerSolution delay_tolerant_min_power(const UserProfile& user, const SystemBudget& budget, double bandwidth_hz,
                                       const SolverOptions& opts) {
    require_positive_bandwidth(bandwidth_hz);
    if (user.service != ServiceClass::delay_tolerant)
        throw std::invalid_argument("delay_tolerant_min_power: user is not delay-tolerant");
    const double required = user.mean_rate_bps;
    if (required == 0.0) return {0.0, 0.0};
    const double unit_scale = snr_scale(user, budget, bandwidth_hz, 1.0);
    const double guess = std::expm1(required / bandwidth_hz * std::numbers::ln2) / (unit_scale * mean_gain(budget.fading));
    auto gap = [&](double power) { return required - mean_shannon_rate(user, budget, bandwidth_hz, power, opts); };
    PowerSolution s = bisect_power(gap, guess, opts);
    s.gap = -s.gap;
    return s;
}

PowerSolution min_power_any(const UserProfile& user, const SystemBudget& budget, double bandwidth_hz,
                            const SolverOptions& opts) {
    return user.service == ServiceClass::urllc ? min_power_for_user(user, budget, bandwidth_hz, opts)
                                               : delay_tolerant_min_power(user, budget, bandwidth_hz, opts);
}

namespace {

double power_or_inf(const UserProfile& user, const SystemBudget& budget, double bandwidth_hz,
                    const SolverOptions& opts) {
    if (!(bandwidth_hz > 0.0)) return kInf;
    try {
        return min_power_any(user, budget, bandwidth_hz, opts).power_w;
    } catch (const Infeasible&) {
        return kInf;
    }
}

// Minimizes phi on [a, b] by golden-section search; phi is assumed unimodal.
template <typename Phi>
std::pair<double, double> golden_min(Phi&& phi, double a, double b, double tol) {
    const double r = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = b - r * (b - a), x2 = a + r * (b - a);
    double f1 = phi(x1), f2 = phi(x2);
    while (b - a > tol) {
        if (f1 <= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = phi(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = phi(x2);
        }
    }
    return f1 <= f2 ? std::pair{x1, f1} : std::pair{x2, f2};
}

}  // namespace

Allocation min_total_power_allocation(const std::vector<UserProfile>& users, const SystemBudget& budget,
                                      const SolverOptions& opts) {
    if (users.empty()) throw std::invalid_argument("min_total_power_allocation: no users");
    const std::size_t k_users = users.size();
    const std::size_t grid = std::max<std::size_t>(opts.grid_points, k_users);
    const double w_max = budget.total_bandwidth_hz;
    const double step = w_max / double(grid);

    for (std::size_t k = 0; k < k_users; ++k) {
        users[k].validate();
        if (!std::isfinite(power_or_inf(users[k], budget, w_max, opts)))
            throw Infeasible("min_total_power_allocation: user " + std::to_string(k) +
                             " is infeasible even with the whole bandwidth");
    }

    // cost[k][j]: minimum power of user k with j grid steps of bandwidth.
    std::vector<std::vector<double>> cost(k_users, std::vector<double>(grid + 1, kInf));
    for (std::size_t k = 0; k < k_users; ++k)
        for (std::size_t j = 1; j <= grid; ++j) cost[k][j] = power_or_inf(users[k], budget, step * double(j), opts);

    // best[k][u]: least total power of users 0..k using exactly u steps.
    std::vector<std::vector<double>> best(k_users, std::vector<double>(grid + 1, kInf));
    std::vector<std::vector<std::size_t>> choice(k_users, std::vector<std::size_t>(grid + 1, 0));
    for (std::size_t u = 1; u <= grid; ++u) {
        best[0][u] = cost[0][u];
        choice[0][u] = u;
    }
    for (std::size_t k = 1; k < k_users; ++k) {
        for (std::size_t u = 1; u <= grid; ++u) {
            for (std::size_t j = 1; j < u; ++j) {
                const double total = best[k - 1][u - j] + cost[k][j];
                if (total < best[k][u]) {
                    best[k][u] = total;
                    choice[k][u] = j;
                }
            }
        }
    }
    std::size_t used = 0;
    for (std::size_t u = 1; u <= grid; ++u)
        if (best[k_users - 1][u] < (used ? best[k_users - 1][used] : kInf)) used = u;
    if (used == 0) throw Infeasible("min_total_power_allocation: no feasible bandwidth split on the grid");

    Allocation alloc;
    alloc.bandwidth_hz.assign(k_users, 0.0);
    alloc.power_w.assign(k_users, 0.0);
    for (std::size_t k = k_users; k-- > 0;) {
        const std::size_t j = choice[k][used];
        alloc.bandwidth_hz[k] = step * double(j);
        alloc.power_w[k] = cost[k][j];
        used -= j;
    }

    if (opts.refine && k_users > 0) {
        // Hand unused bandwidth to whichever user benefits most.
        const double sum = std::accumulate(alloc.bandwidth_hz.begin(), alloc.bandwidth_hz.end(), 0.0);
        const double spare = w_max - sum;
        if (spare > step * 1e-9) {
            std::size_t pick = k_users;
            double gain = 0.0;
            for (std::size_t k = 0; k < k_users; ++k) {
                const double p = power_or_inf(users[k], budget, alloc.bandwidth_hz[k] + spare, opts);
                if (alloc.power_w[k] - p > gain) {
                    gain = alloc.power_w[k] - p;
                    pick = k;
                }
            }
            if (pick < k_users) {
                alloc.bandwidth_hz[pick] += spare;
                alloc.power_w[pick] -= gain;
            }
        }

        // Pairwise coordinate descent: move bandwidth between two users.
        double radius = step;
        for (std::size_t sweep = 0; sweep < opts.refine_sweeps; ++sweep) {
            bool improved = false;
            for (std::size_t a = 0; a < k_users; ++a) {
                for (std::size_t b = a + 1; b < k_users; ++b) {
                    const double wa = alloc.bandwidth_hz[a], wb = alloc.bandwidth_hz[b];
                    const double before = alloc.power_w[a] + alloc.power_w[b];
                    const double lo = -std::min(radius, 0.999 * wa), hi = std::min(radius, 0.999 * wb);
                    auto phi = [&](double delta) {
                        return power_or_inf(users[a], budget, wa + delta, opts) +
                               power_or_inf(users[b], budget, wb - delta, opts);
                    };
                    const auto [delta, after] = golden_min(phi, lo, hi, 1e-7 * w_max);
                    if (after < before * (1.0 - 1e-10)) {
                        alloc.bandwidth_hz[a] = wa + delta;
                        alloc.bandwidth_hz[b] = wb - delta;
                        alloc.power_w[a] = power_or_inf(users[a], budget, wa + delta, opts);
                        alloc.power_w[b] = power_or_inf(users[b], budget, wb - delta, opts);
                        improved = true;
                    }
                }
            }
            if (!improved) break;
            radius /= 2.0;
        }
    }

    alloc.feasible.assign(k_users, true);
    alloc.margin.assign(k_users, 0.0);
    alloc.total_power_w = 0.0;
    for (std::size_t k = 0; k < k_users; ++k) {
        const auto& u = users[k];
        if (u.service == ServiceClass::urllc) {
            const double gap = urllc_constraint_gap(u, budget, alloc.bandwidth_hz[k], alloc.power_w[k], opts);
            alloc.margin[k] = -gap;
            alloc.feasible[k] = gap <= 0.0;
        } else {
            const double achieved = mean_shannon_rate(u, budget, alloc.bandwidth_hz[k], alloc.power_w[k], opts);
            alloc.margin[k] = achieved - u.mean_rate_bps;
            alloc.feasible[k] = alloc.margin[k] >= -1e-9 * std::max(1.0, u.mean_rate_bps);
        }
        alloc.total_power_w += alloc.power_w[k];
    }
    return alloc;
}

SplitExperiment optimize_loss_split(const std::vector<UserProfile>& users, const SystemBudget& budget,
                                    const std::vector<double>& decoding_fractions, const SolverOptions& opts) {
    const double eps = budget.qos.overall_loss();
    auto total_for = [&](double fraction) {
        SystemBudget b = budget;
        b.qos = budget.qos.with_split({fraction * eps, (1.0 - fraction) * eps, 0.0});
        try {
            return min_total_power_allocation(users, b, opts).total_power_w;
        } catch (const Infeasible&) {
            return kInf;
        }
    };
    SplitExperiment out;
    out.decoding_fractions = decoding_fractions;
    out.equal_split_power_w = total_for(0.5);
    out.best_power_w = out.equal_split_power_w;
    out.best_fraction = 0.5;
    for (double f : decoding_fractions) {
        const double p = f == 0.5 ? out.equal_split_power_w : total_for(f);
        out.total_power_w.push_back(p);
        if (p < out.best_power_w) {
            out.best_power_w = p;
            out.best_fraction = f;
        }
    }
    out.relative_gap = (out.equal_split_power_w - out.best_power_w) / out.best_power_w;
    return out;
}

// ------------------------------------------------------------ bandwidth problem

namespace {

struct RateTerms {
    double rate;        // bits/s, clamped at zero
    double derivative;  // d rate / d W
};

RateTerms rate_terms(double bandwidth_hz, double frame_s, double snr_numerator, double qinv,
                     fbl::Dispersion dispersion) {
    const double w = bandwidth_hz;
    const double snr = snr_numerator / w;
    const double dsnr = -snr / w;
    const bool unit = dispersion == fbl::Dispersion::unit;
    const double inv = 1.0 / (1.0 + snr);
    const double v = unit ? 1.0 : 1.0 - inv * inv;
    const double dv = unit ? 0.0 : 2.0 * inv * inv * inv * dsnr;
    const double blocklength = frame_s * w;
    const double root = std::sqrt(v / blocklength);
    const double per_symbol = (std::log1p(snr) - root * qinv) / std::numbers::ln2;
    const double rate = w * per_symbol;
    if (rate <= 0.0) return {0.0, 0.0};
    const double droot = root > 0.0 ? (dv / blocklength - v / (blocklength * w)) / (2.0 * root) : 0.0;
    const double dper_symbol = (dsnr * inv - qinv * droot) / std::numbers::ln2;
    return {rate, per_symbol + w * dper_symbol};
}

double require_fixed_power(const UserProfile& user) {
    if (!user.fixed_power_w) throw std::invalid_argument("bandwidth problem: user has no fixed power");
    return *user.fixed_power_w;
}

}  // namespace

double achievable_rate(const UserProfile& user, const SystemBudget& budget, double bandwidth_hz, double gain,
                       const SolverOptions& opts) {
    require_positive_bandwidth(bandwidth_hz);
    const double numerator = snr_scale(user, budget, 1.0, require_fixed_power(user)) * gain;
    const double qinv = numerics::q_func_inv(budget.qos.eps_c());
    return rate_terms(bandwidth_hz, budget.frame_s(), numerator, qinv, opts.rate_dispersion).rate;
}

double qos_constraint(const UserProfile& user, const SystemBudget& budget, double bandwidth_hz,
                      const SolverOptions& opts) {
    require_positive_bandwidth(bandwidth_hz);
    const Demand d = demand(user, budget);
    const double x = d.frame_theta();
    const double numerator = snr_scale(user, budget, 1.0, require_fixed_power(user));
    const double qinv = numerics::q_func_inv(budget.qos.eps_c());
    const double mean = budget.fading.mean(
        [&](double g) {
            return std::exp(-x * rate_terms(bandwidth_hz, budget.frame_s(), numerator * g, qinv, opts.rate_dispersion).rate);
        },
        opts.quadrature_order);
    return mean - std::exp(-x * d.eb_bits_per_s);
}

RelativeConstraint relative_constraint(const UserProfile& user, const SystemBudget& budget, double bandwidth_hz,
                                       const SolverOptions& opts) {
    require_positive_bandwidth(bandwidth_hz);
    const Demand d = demand(user, budget);
    const double x = d.frame_theta();
    const double numerator = snr_scale(user, budget, 1.0, require_fixed_power(user));
    const double qinv = numerics::q_func_inv(budget.qos.eps_c());
    const auto rule = budget.fading.is_deterministic()
                          ? std::make_shared<const numerics::QuadratureRule>(
                                numerics::QuadratureRule{{budget.fading.gain()}, {1.0}})
                          : numerics::gauss_laguerre(opts.quadrature_order, budget.fading.shape() - 1.0);
    double value = 0.0, derivative = 0.0;
    for (std::size_t i = 0; i < rule->order(); ++i) {
        const RateTerms t =
            rate_terms(bandwidth_hz, budget.frame_s(), numerator * rule->nodes[i], qinv, opts.rate_dispersion);
        const double e = std::exp(x * (d.eb_bits_per_s - t.rate));
        value += rule->weights[i] * e;
        derivative += rule->weights[i] * e * (-x) * t.derivative;
    }
    return {value - 1.0, derivative};
}

double relative_qos_error(double bandwidth_hz, const UserProfile& user, const SystemBudget& budget,
                          const SolverOptions& opts) {
    return std::max(relative_constraint(user, budget, bandwidth_hz, opts).value, 0.0);
}

BandwidthSolution min_bandwidth_for_user(const UserProfile& user, const SystemBudget& budget,
                                         const SolverOptions& opts) {
    const Demand d = demand(user, budget);
    require_fixed_power(user);
    auto h = [&](double w) { return qos_constraint(user, budget, w, opts); };

    BandwidthSolution out{0.0, 0.0, false, {}};
    double lo = 0.0, hi = 0.0;
    double w = std::max(d.eb_bits_per_s, 1.0);
    double hw = h(w);
    if (hw <= 0.0) {
        hi = w;
        while (true) {
            const double down = w / 2.0;
            if (down < 1e-6) return {w, hw, false, {}};
            const double hd = h(down);
            if (hd > 0.0) {
                lo = down;
                break;
            }
            w = down;
            hw = hd;
            hi = w;
        }
    } else {
        double prev = hw;
        bool monotone = true;
        while (true) {
            const double up = w * 2.0;
            if (up > opts.bandwidth_cap_hz) break;
            const double hu = h(up);
            if (hu <= 0.0) {
                lo = w;
                hi = up;
                break;
            }
            if (hu > prev) {
                monotone = false;
                break;
            }
            prev = hu;
            w = up;
        }
        if (hi == 0.0) {
            // Either the bracket stopped decreasing or the cap was reached; scan densely.
            out.used_dense_scan = true;
            out.warning = monotone ? "bandwidth cap reached while bracketing; dense scan fallback"
                                   : "constraint not monotone in bandwidth; dense scan fallback";
            const std::size_t points = 10000;
            const double start = std::max(d.eb_bits_per_s, 1.0) / 1e3;
            const double ratio = std::pow(opts.bandwidth_cap_hz / start, 1.0 / double(points - 1));
            double prev_w = start;
            double cur = start;
            for (std::size_t i = 0; i < points; ++i, prev_w = cur, cur *= ratio) {
                if (h(cur) <= 0.0) {
                    lo = prev_w;
                    hi = cur;
                    break;
                }
            }
            if (hi == 0.0) throw Infeasible("min_bandwidth_for_user: no bandwidth satisfies the QoS constraint");
        }
    }
    while (hi - lo > opts.bandwidth_rel_tol * hi) {
        const double mid = 0.5 * (lo + hi);
        if (h(mid) <= 0.0)
            hi = mid;
        else
            lo = mid;
    }
    out.bandwidth_hz = hi;
    out.constraint = h(hi);
    return out;
}

}  // namespace urllc::crosslayer
