#pragma once

#include "urllc/fbl.hpp"
#include "urllc/numerics.hpp"
#include "urllc/qos.hpp"

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace urllc::crosslayer {

class Infeasible : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class QuadratureNotConverged : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ServiceClass { urllc, delay_tolerant };

struct UserProfile {
    double large_scale_gain = 0.0;
    ServiceClass service = ServiceClass::urllc;
    std::optional<qos::PoissonSource> source;  // URLLC traffic
    double mean_rate_bps = 0.0;                // delay-tolerant traffic
    std::optional<double> fixed_power_w;       // bandwidth-only problem

    static UserProfile urllc(double gain, qos::PoissonSource src, std::optional<double> fixed_power_w = {});
    static UserProfile delay_tolerant(double gain, double mean_rate_bps);

    /// Throws std::invalid_argument if the traffic descriptor does not match the class.
    void validate() const;
};

/// Distribution of the small-scale gain g. Gamma(N_T, 1) models maximum-ratio
/// combining over N_T antennas; the deterministic variant pins g to a constant.
class FadingModel {
public:
    static FadingModel gamma(double shape);
    static FadingModel deterministic(double gain);

    bool is_deterministic() const { return deterministic_; }
    double shape() const { return shape_; }
    double gain() const { return gain_; }

    template <typename F>
    double mean(F&& f, std::size_t order) const {
        return deterministic_ ? f(gain_) : numerics::gamma_mean(f, shape_, order);
    }

    template <typename F>
    numerics::GammaExpectation verified_mean(F&& f, std::size_t order) const {
        if (deterministic_) {
            const double v = f(gain_);
            return {v, v, true};
        }
        return numerics::expect_gamma(f, shape_, order);
    }

private:
    FadingModel(bool deterministic, double shape, double gain)
        : deterministic_(deterministic), shape_(shape), gain_(gain) {}

    bool deterministic_;
    double shape_;
    double gain_;
};

struct SystemBudget {
    double total_bandwidth_hz;
    int antennas;
    double noise_psd_w_per_hz;
    qos::QosTarget qos;
    FadingModel fading;

    /// Fading defaults to Gamma(antennas, 1). Throws std::invalid_argument on
    /// nonpositive fields.
    SystemBudget(double total_bandwidth_hz, int antennas, double noise_psd_w_per_hz, qos::QosTarget qos);

    double frame_s() const { return qos.frame_s(); }
};

struct SolverOptions {
    std::size_t quadrature_order = 128;
    double power_cap_w = 1e6;
    double power_rel_tol = 1e-4;
    double bandwidth_rel_tol = 1e-9;
    double bandwidth_cap_hz = 1e10;
    std::size_t grid_points = 200;
    bool refine = true;
    std::size_t refine_sweeps = 6;
    /// Dispersion used by the achievable rate in the bandwidth problem.
    fbl::Dispersion rate_dispersion = fbl::Dispersion::exact;
};

/// Effective bandwidth and QoS exponent of a URLLC user under the budget's target.
struct Demand {
    double eb_pkts_per_s;
    double eb_bits_per_s;
    double theta_per_bit;
    double frame_s;
    /// theta * T_f, the per-frame exponent multiplying a rate in bits/s.
    double frame_theta() const { return theta_per_bit * frame_s; }
};

/// Throws std::invalid_argument if the user is not URLLC.
Demand demand(const UserProfile& user, const SystemBudget& budget);

/// SNR scale alpha P / (W N0 N_T); the instantaneous SNR is this times g.
double snr_scale(const UserProfile& user, const SystemBudget& budget, double bandwidth_hz, double power_w);

// ---------------------------------------------------------------- power problem

/// E_g{ Q( sqrt(T_f W) [ln(1 + alpha g P/(W N0 N_T)) - u0 E_B ln2 / W] ) }, the
/// decoding error with unit dispersion averaged over the fading.
double decoding_outage(const UserProfile& user, const SystemBudget& budget, double bandwidth_hz, double power_w,
                       const SolverOptions& opts = {});

/// decoding_outage - eps_c. Negative means satisfied. With `verify`, the
/// expectation is re-evaluated at twice the order and QuadratureNotConverged
/// is thrown if it moves by more than the convergence tolerance.
double urllc_constraint_gap(const UserProfile& user, const SystemBudget& budget, double bandwidth_hz,
                            double power_w, const SolverOptions& opts = {}, bool verify = false);

struct PowerSolution {
    double power_w;
    double gap;  // constraint gap at power_w (<= 0); for delay-tolerant users: achieved - required rate
};

/// Smallest power with decoding_outage <= target. Throws Infeasible beyond the cap.
PowerSolution min_power_for_target(const UserProfile& user, const SystemBudget& budget, double bandwidth_hz,
                                   double target, const SolverOptions& opts = {});

/// min_power_for_target at the budget's eps_c.
PowerSolution min_power_for_user(const UserProfile& user, const SystemBudget& budget, double bandwidth_hz,
                                 const SolverOptions& opts = {});

/// E_g{ W log2(1 + alpha g P/(W N0 N_T)) }.
double mean_shannon_rate(const UserProfile& user, const SystemBudget& budget, double bandwidth_hz, double power_w,
                         const SolverOptions& opts = {});

/// Smallest power whose mean Shannon rate reaches the user's mean arrival rate.
PowerSolution delay_tolerant_min_power(const UserProfile& user, const SystemBudget& budget, double bandwidth_hz,
                                       const SolverOptions& opts = {});

/// Minimum power of either class at the given bandwidth.
PowerSolution min_power_any(const UserProfile& user, const SystemBudget& budget, double bandwidth_hz,
                            const SolverOptions& opts = {});

struct Allocation {
    std::vector<double> bandwidth_hz;
    std::vector<double> power_w;
    std::vector<bool> feasible;
    std::vector<double> margin;  // URLLC: -gap; delay-tolerant: achieved - required rate
    double total_power_w = 0.0;
};

/// Minimizes total power subject to sum W_k <= W_max. Bandwidth is first
/// placed on a grid of `grid_points` levels per user (exact discrete optimum by
/// dynamic programming), then refined by pairwise coordinate descent.
/// Throws Infeasible if some user cannot be served even with all of W_max.
Allocation min_total_power_allocation(const std::vector<UserProfile>& users, const SystemBudget& budget,
                                      const SolverOptions& opts = {});

struct SplitExperiment {
    std::vector<double> decoding_fractions;  // eps_c / eps_tot per grid point
    std::vector<double> total_power_w;       // +inf where infeasible
    double equal_split_power_w;
    double best_power_w;
    double best_fraction;
    double relative_gap;  // (equal - best) / best
};

/// Re-optimizes the allocation over a grid of decoding/queueing loss splits.
SplitExperiment optimize_loss_split(const std::vector<UserProfile>& users, const SystemBudget& budget,
                                    const std::vector<double>& decoding_fractions, const SolverOptions& opts = {});

// ------------------------------------------------------------ bandwidth problem

/// Achievable rate (bits/s) with fixed power at bandwidth W and gain g,
/// clamped at zero.
double achievable_rate(const UserProfile& user, const SystemBudget& budget, double bandwidth_hz, double gain,
                       const SolverOptions& opts = {});

/// E_g{exp(-theta T_f s)} - exp(-theta T_f E_B u0). Requires fixed_power_w.
double qos_constraint(const UserProfile& user, const SystemBudget& budget, double bandwidth_hz,
                      const SolverOptions& opts = {});

/// Normalized constraint E_g{exp(theta T_f (E_B u0 - s))} - 1 and its
/// derivative in W. Same sign as qos_constraint.
struct RelativeConstraint {
    double value;
    double derivative;
};
RelativeConstraint relative_constraint(const UserProfile& user, const SystemBudget& budget, double bandwidth_hz,
                                       const SolverOptions& opts = {});

struct BandwidthSolution {
    double bandwidth_hz;
    double constraint;     // qos_constraint at the solution (<= 0)
    bool used_dense_scan;  // bracket was not monotone
    std::string warning;
};

/// Smallest W satisfying the effective-capacity constraint. Throws Infeasible
/// if no W up to bandwidth_cap_hz works.
BandwidthSolution min_bandwidth_for_user(const UserProfile& user, const SystemBudget& budget,
                                         const SolverOptions& opts = {});

/// max{ E_g{exp(theta T_f (E_B u0 - s_hat))} - 1, 0 }.
double relative_qos_error(double bandwidth_hz, const UserProfile& user, const SystemBudget& budget,
                          const SolverOptions& opts = {});

}  // namespace urllc::crosslayer
