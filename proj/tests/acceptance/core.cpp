// Link-level, queueing, optimizer, shaping and numerical criteria.

#include "acceptance.hpp"
#include "oracles.hpp"

#include "urllc/crosslayer.hpp"
#include "urllc/fbl.hpp"
#include "urllc/neural.hpp"
#include "urllc/numerics.hpp"
#include "urllc/qos.hpp"
#include "urllc/reliability.hpp"
#include "urllc/rng.hpp"
#include "urllc/scenario.hpp"
#include "urllc/sched.hpp"
#include "urllc/sim.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>

namespace urllc::acceptance {

double median(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

namespace {

double log_uniform(CounterRng& rng, double lo, double hi) { return lo * std::pow(hi / lo, rng.uniform()); }

}  // namespace

// Rate for a target error and error for the resulting payload invert each other.
Verdict ac1() {
    CounterRng rng(101, 0);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const double snr = log_uniform(rng, 0.1, 100.0);
        const double w = log_uniform(rng, 1e4, 1e7);
        const double dt = log_uniform(rng, 1e-4, 1e-2);
        const double eps = log_uniform(rng, 1e-8, 0.4);
        const fbl::LinkConfig link(w, snr, dt, 1.0);
        const double bits = fbl::na_rate(link, eps) * dt;
        const double back = fbl::decoding_error(link.blocklength(), snr, bits);
        worst = std::max(worst, std::abs(back - eps) / eps);
    }

    // Long-block limit at the reference error 1e-5, SNR from 3 to 100.
    double gap = 0.0;
    for (int i = 0; i <= 50; ++i) {
        const double snr = 3.0 * std::pow(100.0 / 3.0, i / 50.0);
        const fbl::LinkConfig link(1e7, snr, 1.0, 1.0);
        gap = std::max(gap, 1.0 - fbl::na_rate(link, 1e-5) / fbl::shannon_rate(link));
    }
    const bool pass = worst < 1e-9 && gap < 1e-3;
    return {pass, fmt("round_trip_max_rel=%.3e (<1e-9) shannon_gap_max=%.4f%% (<0.1%%)", worst, 100.0 * gap)};
}

// Constant-rate service at the effective bandwidth keeps the waiting-time tail
// within a factor 5 of the target.
Verdict ac2() {
    const double lambda = 1000.0, bits = 160.0;
    const qos::PoissonSource src(lambda, bits);
    bool pass = true;
    std::string detail;
    for (double dq : {5e-3, 10e-3})
        for (double eps : {1e-2, 1e-3}) {
            const double eb = qos::effective_bandwidth_poisson(lambda, dq, eps);
            sim::SimConfig cfg;
            cfg.seed = 7;
            cfg.warmup_fraction = 0.05;
            cfg.horizon = std::size_t(std::ceil(1e7 / (1.0 - cfg.warmup_fraction))) + 1;
            cfg.keep_samples = false;
            cfg.tail_thresholds_s = {dq};
            cfg.target_eps = eps;
            const auto res = sim::run_queue_sim(src, eb * bits, cfg);
            const auto& tail = res.summary.waiting_tails.front();
            const bool ok = res.summary.packets >= 10000000 && tail.estimate >= eps / 5.0 && tail.estimate <= 5.0 * eps;
            pass = pass && ok;
            detail += fmt("[Dq=%gms eps=%g EB=%.1f/s n=%zu P=%.3e ratio=%.2f] ", dq * 1e3, eps, eb,
                          res.summary.packets, tail.estimate, tail.estimate / eps);
        }
    detail += "band=[eps/5, 5eps]";
    return {pass, detail};
}

// Mixed-class allocation against exhaustive enumeration, power scans and the
// link simulator; the loss-split gap is reported alongside.
Verdict ac3() {
    const auto sc = scenario::load_scenario(std::string(URLLC_SCENARIO_DIR) + "/ac3_mixed.yaml");
    const auto budget = sc.system_budget();
    const auto users = sc.user_profiles();
    const auto opts = sc.solver_options();
    const double wmax = budget.total_bandwidth_hz;

    // Exhaustive enumeration over 20 bandwidth levels per user.
    const std::size_t levels = 20;
    std::vector<std::vector<double>> cost(users.size(), std::vector<double>(levels + 1, 0.0));
    for (std::size_t k = 0; k < users.size(); ++k)
        for (std::size_t j = 1; j <= levels; ++j) {
            try {
                cost[k][j] = crosslayer::min_power_any(users[k], budget, wmax * double(j) / double(levels), opts).power_w;
            } catch (const crosslayer::Infeasible&) {
                cost[k][j] = std::numeric_limits<double>::infinity();
            }
        }
    const double oracle = testing::exhaustive_allocation(cost, levels);

    auto coarse_opts = opts;
    coarse_opts.grid_points = levels;
    coarse_opts.refine = false;
    const double coarse = crosslayer::min_total_power_allocation(users, budget, coarse_opts).total_power_w;
    const auto alloc = crosslayer::min_total_power_allocation(users, budget, opts);
    const double coarse_err = std::abs(coarse - oracle) / oracle;
    const double ratio = alloc.total_power_w / oracle;

    // Per-user power against a 1e4-point log scan over [1e-8, 1e4] W.
    const std::size_t points = 10000;
    double scan_err = 0.0;
    for (std::size_t k = 0; k < users.size(); ++k) {
        const double w = alloc.bandwidth_hz[k];
        double found = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < points; ++i) {
            const double p = 1e-8 * std::pow(1e12, double(i) / double(points - 1));
            const bool ok = users[k].service == crosslayer::ServiceClass::urllc
                                ? crosslayer::decoding_outage(users[k], budget, w, p, opts) <= budget.qos.eps_c()
                                : crosslayer::mean_shannon_rate(users[k], budget, w, p, opts) >= users[k].mean_rate_bps;
            if (ok) {
                found = p;
                break;
            }
        }
        scan_err = std::max(scan_err, std::abs(alloc.power_w[k] - found) / found);
    }

    // Link simulation of every URLLC user at its allocation.
    bool sim_ok = true;
    double worst_upper = 0.0, worst_hat = 0.0;
    for (std::size_t k = 0; k < users.size(); ++k) {
        if (users[k].service != crosslayer::ServiceClass::urllc) continue;
        auto cfg = sc.sim_config(11 + k);
        cfg.horizon = std::max<std::size_t>(cfg.horizon, 1000000);
        cfg.keep_samples = false;
        const auto r = sim::run_link_sim(users[k], budget, alloc.bandwidth_hz[k], alloc.power_w[k], cfg);
        worst_upper = std::max(worst_upper, r.eps_tot_interval.upper);
        worst_hat = std::max(worst_hat, r.eps_tot_hat);
        sim_ok = sim_ok && r.eps_tot_interval.upper <= budget.qos.overall_loss();
    }

    const auto split = crosslayer::optimize_loss_split(users, budget, sc.solver.split_fractions, opts);

    const bool pass = coarse_err <= 1e-9 && ratio <= 1.01 && scan_err <= 0.01 && sim_ok && split.relative_gap < 0.10;
    return {pass, fmt("oracle=%.6g W dp20_rel_err=%.1e solver/oracle=%.4f (<=1.01) scan_max_rel=%.4f (<=0.01) "
                      "eps_tot_hat_max=%.3e wilson_upper_max=%.3e (<=%g) split_gap=%.2f%% at fraction %.2f (<10%%)",
                      oracle, coarse_err, ratio, scan_err, worst_hat, worst_upper, budget.qos.overall_loss(),
                      100.0 * split.relative_gap, split.best_fraction)};
}

// Potential-based shaping preserves the optimal actions of random MDPs.
Verdict ac6() {
    CounterRng rng(606, 0);
    std::size_t mismatched = 0, total_states = 0;
    for (std::uint64_t m = 0; m < 50; ++m) {
        const std::size_t states = 2 + std::size_t(rng.uniform() * 199.0);
        const std::size_t actions = 2 + std::size_t(rng.uniform() * 4.0);
        const double gamma = 0.5 + 0.4 * rng.uniform();
        const auto mdp = testing::random_mdp(states, actions, 3, 1000 + m);

        sched::PotentialSpec spec;
        spec.d_min = 1 + int(rng.uniform() * 4.0);
        spec.d_max = spec.d_min + int(rng.uniform() * 6.0);
        spec.d_end = spec.d_max + int(rng.uniform() * 4.0);
        spec.peak = 0.5 + 4.5 * rng.uniform();
        std::vector<double> psi(states);
        for (auto& p : psi) p = sched::potential_triangular(std::floor(rng.uniform() * (spec.d_end + 2)), spec);

        const auto a = testing::argmax_sets(testing::optimal_q(mdp, gamma), 1e-9);
        const auto b = testing::argmax_sets(testing::optimal_q(testing::shaped(mdp, psi, gamma), gamma), 1e-9);
        for (std::size_t s = 0; s < states; ++s) mismatched += a[s] != b[s];
        total_states += states;
    }
    return {mismatched == 0, fmt("mdps=50 states=%zu argmax_mismatches=%zu", total_states, mismatched)};
}

// Numerical hygiene: gradients, Q round trip, fading expectations, LoS
// reliability and the M/D/1 delay distribution.
Verdict ac8() {
    std::string detail;
    bool pass = true;

    {
        using neural::Activation;
        auto model = neural::FnnModel::initialized({5, 16, 16, 3}, {Activation::tanh, Activation::sigmoid, Activation::softplus}, 8);
        CounterRng rng(8, 1);
        Eigen::VectorXd x(5), target(3);
        for (auto& v : x) v = 2.0 * rng.uniform() - 1.0;
        for (auto& v : target) v = rng.uniform();
        auto loss = [&](const neural::FnnModel& m) { return 0.5 * (m.forward(x) - target).squaredNorm(); };
        const auto g = neural::backward(model, x, model.forward(x) - target);
        double worst = 0.0;
        const double h = 1e-6;
        for (std::size_t n = 0; n < model.layer_count(); ++n) {
            auto& layer = model.layer(n);
            Eigen::MatrixXd fd_w(layer.weights.rows(), layer.weights.cols());
            for (Eigen::Index i = 0; i < fd_w.size(); ++i) {
                const double keep = layer.weights(i);
                layer.weights(i) = keep + h;
                const double up = loss(model);
                layer.weights(i) = keep - h;
                const double down = loss(model);
                layer.weights(i) = keep;
                fd_w(i) = (up - down) / (2.0 * h);
            }
            Eigen::VectorXd fd_b(layer.bias.size());
            for (Eigen::Index i = 0; i < fd_b.size(); ++i) {
                const double keep = layer.bias(i);
                layer.bias(i) = keep + h;
                const double up = loss(model);
                layer.bias(i) = keep - h;
                const double down = loss(model);
                layer.bias(i) = keep;
                fd_b(i) = (up - down) / (2.0 * h);
            }
            worst = std::max(worst, (g.weights[n] - fd_w).norm() / fd_w.norm());
            worst = std::max(worst, (g.bias[n] - fd_b).norm() / fd_b.norm());
        }
        pass = pass && worst < 1e-4;
        detail += fmt("backprop_rel=%.2e (<1e-4) ", worst);
    }
    {
        CounterRng rng(8, 2);
        double worst = 0.0;
        for (int i = 0; i < 1000; ++i) {
            const double p = log_uniform(rng, 1e-15, 0.5);
            for (double q : {p, 1.0 - p}) worst = std::max(worst, std::abs(numerics::q_func(numerics::q_func_inv(q)) - q) / q);
        }
        pass = pass && worst < 1e-9;
        detail += fmt("q_round_trip_rel=%.2e (<1e-9) ", worst);
    }
    {
        double worst_z = 0.0;
        const std::vector<std::function<double(double)>> fs{
            [](double g) { return std::exp(-0.5 * g); },
            [](double g) { return std::log2(1.0 + 3.0 * g); },
            [](double g) { return numerics::q_func(10.0 * (std::log1p(0.5 * g) - 0.4)); },
        };
        std::uint64_t seed = 80;
        for (double shape : {1.0, 2.0, 4.0, 8.0})
            for (const auto& f : fs) {
                const double quad = numerics::expect_gamma(f, shape, 64).value;
                const auto mc = testing::gamma_monte_carlo(f, shape, 1000000, ++seed);
                worst_z = std::max(worst_z, std::abs(quad - mc.mean) / mc.std_error);
            }
        pass = pass && worst_z <= 3.0;
        detail += fmt("expect_gamma_max_z=%.2f (<=3) ", worst_z);
    }
    {
        CounterRng rng(8, 3);
        double worst_z = 0.0;
        for (int i = 0; i < 20; ++i) {
            const reliability::LosField field{0.05 + 0.5 * rng.uniform(), 0.95 * rng.uniform(),
                                              std::size_t(1 + rng.uniform() * 8.0)};
            const auto mc = testing::markov_los_monte_carlo(field.p_one, field.rho, field.antennas, 1000000, 900 + i);
            worst_z = std::max(worst_z, std::abs(reliability::p_all_los(field) - mc.mean) / mc.std_error);
        }
        pass = pass && worst_z <= 3.0;
        detail += fmt("los_max_z=%.2f (<=3) ", worst_z);
    }
    {
        // Consecutive waits are strongly correlated, so only every 50th is kept.
        const double lambda = 1000.0, d = 0.625e-3;
        sim::SimConfig cfg;
        cfg.seed = 88;
        cfg.horizon = 2000000;
        const auto res = sim::run_queue_sim(qos::PoissonSource(lambda, 160.0), 160.0 / d, cfg);
        std::vector<double> thinned;
        for (std::size_t i = 0; i < res.waiting_s.size(); i += 50) thinned.push_back(res.waiting_s[i]);
        std::size_t inside = 0, checked = 0;
        for (double t : {0.25 * d, 0.5 * d, d, 2.0 * d, 4.0 * d}) {
            const double exact = 1.0 - testing::md1_waiting_cdf(lambda, d, t);
            const auto tail = sim::tail_probability(thinned, t);
            inside += tail.lower <= exact && exact <= tail.upper;
            ++checked;
        }
        pass = pass && inside == checked;
        detail += fmt("md1_ccdf_in_wilson99=%zu/%zu", inside, checked);
    }
    return {pass, detail};
}

}  // namespace urllc::acceptance
