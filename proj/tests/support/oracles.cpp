#include "oracles.hpp"

#include "urllc/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace urllc::testing {

McEstimate markov_los_monte_carlo(double p_one, double rho, std::size_t antennas, std::size_t samples,
                                  std::uint64_t seed) {
    CounterRng rng(seed, 0x105);
    const double p_next = p_one * (1.0 - rho);
    std::size_t hits = 0;
    for (std::size_t n = 0; n < samples; ++n) {
        // Only the all-NLoS path matters, so the chain stops at the first LoS antenna.
        bool any = rng.uniform() < p_one;
        for (std::size_t a = 1; a < antennas && !any; ++a) any = rng.uniform() < p_next;
        hits += any;
    }
    const double m = double(hits) / double(samples);
    return {m, std::sqrt(m * (1.0 - m) / double(samples))};
}

double md1_waiting_cdf(double lambda, double d, double t) {
    if (t < 0.0) return 0.0;
    const long double rho = (long double)lambda * d;
    long double sum = 0.0L;
    const auto kmax = std::size_t(std::floor(t / d));
    for (std::size_t k = 0; k <= kmax; ++k) {
        const long double x = (long double)lambda * ((long double)k * d - t);  // <= 0
        long double term = std::exp(-x);
        for (std::size_t i = 1; i <= k; ++i) term *= x / (long double)i;
        sum += term;
    }
    return double((1.0L - rho) * sum);
}

McEstimate gamma_monte_carlo(const std::function<double(double)>& f, double shape, std::size_t samples,
                             std::uint64_t seed) {
    CounterRng rng(seed, 0x6a);
    std::gamma_distribution<double> gamma(shape, 1.0);
    double s = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < samples; ++i) {
        const double v = f(gamma(rng));
        s += v;
        s2 += v * v;
    }
    const double m = s / double(samples);
    const double var = std::max(0.0, s2 / double(samples) - m * m);
    return {m, std::sqrt(var / double(samples))};
}

Mdp random_mdp(std::size_t states, std::size_t actions, std::size_t fanout, std::uint64_t seed) {
    CounterRng rng(seed, 0x3d);
    Mdp m;
    m.states = states;
    m.actions = actions;
    m.P.assign(states, std::vector<std::vector<double>>(actions, std::vector<double>(states, 0.0)));
    m.R = m.P;
    std::uniform_int_distribution<std::size_t> pick(0, states - 1);
    for (std::size_t s = 0; s < states; ++s)
        for (std::size_t a = 0; a < actions; ++a) {
            double total = 0.0;
            for (std::size_t f = 0; f < fanout; ++f) {
                const double w = rng.uniform() + 1e-3;
                m.P[s][a][pick(rng)] += w;
                total += w;
            }
            for (std::size_t t = 0; t < states; ++t) {
                m.P[s][a][t] /= total;
                m.R[s][a][t] = 2.0 * rng.uniform() - 1.0;
            }
        }
    return m;
}

Mdp shaped(const Mdp& m, const std::vector<double>& psi, double gamma) {
    Mdp out = m;
    for (std::size_t s = 0; s < m.states; ++s)
        for (std::size_t a = 0; a < m.actions; ++a)
            for (std::size_t t = 0; t < m.states; ++t) out.R[s][a][t] = m.R[s][a][t] + gamma * psi[t] - psi[s];
    return out;
}

std::vector<std::vector<double>> optimal_q(const Mdp& m, double gamma, double tol) {
    std::vector<double> v(m.states, 0.0);
    std::vector<std::vector<double>> q(m.states, std::vector<double>(m.actions, 0.0));
    for (int iter = 0; iter < 100000; ++iter) {
        double change = 0.0;
        for (std::size_t s = 0; s < m.states; ++s)
            for (std::size_t a = 0; a < m.actions; ++a) {
                double acc = 0.0;
                for (std::size_t t = 0; t < m.states; ++t)
                    if (m.P[s][a][t] > 0.0) acc += m.P[s][a][t] * (m.R[s][a][t] + gamma * v[t]);
                q[s][a] = acc;
            }
        for (std::size_t s = 0; s < m.states; ++s) {
            const double best = *std::max_element(q[s].begin(), q[s].end());
            change = std::max(change, std::abs(best - v[s]));
            v[s] = best;
        }
        if (change < tol) break;
    }
    return q;
}

std::vector<std::vector<std::size_t>> argmax_sets(const std::vector<std::vector<double>>& q, double tol) {
    std::vector<std::vector<std::size_t>> out;
    for (const auto& row : q) {
        const double best = *std::max_element(row.begin(), row.end());
        std::vector<std::size_t> set;
        for (std::size_t a = 0; a < row.size(); ++a)
            if (row[a] >= best - tol) set.push_back(a);
        out.push_back(set);
    }
    return out;
}

namespace {

void enumerate(const std::vector<std::vector<double>>& cost, std::size_t k, std::size_t left, double acc,
               std::vector<std::size_t>& cur, double& best, std::vector<std::size_t>* arg) {
    if (k == cost.size()) {
        if (acc < best) {
            best = acc;
            if (arg) *arg = cur;
        }
        return;
    }
    const std::size_t remaining_users = cost.size() - k - 1;
    for (std::size_t j = 1; j + remaining_users <= left && j < cost[k].size(); ++j) {
        if (!std::isfinite(cost[k][j])) continue;
        cur[k] = j;
        enumerate(cost, k + 1, left - j, acc + cost[k][j], cur, best, arg);
    }
}

}  // namespace

double exhaustive_allocation(const std::vector<std::vector<double>>& cost, std::size_t budget,
                             std::vector<std::size_t>* best) {
    double b = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> cur(cost.size(), 0);
    enumerate(cost, 0, budget, 0.0, cur, b, best);
    return b;
}

}  // namespace urllc::testing
