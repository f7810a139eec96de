#include <doctest.h>

#include "oracles.hpp"
#include "urllc/rng.hpp"
#include "urllc/sim.hpp"

#include <cmath>
#include <limits>
#include <sstream>

using namespace urllc;
using namespace urllc::sim;

TEST_SUITE("sim") {

TEST_CASE("M/D/1 waiting time matches the exact distribution") {
    const qos::PoissonSource src(1000.0, 160.0);
    const double service_bps = 160.0 * 1600.0;  // rho = 0.625
    const double d = 1.0 / 1600.0;
    SimConfig cfg;
    cfg.seed = 12;
    cfg.horizon = 1000000;
    const auto res = run_queue_sim(src, service_bps, cfg);
    // Consecutive waits are correlated; every 50th is close to independent.
    std::vector<double> thinned;
    for (std::size_t i = 0; i < res.waiting_s.size(); i += 50) thinned.push_back(res.waiting_s[i]);
    for (double t : {0.5 * d, 2.0 * d, 4.0 * d}) {
        const double exact = 1.0 - testing::md1_waiting_cdf(1000.0, d, t);
        const auto tail = tail_probability(thinned, t);
        CHECK(tail.lower <= exact);
        CHECK(exact <= tail.upper);
    }
    // Pollaczek-Khinchine mean wait.
    const double rho = 0.625;
    CHECK(res.summary.mean_waiting_s == doctest::Approx(rho * d / (2.0 * (1.0 - rho))).epsilon(0.03));
    CHECK(res.summary.mean_sojourn_s == doctest::Approx(res.summary.mean_waiting_s + d));
    CHECK(res.summary.littles_law_rel_err < 0.01);
    CHECK(res.summary.p50_sojourn_s <= res.summary.p99_sojourn_s);
    CHECK(res.summary.p99_sojourn_s <= res.summary.p999_sojourn_s);
    CHECK(!res.summary.overloaded);
}

TEST_CASE("deterministic arrivals below capacity never wait") {
    const qos::PoissonSource src(1000.0, 100.0);
    SimConfig cfg;
    cfg.arrivals = ArrivalModel::deterministic;
    cfg.horizon = 5000;
    const auto res = run_queue_sim(src, 2e5, cfg);
    CHECK(res.summary.mean_waiting_s == 0.0);
    CHECK(res.summary.mean_sojourn_s == doctest::Approx(5e-4));
    CHECK(res.summary.arrival_rate_hat == doctest::Approx(1000.0).epsilon(1e-3));
}

TEST_CASE("overload is flagged but simulated") {
    const qos::PoissonSource src(1000.0, 100.0);
    SimConfig cfg;
    cfg.horizon = 2000;
    const auto res = run_queue_sim(src, 1e5, cfg);
    CHECK(res.summary.overloaded);
    CHECK(!res.summary.warning.empty());
    CHECK(res.summary.packets == 1800);
}

TEST_CASE("bernoulli arrivals keep slot alignment") {
    const qos::PoissonSource src(2000.0, 100.0);
    SimConfig cfg;
    cfg.arrivals = ArrivalModel::bernoulli;
    cfg.horizon = 2000;
    cfg.keep_records = true;
    const auto res = run_queue_sim(src, 1e7, cfg);
    for (std::size_t i = 1; i < res.records.size(); ++i) {
        const double slots = res.records[i].arrival_s / cfg.slot_s;
        CHECK(std::abs(slots - std::round(slots)) < 1e-6);
        CHECK(res.records[i].arrival_s > res.records[i - 1].arrival_s);
    }
    cfg.slot_s = 1e-3;
    CHECK_THROWS(run_queue_sim(src, 1e7, cfg));
}

TEST_CASE("runs are reproducible per seed") {
    const qos::PoissonSource src(1000.0, 160.0);
    SimConfig cfg;
    cfg.horizon = 3000;
    const auto a = run_queue_sim(src, 3e5, cfg), b = run_queue_sim(src, 3e5, cfg);
    CHECK(a.waiting_s == b.waiting_s);
    cfg.seed = 2;
    CHECK(run_queue_sim(src, 3e5, cfg).waiting_s != a.waiting_s);
}

TEST_CASE("config validation and tail estimates") {
    SimConfig cfg;
    cfg.horizon = 0;
    CHECK_THROWS(cfg.validate());
    cfg.horizon = 10;
    cfg.warmup_fraction = 0.5;
    CHECK_THROWS(cfg.validate());
    const std::vector<double> xs{0.0, 1.0, 2.0, 3.0};
    const auto t = tail_probability(xs, 1.0, 1e-3);
    CHECK(t.estimate == 0.5);
    CHECK(t.exceed == 2);
    CHECK(t.insufficient_resolution);
    CHECK(!tail_probability(xs, 1.0).insufficient_resolution);
    CHECK_THROWS(tail_probability(std::vector<double>{}, 1.0));
}

TEST_CASE("link simulation edge cases") {
    crosslayer::SystemBudget budget(1e6, 4, 3.981071705534973e-21, qos::QosTarget(1e-3, 1e-3, 1.25e-4));
    const auto user = crosslayer::UserProfile::urllc(1e-10, qos::PoissonSource(1000.0, 160.0));
    SimConfig cfg;
    cfg.horizon = 20000;
    LinkSimOptions infinite;
    infinite.power_override_w = std::numeric_limits<double>::infinity();
    const auto clean = run_link_sim(user, budget, 2e5, 1e-3, cfg, infinite);
    CHECK(clean.decode_losses == 0);
    CHECK(clean.eps_c_hat == 0.0);
    CHECK(clean.packets == 18000);

    LinkSimOptions silent;
    silent.arrival_rate_override = 0.0;
    const auto none = run_link_sim(user, budget, 2e5, 1e-3, cfg, silent);
    CHECK(none.packets == 0);
    CHECK(none.eps_tot_hat == 0.0);

    const auto weak = run_link_sim(user, budget, 2e5, 1e-12, cfg);
    CHECK(weak.eps_c_hat > 0.5);
    CHECK(weak.eps_tot_hat == doctest::Approx(double(weak.decode_losses + weak.deadline_losses) / double(weak.packets)));
    CHECK(weak.eps_tot_independent == doctest::Approx(weak.eps_c_hat + weak.eps_q_hat - weak.eps_c_hat * weak.eps_q_hat));
    CHECK_THROWS(run_link_sim(user, budget, 0.0, 1e-3, cfg));
}

TEST_CASE("records export") {
    std::ostringstream out;
    write_records_csv(out, {{0.0, 1e-4, Outcome::delivered}, {1e-4, 2e-4, Outcome::deadline_loss}});
    CHECK(out.str() == "arrival_s,departure_s,outcome\n0,0.0001,delivered\n0.0001,0.00020000000000000001,deadline_loss\n");
}


TEST_CASE("M/D/1 at half load") {
    const qos::PoissonSource src(1000.0, 100.0);
    const double d = 5e-4;
    SimConfig cfg;
    cfg.seed = 31;
    cfg.horizon = 1000000;
    const auto res = run_queue_sim(src, 100.0 / d, cfg);
    std::vector<double> thinned;
    for (std::size_t i = 0; i < res.sojourn_s.size(); i += 50) thinned.push_back(res.sojourn_s[i]);
    for (double t : {1.2 * d, 1.5 * d, 2.0 * d, 3.0 * d}) {
        // Sojourn = wait + d.
        const double exact = 1.0 - testing::md1_waiting_cdf(1000.0, d, t - d);
        const auto tail = tail_probability(thinned, t);
        CHECK(tail.lower <= exact);
        CHECK(exact <= tail.upper);
    }
    CHECK(res.summary.littles_law_rel_err < 0.02);
}

TEST_CASE("tail estimates on synthetic data") {
    const std::vector<double> low(1000, 0.1);
    const auto none = tail_probability(low, 1.0);
    CHECK(none.estimate == 0.0);
    CHECK(none.upper > 0.0);
    CounterRng rng(77, 0);
    std::vector<double> coin(1000000);
    for (auto& c : coin) c = rng.uniform() < 0.01 ? 1.0 : 0.0;
    const auto t = tail_probability(coin, 0.5);
    CHECK(t.lower <= 0.01);
    CHECK(0.01 <= t.upper);
    CHECK(tail_probability(std::vector<double>(10, 0.0), 1.0, 1e-3).insufficient_resolution);
}

TEST_CASE("identical seeds give identical record streams") {
    crosslayer::SystemBudget budget(1e6, 4, 3.981071705534973e-21, qos::QosTarget(1e-3, 1e-3, 1.25e-4));
    const auto user = crosslayer::UserProfile::urllc(1e-10, qos::PoissonSource(1000.0, 160.0));
    SimConfig cfg;
    cfg.horizon = 5000;
    cfg.keep_records = true;
    const auto a = run_link_sim(user, budget, 1e5, 1e-4, cfg), b = run_link_sim(user, budget, 1e5, 1e-4, cfg);
    REQUIRE(a.records.size() == b.records.size());
    bool same = true;
    for (std::size_t i = 0; i < a.records.size(); ++i)
        same = same && a.records[i].arrival_s == b.records[i].arrival_s &&
               a.records[i].departure_s == b.records[i].departure_s && a.records[i].outcome == b.records[i].outcome;
    CHECK(same);
}

TEST_CASE("loss decomposition agrees across replications") {
    crosslayer::SystemBudget budget(1e6, 4, 3.981071705534973e-21, qos::QosTarget(1e-3, 1e-3, 1.25e-4));
    const auto user = crosslayer::UserProfile::urllc(1e-10, qos::PoissonSource(1000.0, 160.0));
    const double w = 1e5;
    const double p = crosslayer::min_power_for_target(user, budget, w, 0.05).power_w;
    SimConfig cfg;
    cfg.horizon = 100000;
    const auto a = run_link_sim(user, budget, w, p, cfg);
    cfg.seed = 2;
    const auto b = run_link_sim(user, budget, w, p, cfg);
    const double se = std::sqrt(a.eps_tot_independent * (1.0 - a.eps_tot_independent) / double(b.packets));
    CHECK(std::abs(b.eps_tot_hat - a.eps_tot_independent) < 3.0 * std::sqrt(2.0) * se);
    CHECK(a.eps_c_hat == doctest::Approx(0.05).epsilon(0.2));
}

}
