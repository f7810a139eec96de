#include <doctest.h>

#include "urllc/numerics.hpp"
#include "urllc/qos.hpp"
#include "urllc/rng.hpp"

#include <cmath>
#include <vector>

using namespace urllc;
using namespace urllc::qos;

TEST_SUITE("qos") {

TEST_CASE("QosTarget derives the queueing budget") {
    const QosTarget q(1e-3, 1e-5, 1.25e-4);
    CHECK(q.queue_delay_s() == doctest::Approx(8.75e-4));
    CHECK(q.eps_c() == doctest::Approx(5e-6));
    CHECK(q.eps_q() == doctest::Approx(5e-6));
    CHECK(q.eps_p() == 0.0);
    CHECK(QosTarget(2.5e-4, 1e-3, 1.25e-4).queue_delay_s() == doctest::Approx(1.25e-4));
    CHECK_THROWS_AS(QosTarget(1.25e-4, 1e-3, 1.25e-4), DegenerateQos);
    CHECK_THROWS_AS(QosTarget(1e-3, 0.6, 1.25e-4), DegenerateQos);
    const auto split = q.with_split({2e-6, 6e-6, 2e-6});
    CHECK(split.eps_q() == 6e-6);
    CHECK_THROWS(q.with_split({1e-5, 1e-5, 0.0}));
}

TEST_CASE("little's law") {
    CHECK(littles_law(100.0, 0.01) == doctest::Approx(1.0));
    CHECK(littles_law(0.0, 3.0) == 0.0);
    CHECK(littles_law(2000.0, 0.0005) == doctest::Approx(1.0));
}

TEST_CASE("hard deadline check") {
    const std::vector<double> a{0, 1, 2, 3};
    CHECK(hard_deadline_check(a, a, 0).feasible);
    const std::vector<double> arr{0, 1, 1, 1}, none{0, 0, 0, 0};
    const auto v = hard_deadline_check(arr, none, 1);
    CHECK_FALSE(v.feasible);
    CHECK(v.kind == DeadlineViolation::deadline);
    CHECK(*v.first_violation == 2);
    const std::vector<double> ahead{0, 2, 2, 3};
    const auto c = hard_deadline_check(a, ahead, 2);
    CHECK_FALSE(c.feasible);
    CHECK(c.kind == DeadlineViolation::causality);
    CHECK(*c.first_violation == 1);
    const std::vector<double> dips{0, 2, 1, 3};
    CHECK_THROWS_AS(hard_deadline_check(a, dips, 1), std::invalid_argument);
    const std::vector<double> shorter{0, 1};
    CHECK_THROWS_AS(hard_deadline_check(a, shorter, 1), std::invalid_argument);
}

TEST_CASE("effective bandwidth of a poisson source") {
    const PoissonSource src(1000.0, 160.0);
    const QosTarget q(1e-3, 1e-5, 1.25e-4);
    // High-precision evaluation with D_q = 0.875 ms and eps_q = 5e-6.
    CHECK(effective_bandwidth_poisson(src, q) == doctest::Approx(5157.6178341235757).epsilon(1e-12));
    CHECK(effective_bandwidth_poisson(2000.0, 8.75e-4, 5e-6) > effective_bandwidth_poisson(1000.0, 8.75e-4, 5e-6));
    CHECK(effective_bandwidth_poisson(1000.0, 2e-3, 5e-6) < effective_bandwidth_poisson(1000.0, 1e-3, 5e-6));
    // As the violation budget approaches one the guarantee degenerates to the mean rate.
    CHECK(effective_bandwidth_poisson(1000.0, 1e-3, 0.9995) == doctest::Approx(1000.0).epsilon(1e-3));
    CHECK_THROWS_AS(effective_bandwidth_poisson(1000.0, 0.0, 1e-3), DegenerateQos);
    CHECK_THROWS_AS(effective_bandwidth_poisson(1000.0, 1e-3, 0.0), numerics::DomainError);
}

TEST_CASE("effective bandwidth is at least the mean rate over a grid") {
    for (double lambda : {10.0, 100.0, 1000.0, 1e4})
        for (double d : {1e-4, 1e-3, 1e-2})
            for (double eps : {1e-2, 1e-5, 1e-8}) CHECK(effective_bandwidth_poisson(lambda, d, eps) >= lambda);
}

TEST_CASE("qos exponent and violation probability") {
    CHECK(qos_exponent(1.0, 1.0, std::exp(-1.0)).value == doctest::Approx(1.0));
    CHECK(qos_exponent(1.0, 1.0, std::exp(-2.0)).value == doctest::Approx(2.0));
    CHECK(qos_exponent(1e4, 1e-2, 1e-3).value == doctest::Approx(std::log(1000.0) / 100.0));
    CHECK(delay_violation_prob({0.0}, 1.0, 1.0) == 1.0);
    CHECK(delay_violation_prob({std::log(2.0)}, 1.0, 1.0) == doctest::Approx(0.5));
    CHECK(delay_violation_prob({0.06908}, 1e4, 1e-2) == doctest::Approx(1e-3).epsilon(1e-4));
    for (double eps : {1e-2, 1e-5, 1e-9}) {
        const double eb = effective_bandwidth_poisson(500.0, 2e-3, eps);
        CHECK(delay_violation_prob(qos_exponent(eb, 2e-3, eps), eb, 2e-3) == doctest::Approx(eps).epsilon(1e-13));
    }
}

TEST_CASE("effective capacity estimator") {
    const double tf = 1e-3;
    std::vector<double> constant(2000, 5e5);
    CHECK(effective_capacity_estimate(constant, {1e-5}, tf).value == doctest::Approx(5e5).epsilon(1e-12));

    CounterRng rng(3, 0);
    std::vector<double> noisy(5000);
    double mean = 0.0;
    for (auto& s : noisy) {
        s = 1e6 * rng.uniform();
        mean += s / double(noisy.size());
    }
    CHECK(effective_capacity_estimate(noisy, {1e-12}, tf).value == doctest::Approx(mean).epsilon(1e-3));

    // Two-point service {0, 2 s} with theta s T_f = 1: closed form -ln((1 + e^-2) / 2) s.
    const double s = 1e5, theta = 1.0 / (s * tf);
    std::vector<double> two(2000);
    for (std::size_t i = 0; i < two.size(); ++i) two[i] = i % 2 ? 2.0 * s : 0.0;
    const auto est = effective_capacity_estimate(two, {theta}, tf);
    CHECK(est.value == doctest::Approx(0.56621916951697281 * s).epsilon(1e-12));
    CHECK(est.ci_lower <= est.value);
    CHECK(est.ci_upper >= est.value);

    double prev = INFINITY;
    for (double th : {1e-9, 1e-7, 1e-6, 1e-5, 1e-4}) {
        const double v = effective_capacity_estimate(noisy, {th}, tf).value;
        CHECK(v <= prev * (1.0 + 1e-12));
        prev = v;
    }

    std::vector<double> zeros(2000, 0.0), few(10, 1.0);
    CHECK_THROWS(effective_capacity_estimate(zeros, {1e-5}, tf));
    CHECK_THROWS(effective_capacity_estimate(few, {1e-5}, tf));
    // Huge exponents stay finite thanks to the log-sum-exp shift.
    CHECK(std::isfinite(effective_capacity_estimate(noisy, {1.0}, tf).value));
}

TEST_CASE("rate comparison needs matching units") {
    const Rate eb{1000.0, RateUnit::bits_per_s};
    CHECK(check_ec_ge_eb({1000.0, RateUnit::bits_per_s}, eb).satisfied);
    CHECK(check_ec_ge_eb({1000.0, RateUnit::bits_per_s}, eb).margin == 0.0);
    CHECK_FALSE(check_ec_ge_eb({990.0, RateUnit::bits_per_s}, eb).satisfied);
    const auto up = check_ec_ge_eb({1020.0, RateUnit::bits_per_s}, eb);
    CHECK(up.satisfied);
    CHECK(up.margin == doctest::Approx(20.0));
    CHECK_THROWS_AS(check_ec_ge_eb({10.0, RateUnit::packets_per_s}, eb), UnitMismatch);
    const auto bits = to_bits_per_s({10.0, RateUnit::packets_per_s}, 160.0);
    CHECK(bits.unit == RateUnit::bits_per_s);
    CHECK(bits.value == 1600.0);
}

}
