#include <doctest.h>

#include "urllc/learn.hpp"

#include <cmath>
#include <sstream>

using namespace urllc;
using namespace urllc::learn;

namespace {

LearningScenario small_scenario(LabelKind label = LabelKind::bandwidth) {
    crosslayer::SystemBudget budget(1e6, 4, 3.981071705534973e-21, qos::QosTarget(1e-3, 1e-3, 1.25e-4));
    std::vector<crosslayer::UserProfile> users;
    for (int k = 0; k < 2; ++k)
        users.push_back(crosslayer::UserProfile::urllc(1e-10, qos::PoissonSource(1000.0, 160.0),
                                                       label == LabelKind::bandwidth ? std::optional<double>(0.01)
                                                                                     : std::nullopt));
    crosslayer::SolverOptions solver;
    solver.grid_points = 20;
    return LearningScenario{users, budget, -105.0, -95.0, 1.0, 1.5, label, solver, 100};
}

// min f(a) s.t. target(s) - a <= 0, with target = features(0) + offset and
// f(a) = a or a^2 / 2.
class ShiftProblem : public PrimalDualProblem {
public:
    ShiftProblem(double offset, bool quadratic) : offset_(offset), quadratic_(quadratic) {}
    std::size_t action_size() const override { return 1; }
    std::size_t constraint_size() const override { return 1; }
    Evaluation evaluate(const LabeledSample& s, const Eigen::VectorXd& a) const override {
        const double f = quadratic_ ? 0.5 * a(0) * a(0) : a(0);
        const double df = quadratic_ ? a(0) : 1.0;
        return {f, Eigen::VectorXd::Constant(1, df), Eigen::VectorXd::Constant(1, s.features(0) + offset_ - a(0)),
                Eigen::MatrixXd::Constant(1, 1, -1.0)};
    }

private:
    double offset_;
    bool quadratic_;
};

std::vector<LabeledSample> line_states(std::size_t n) {
    std::vector<LabeledSample> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i].features = Eigen::VectorXd::Constant(1, -1.0 + 2.0 * double(i) / double(n - 1));
    }
    return out;
}

}  // namespace

TEST_SUITE("learn") {

TEST_CASE("state draws stay in range and map features to [-1, 1]") {
    const auto sc = small_scenario();
    CounterRng rng(3, 0);
    for (int i = 0; i < 100; ++i) {
        const auto s = draw_state(sc, rng);
        REQUIRE(s.features.size() == 4);
        CHECK(s.features.cwiseAbs().maxCoeff() <= 1.0);
        for (double g : s.gains) {
            CHECK(10.0 * std::log10(g) >= -105.0 - 1e-9);
            CHECK(10.0 * std::log10(g) <= -95.0 + 1e-9);
        }
        for (double r : s.rate_scales) {
            CHECK(r >= 1.0);
            CHECK(r <= 1.5);
        }
        const auto users = users_for(sc, s);
        CHECK(users[1].source->rate_pkts_per_s == doctest::Approx(1000.0 * s.rate_scales[1]));
    }
}

TEST_CASE("label sets are reproducible prefixes") {
    const auto sc = small_scenario();
    const auto a = generate_labels(sc, 4, 7);
    const auto b = generate_labels(sc, 2, 7);
    REQUIRE(a.samples.size() == 4);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(a.samples[i].gains == b.samples[i].gains);
        CHECK(a.samples[i].label == b.samples[i].label);
    }
    for (const auto& s : a.samples) {
        const auto users = users_for(sc, s);
        for (std::size_t k = 0; k < users.size(); ++k)
            CHECK(s.label(Eigen::Index(k)) ==
                  doctest::Approx(crosslayer::min_bandwidth_for_user(users[k], sc.budget, sc.solver).bandwidth_hz));
        for (double e : qos_errors(sc, s, s.label)) CHECK(e == 0.0);
        for (double e : qos_errors(sc, s, 0.5 * s.label)) CHECK(e > 0.0);
    }
    std::ostringstream csv;
    write_samples_csv(csv, a.samples);
    CHECK(csv.str().rfind("gain_db_0,gain_db_1,rate_scale_0,rate_scale_1,label_0,label_1\n", 0) == 0);
}

TEST_CASE("power labels come from the joint allocation") {
    auto sc = small_scenario(LabelKind::power);
    const auto set = generate_labels(sc, 1, 2);
    const auto& s = set.samples.front();
    const auto alloc = crosslayer::min_total_power_allocation(users_for(sc, s), sc.budget, sc.solver);
    CHECK(s.label(0) == doctest::Approx(alloc.power_w[0]));
    CHECK(s.label(1) == doctest::Approx(alloc.power_w[1]));
}

TEST_CASE("systematic infeasibility is reported") {
    auto sc = small_scenario(LabelKind::power);
    sc.solver.power_cap_w = 1e-12;
    sc.max_retries = 3;
    CHECK_THROWS_AS(generate_labels(sc, 1, 1), SystematicallyInfeasible);
    auto bad = small_scenario();
    bad.users[0].fixed_power_w.reset();
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("label scaler round trip") {
    std::vector<LabeledSample> s(3);
    s[0].label = Eigen::Vector2d(1e5, 2e5);
    s[1].label = Eigen::Vector2d(3e5, 2e5);
    s[2].label = Eigen::Vector2d(5e5, 2e5);
    for (auto kind : {LabelScaling::none, LabelScaling::standardize, LabelScaling::log_standardize}) {
        const auto sc = LabelScaler::fit(s, kind);
        for (const auto& x : s) CHECK((sc.to_label(sc.to_target(x.label)) - x.label).norm() < 1e-6);
    }
    const auto st = LabelScaler::fit(s, LabelScaling::standardize);
    CHECK(st.mean(0) == doctest::Approx(3e5));
    CHECK(st.stddev(1) == 1.0);
    s[0].label(0) = -1.0;
    CHECK_THROWS(LabelScaler::fit(s, LabelScaling::log_standardize));
}

TEST_CASE("normalized accuracy") {
    const Eigen::Vector2d opt(1.0, 3.0);
    CHECK(normalized_accuracy(opt, opt) == 1.0);
    CHECK(normalized_accuracy(1.1 * opt, opt) == doctest::Approx(0.9));
    CHECK(normalized_accuracy(0.8 * opt, opt) == doctest::Approx(1.2));
    CHECK_THROWS(normalized_accuracy(Eigen::Vector3d::Ones(), opt));
    CHECK_THROWS(normalized_accuracy(opt, Eigen::Vector2d::Zero()));
    const std::vector<LadderPoint> ladder{{10, 0.5}, {20, 0.92}, {40, 0.95}, {80, 0.97}};
    CHECK(samples_to_accuracy(ladder, 0.9) == 20u);
    CHECK(!samples_to_accuracy(ladder, 0.99));
}

TEST_CASE("supervised training fits labels and fine-tuning keeps the frozen prefix") {
    const auto sc = small_scenario();
    const auto data = generate_labels(sc, 60, 11).samples;
    auto model = neural::FnnModel::initialized({4, 16, 16, 2}, {neural::Activation::tanh, neural::Activation::tanh,
                                                                neural::Activation::identity}, 1);
    SupervisedConfig cfg;
    cfg.train.optimizer = neural::OptimizerKind::adam;
    cfg.train.learning_rate = 1e-2;
    cfg.train.epochs = 150;
    cfg.train.batch_size = 16;
    const auto res = train_supervised(model, data, cfg);
    CHECK(res.train_loss.size() == 151);
    CHECK(res.train_loss.back() < 0.2 * res.train_loss.front());
    CHECK(!res.holdout_loss.empty());
    CHECK(mean_symmetric_accuracy(res.model, res.scaler, data) > 0.9);

    const auto fresh = generate_labels(sc, 10, 12).samples;
    const auto tuned = finetune_transfer(res, fresh, 2, cfg);
    CHECK(tuned.model.layer(0).weights == res.model.layer(0).weights);
    CHECK(tuned.model.layer(1).bias == res.model.layer(1).bias);
    CHECK(tuned.model.layer(2).weights != res.model.layer(2).weights);
    CHECK(tuned.scaler.mean == res.scaler.mean);
    CHECK_THROWS(finetune_transfer(res, fresh, 3, cfg));
}

TEST_CASE("training detects divergence") {
    const auto sc = small_scenario();
    const auto data = generate_labels(sc, 20, 4).samples;
    auto model = neural::FnnModel::initialized({4, 8, 2}, {neural::Activation::relu, neural::Activation::identity}, 1);
    SupervisedConfig cfg;
    cfg.train.learning_rate = 1e6;
    cfg.train.epochs = 50;
    CHECK_THROWS_AS(train_supervised(model, data, cfg), Diverged);
}

TEST_CASE("scalar multiplier finds the saddle point of an averaged constraint") {
    // A shared multiplier only sees the mean constraint: the optimum is a = E[target] = 2 everywhere.
    const ShiftProblem problem(2.0, true);
    const auto states = line_states(21);
    PrimalDualConfig cfg;
    cfg.primal.learning_rate = 0.05;
    cfg.primal.epochs = 2000;
    cfg.primal.batch_size = 21;
    cfg.dual_rate_ratio = 1.0;
    cfg.scalar_multiplier = true;
    const auto policy = neural::FnnModel::initialized({1, 1}, {neural::Activation::identity}, 1);
    const auto res = train_unsupervised_primal_dual(policy, {}, problem, states, cfg);
    CHECK(res.scalar_multipliers(0) == doctest::Approx(2.0).epsilon(0.02));
    for (const auto& s : states) CHECK(res.policy.forward(s.features)(0) == doctest::Approx(2.0).epsilon(0.02));
    CHECK(res.min_multiplier_seen >= 0.0);
}

TEST_CASE("multiplier network enforces per-state constraints") {
    const ShiftProblem problem(2.0, true);
    const auto states = line_states(21);
    PrimalDualConfig cfg;
    cfg.primal.learning_rate = 0.01;
    cfg.primal.optimizer = neural::OptimizerKind::adam;
    cfg.primal.epochs = 3000;
    cfg.primal.batch_size = 21;
    cfg.dual_rate_ratio = 1.0;
    const auto policy = neural::FnnModel::initialized({1, 1}, {neural::Activation::identity}, 1);
    const auto mult = neural::FnnModel::initialized({1, 1}, {neural::Activation::softplus}, 2);
    const auto res = train_unsupervised_primal_dual(policy, mult, problem, states, cfg);
    CHECK(res.min_multiplier_seen >= 0.0);
    for (const auto& s : states) {
        CHECK(res.policy.forward(s.features)(0) == doctest::Approx(s.features(0) + 2.0).epsilon(0.03));
        CHECK(res.multiplier.forward(s.features)(0) == doctest::Approx(s.features(0) + 2.0).epsilon(0.1));
    }
    CHECK(res.objective_trace.size() == 3000);

    const auto linear = neural::FnnModel::initialized({1, 1}, {neural::Activation::identity}, 2);
    CHECK_THROWS_AS(train_unsupervised_primal_dual(policy, linear, problem, states, cfg), std::invalid_argument);
}

TEST_CASE("slack constraints let the multipliers decay") {
    const ShiftProblem problem(-5.0, false);
    const auto states = line_states(11);
    PrimalDualConfig cfg;
    cfg.primal.learning_rate = 0.05;
    cfg.primal.epochs = 400;
    cfg.primal.batch_size = 11;
    cfg.scalar_multiplier = true;
    const auto policy = neural::FnnModel::initialized({1, 1}, {neural::Activation::softplus}, 3);
    const auto res = train_unsupervised_primal_dual(policy, {}, problem, states, cfg);
    CHECK(res.scalar_multipliers(0) == 0.0);
    CHECK(res.objective_trace.back() < 0.5 * res.objective_trace.front());
    CHECK(res.violation_trace.back() == 0.0);
}

TEST_CASE("single deterministic state: both learners recover the closed form") {
    auto sc = small_scenario();
    sc.users.resize(1);
    sc.budget.fading = crosslayer::FadingModel::deterministic(1.0);
    sc.gain_db_min = sc.gain_db_max = -100.0;
    sc.rate_scale_min = sc.rate_scale_max = 1.0;
    const auto data = generate_labels(sc, 16, 1).samples;
    const double exact = crosslayer::min_bandwidth_for_user(users_for(sc, data[0])[0], sc.budget, sc.solver).bandwidth_hz;

    auto net = neural::FnnModel::initialized({2, 8, 1}, {neural::Activation::tanh, neural::Activation::identity}, 4);
    SupervisedConfig sup;
    sup.train.optimizer = neural::OptimizerKind::adam;
    sup.train.learning_rate = 1e-2;
    sup.train.epochs = 200;
    const auto s = train_supervised(net, data, sup);
    const double w_sup = predict(s.model, s.scaler, data[0].features)(0);
    CHECK(w_sup == doctest::Approx(exact).epsilon(0.02));

    // Reference deliberately off the optimum so the policy has to move.
    const BandwidthProblem problem(sc, 0.7 * exact);
    PrimalDualConfig cfg;
    cfg.primal.optimizer = neural::OptimizerKind::adam;
    cfg.primal.learning_rate = 1e-2;
    cfg.primal.epochs = 1500;
    cfg.primal.batch_size = 16;
    cfg.dual_rate_ratio = 1.0;
    cfg.scalar_multiplier = true;
    const auto policy = neural::FnnModel::initialized({2, 1}, {neural::Activation::softplus}, 5);
    const auto u = train_unsupervised_primal_dual(policy, {}, problem, data, cfg);
    const double w_unsup = problem.reference_hz() * u.policy.forward(data[0].features)(0);
    CHECK(w_unsup == doctest::Approx(exact).epsilon(0.02));
    CHECK(w_unsup == doctest::Approx(w_sup).epsilon(0.02));
}

TEST_CASE("supervised edge cases") {
    std::vector<LabeledSample> zeros(4);
    CounterRng rng(1, 0);
    for (auto& z : zeros) {
        z.features = Eigen::Vector2d(rng.uniform(), rng.uniform());
        z.label = Eigen::VectorXd::Zero(1);
    }
    auto m = neural::FnnModel::initialized({2, 4, 1}, {neural::Activation::tanh, neural::Activation::identity}, 1);
    m.layer(1).weights.setZero();
    SupervisedConfig cfg;
    cfg.scaling = LabelScaling::none;
    cfg.train.epochs = 1;
    CHECK(train_supervised(m, zeros, cfg).train_loss.front() == 0.0);

    // Memorize five samples.
    std::vector<LabeledSample> five(5);
    for (auto& f : five) {
        f.features = Eigen::Vector2d(2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0);
        f.label = Eigen::VectorXd::Constant(1, rng.uniform());
    }
    auto big = neural::FnnModel::initialized({2, 32, 32, 1}, {neural::Activation::tanh, neural::Activation::tanh,
                                                              neural::Activation::identity}, 2);
    SupervisedConfig mem;
    mem.scaling = LabelScaling::none;
    mem.holdout_fraction = 0.0;
    mem.train.optimizer = neural::OptimizerKind::adam;
    mem.train.learning_rate = 3e-3;
    mem.train.epochs = 5000;
    mem.train.batch_size = 5;
    CHECK(train_supervised(big, five, mem).train_loss.back() < 1e-6);

    // Duplicating a single sample leaves the loss unchanged.
    SupervisedConfig one = mem;
    one.train.epochs = 20;
    const auto single = train_supervised(big, {five[0]}, one);
    const auto dup = train_supervised(big, {five[0], five[0], five[0]}, one);
    CHECK(single.train_loss.front() == doctest::Approx(dup.train_loss.front()));
    CHECK(single.train_loss.back() == doctest::Approx(dup.train_loss.back()));

    CHECK(generate_labels(small_scenario(), 0, 1).samples.empty());
}

TEST_CASE("fine-tuning with nothing frozen is ordinary training") {
    const auto sc = small_scenario();
    const auto data = generate_labels(sc, 30, 2).samples;
    auto model = neural::FnnModel::initialized({4, 8, 2}, {neural::Activation::tanh, neural::Activation::identity}, 3);
    SupervisedConfig cfg;
    cfg.train.epochs = 5;
    const auto src = train_supervised(model, data, cfg);
    const auto tuned = finetune_transfer(src, data, 0, cfg, 1.0);
    cfg.scaler = src.scaler;
    const auto plain = train_supervised(src.model, data, cfg);
    CHECK(tuned.model.layer(0).weights == plain.model.layer(0).weights);
    CHECK(tuned.train_loss == plain.train_loss);

    // Same task: accuracy is already there before any update.
    const double acc = mean_symmetric_accuracy(src.model, src.scaler, data);
    const auto same = finetune_transfer(src, data, 1, cfg);
    CHECK(same.train_loss.front() == doctest::Approx(src.train_loss.back()).epsilon(0.5));
    CHECK(acc > 0.0);
}

TEST_CASE("bandwidth problem jacobian matches finite differences") {
    const auto sc = small_scenario();
    const BandwidthProblem problem(sc);
    CHECK(problem.reference_hz() > 0.0);
    CounterRng rng(5, 0);
    const auto s = draw_state(sc, rng);
    const Eigen::Vector2d a(0.9, 1.3);
    const auto e = problem.evaluate(s, a);
    CHECK(e.objective == doctest::Approx(2.2));
    for (Eigen::Index k = 0; k < 2; ++k) {
        Eigen::Vector2d up = a, down = a;
        up(k) += 1e-6;
        down(k) -= 1e-6;
        const double fd = (problem.evaluate(s, up).constraints(k) - problem.evaluate(s, down).constraints(k)) / 2e-6;
        CHECK(e.constraint_jacobian(k, k) == doctest::Approx(fd).epsilon(1e-4));
    }
    CHECK_THROWS_AS(problem.evaluate(s, Eigen::Vector3d::Ones()), neural::ShapeError);
}

}
