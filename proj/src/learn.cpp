#include "urllc/learn.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>

namespace urllc::learn {

namespace {

double to_unit_interval(double v, double lo, double hi) { return hi > lo ? 2.0 * (v - lo) / (hi - lo) - 1.0 : 0.0; }

Eigen::MatrixXd feature_matrix(const std::vector<LabeledSample>& samples, const std::vector<std::size_t>& idx,
                               std::size_t begin, std::size_t end) {
    Eigen::MatrixXd x(samples[idx[begin]].features.size(), Eigen::Index(end - begin));
    for (std::size_t j = begin; j < end; ++j) x.col(Eigen::Index(j - begin)) = samples[idx[j]].features;
    return x;
}

}  // namespace

void LearningScenario::validate() const {
    if (users.empty()) throw std::invalid_argument("LearningScenario: no users");
    for (const auto& u : users) u.validate();
    if (!(gain_db_max >= gain_db_min)) throw std::invalid_argument("LearningScenario: gain range is reversed");
    if (!(rate_scale_min > 0.0 && rate_scale_max >= rate_scale_min))
        throw std::invalid_argument("LearningScenario: bad arrival-rate scale range");
    if (label == LabelKind::bandwidth)
        for (const auto& u : users)
            if (u.service != crosslayer::ServiceClass::urllc || !u.fixed_power_w)
                throw std::invalid_argument("LearningScenario: bandwidth labels need URLLC users with fixed power");
}

LabeledSample draw_state(const LearningScenario& scenario, CounterRng& rng) {
    const std::size_t k = scenario.users.size();
    LabeledSample s;
    s.gains.resize(k);
    s.rate_scales.resize(k);
    s.features.resize(Eigen::Index(2 * k));
    for (std::size_t i = 0; i < k; ++i) {
        const double db = scenario.gain_db_min + (scenario.gain_db_max - scenario.gain_db_min) * rng.uniform();
        const double rate = scenario.rate_scale_min + (scenario.rate_scale_max - scenario.rate_scale_min) * rng.uniform();
        s.gains[i] = std::pow(10.0, db / 10.0);
        s.rate_scales[i] = rate;
        s.features(Eigen::Index(i)) = to_unit_interval(db, scenario.gain_db_min, scenario.gain_db_max);
        s.features(Eigen::Index(k + i)) = to_unit_interval(rate, scenario.rate_scale_min, scenario.rate_scale_max);
    }
    return s;
}

std::vector<crosslayer::UserProfile> users_for(const LearningScenario& scenario, const LabeledSample& state) {
    auto users = scenario.users;
    for (std::size_t i = 0; i < users.size(); ++i) {
        users[i].large_scale_gain = state.gains.at(i);
        if (users[i].source) users[i].source->rate_pkts_per_s *= state.rate_scales.at(i);
    }
    return users;
}

Eigen::VectorXd solve_label(const LearningScenario& scenario, const LabeledSample& state) {
    const auto users = users_for(scenario, state);
    Eigen::VectorXd label(Eigen::Index(users.size()));
    if (scenario.label == LabelKind::bandwidth) {
        for (std::size_t i = 0; i < users.size(); ++i) {
            const auto sol = crosslayer::min_bandwidth_for_user(users[i], scenario.budget, scenario.solver);
            if (!(sol.constraint <= 0.0)) throw crosslayer::Infeasible("solve_label: bandwidth label violates its constraint");
            label(Eigen::Index(i)) = sol.bandwidth_hz;
        }
        return label;
    }
    const auto alloc = crosslayer::min_total_power_allocation(users, scenario.budget, scenario.solver);
    for (std::size_t i = 0; i < users.size(); ++i) {
        if (!alloc.feasible[i]) throw crosslayer::Infeasible("solve_label: allocation is not feasible");
        label(Eigen::Index(i)) = alloc.power_w[i];
    }
    return label;
}

LabelSet generate_labels(const LearningScenario& scenario, std::size_t count, std::uint64_t seed) {
    scenario.validate();
    LabelSet set;
    set.samples.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        CounterRng rng(seed, i);
        std::size_t failures = 0;
        while (true) {
            LabeledSample s = draw_state(scenario, rng);
            try {
                s.label = solve_label(scenario, s);
                set.samples.push_back(std::move(s));
                break;
            } catch (const crosslayer::Infeasible&) {
                ++set.resampled;
                if (++failures > scenario.max_retries)
                    throw SystematicallyInfeasible("generate_labels: sample " + std::to_string(i) + " infeasible after " +
                                                   std::to_string(scenario.max_retries) + " retries");
            }
        }
    }
    return set;
}

void write_samples_csv(std::ostream& out, const std::vector<LabeledSample>& samples) {
    const std::size_t k = samples.empty() ? 0 : samples.front().gains.size();
    std::vector<std::string> cols;
    for (std::size_t i = 0; i < k; ++i) cols.push_back("gain_db_" + std::to_string(i));
    for (std::size_t i = 0; i < k; ++i) cols.push_back("rate_scale_" + std::to_string(i));
    for (std::size_t i = 0; i < k; ++i) cols.push_back("label_" + std::to_string(i));
    for (std::size_t c = 0; c < cols.size(); ++c) out << (c ? "," : "") << cols[c];
    out << '\n' << std::setprecision(17);
    for (const auto& s : samples) {
        for (std::size_t i = 0; i < k; ++i) out << (i ? "," : "") << 10.0 * std::log10(s.gains[i]);
        for (std::size_t i = 0; i < k; ++i) out << ',' << s.rate_scales[i];
        for (Eigen::Index i = 0; i < s.label.size(); ++i) out << ',' << s.label(i);
        out << '\n';
    }
}

// ------------------------------------------------------------------ supervised

LabelScaler LabelScaler::fit(const std::vector<LabeledSample>& samples, LabelScaling scaling) {
    LabelScaler s;
    s.scaling = scaling;
    if (samples.empty()) throw std::invalid_argument("LabelScaler::fit: no samples");
    const Eigen::Index d = samples.front().label.size();
    s.mean = Eigen::VectorXd::Zero(d);
    s.stddev = Eigen::VectorXd::Ones(d);
    if (scaling == LabelScaling::none) return s;
    auto value = [&](const LabeledSample& x) -> Eigen::VectorXd {
        if (scaling == LabelScaling::log_standardize) {
            if ((x.label.array() <= 0.0).any()) throw std::invalid_argument("LabelScaler: log scaling needs positive labels");
            return x.label.array().log().matrix();
        }
        return x.label;
    };
    for (const auto& x : samples) s.mean += value(x);
    s.mean /= double(samples.size());
    Eigen::VectorXd var = Eigen::VectorXd::Zero(d);
    for (const auto& x : samples) var += (value(x) - s.mean).cwiseAbs2();
    var /= double(samples.size());
    for (Eigen::Index i = 0; i < d; ++i) s.stddev(i) = var(i) > 1e-24 ? std::sqrt(var(i)) : 1.0;
    return s;
}

Eigen::VectorXd LabelScaler::to_target(const Eigen::VectorXd& label) const {
    if (scaling == LabelScaling::none) return label;
    const Eigen::VectorXd v = scaling == LabelScaling::log_standardize ? Eigen::VectorXd(label.array().log()) : label;
    return ((v - mean).array() / stddev.array()).matrix();
}

Eigen::VectorXd LabelScaler::to_label(const Eigen::VectorXd& output) const {
    if (scaling == LabelScaling::none) return output;
    const Eigen::VectorXd v = (output.array() * stddev.array()).matrix() + mean;
    return scaling == LabelScaling::log_standardize ? Eigen::VectorXd(v.array().exp()) : v;
}

SupervisedResult train_supervised(neural::FnnModel model, const std::vector<LabeledSample>& samples,
                                  const SupervisedConfig& cfg) {
    cfg.train.validate();
    if (samples.empty()) throw std::invalid_argument("train_supervised: no samples");
    for (const auto& s : samples)
        if (std::size_t(s.features.size()) != model.input_size() || std::size_t(s.label.size()) != model.output_size())
            throw neural::ShapeError("train_supervised: sample dimensions do not match the model");
    if (!(cfg.holdout_fraction >= 0.0 && cfg.holdout_fraction < 1.0))
        throw std::invalid_argument("train_supervised: holdout fraction must lie in [0, 1)");

    CounterRng rng(cfg.train.seed, 0x5u);
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t holdout = std::size_t(double(samples.size()) * cfg.holdout_fraction);
    if (holdout >= samples.size()) holdout = samples.size() - 1;
    std::vector<std::size_t> train(order.begin() + std::ptrdiff_t(holdout), order.end());
    std::vector<std::size_t> held(order.begin(), order.begin() + std::ptrdiff_t(holdout));

    SupervisedResult result;
    if (cfg.scaler) {
        result.scaler = *cfg.scaler;
    } else {
        std::vector<LabeledSample> fit_set;
        for (auto i : train) fit_set.push_back(samples[i]);
        result.scaler = LabelScaler::fit(fit_set, cfg.scaling);
    }
    std::vector<Eigen::VectorXd> targets;
    targets.reserve(samples.size());
    for (const auto& s : samples) targets.push_back(result.scaler.to_target(s.label));

    auto mse = [&](const std::vector<std::size_t>& idx) {
        if (idx.empty()) return 0.0;
        double acc = 0.0;
        const std::size_t chunk = 1024;
        for (std::size_t b = 0; b < idx.size(); b += chunk) {
            const std::size_t e = std::min(idx.size(), b + chunk);
            const Eigen::MatrixXd out = model.forward_batch(feature_matrix(samples, idx, b, e));
            for (std::size_t j = b; j < e; ++j) acc += (out.col(Eigen::Index(j - b)) - targets[idx[j]]).squaredNorm();
        }
        return acc / double(idx.size() * model.output_size());
    };
    auto record = [&](std::size_t epoch) {
        const double tl = mse(train);
        if (!std::isfinite(tl))
            throw Diverged("train_supervised: training loss is not finite at epoch " + std::to_string(epoch));
        result.train_loss.push_back(tl);
        if (!held.empty()) result.holdout_loss.push_back(mse(held));
    };

    record(0);
    neural::Optimizer opt(model, cfg.train);
    const std::size_t batch = std::min(cfg.train.batch_size, train.size());
    const double out_dim = double(model.output_size());
    for (std::size_t epoch = 1; epoch <= cfg.train.epochs; ++epoch) {
        opt.set_learning_rate(cfg.train.learning_rate_at(epoch - 1));
        std::shuffle(train.begin(), train.end(), rng);
        for (std::size_t b = 0; b < train.size(); b += batch) {
            const std::size_t e = std::min(train.size(), b + batch);
            const auto cache = neural::forward_cached(model, feature_matrix(samples, train, b, e));
            Eigen::MatrixXd upstream = cache.outputs.back();
            for (std::size_t j = b; j < e; ++j) upstream.col(Eigen::Index(j - b)) -= targets[train[j]];
            upstream *= 2.0 / (double(e - b) * out_dim);
            const auto grads = neural::backward(model, cache, upstream);
            if (!grads.finite())
                throw Diverged("train_supervised: non-finite gradient at epoch " + std::to_string(epoch));
            opt.step(model, grads);
            ++result.steps;
        }
        record(epoch);
    }
    result.model = std::move(model);
    return result;
}

Eigen::VectorXd predict(const neural::FnnModel& model, const LabelScaler& scaler, const Eigen::VectorXd& features) {
    return scaler.to_label(model.forward(features));
}

SupervisedResult finetune_transfer(const SupervisedResult& source, const std::vector<LabeledSample>& new_samples,
                                   std::size_t frozen_layers, SupervisedConfig cfg, double lr_scale) {
    if (frozen_layers >= source.model.layer_count() && source.model.layer_count() > 0)
        throw std::out_of_range("finetune_transfer: must leave at least one layer trainable");
    neural::FnnModel model = source.model;
    model.freeze_prefix(frozen_layers);
    cfg.scaler = source.scaler;
    cfg.train.learning_rate *= lr_scale;
    return train_supervised(std::move(model), new_samples, cfg);
}

double normalized_accuracy(const Eigen::VectorXd& approx, const Eigen::VectorXd& optimal) {
    if (approx.size() != optimal.size()) throw std::invalid_argument("normalized_accuracy: length mismatch");
    const double opt = optimal.sum();
    if (opt == 0.0) throw std::invalid_argument("normalized_accuracy: optimal total is zero");
    return 1.0 - (approx.sum() - opt) / opt;
}

double mean_symmetric_accuracy(const neural::FnnModel& model, const LabelScaler& scaler,
                               const std::vector<LabeledSample>& samples) {
    if (samples.empty()) throw std::invalid_argument("mean_symmetric_accuracy: no samples");
    double acc = 0.0;
    for (const auto& s : samples) {
        const double eta = normalized_accuracy(predict(model, scaler, s.features), s.label);
        acc += std::min(eta, 2.0 - eta);
    }
    return acc / double(samples.size());
}

std::vector<double> qos_errors(const LearningScenario& scenario, const LabeledSample& state,
                               const Eigen::VectorXd& bandwidth_hz) {
    if (std::size_t(bandwidth_hz.size()) != scenario.users.size())
        throw std::invalid_argument("qos_errors: one bandwidth per user expected");
    const auto users = users_for(scenario, state);
    std::vector<double> out;
    for (std::size_t k = 0; k < users.size(); ++k)
        out.push_back(crosslayer::relative_qos_error(bandwidth_hz(Eigen::Index(k)), users[k], scenario.budget, scenario.solver));
    return out;
}

std::optional<std::size_t> samples_to_accuracy(const std::vector<LadderPoint>& ladder, double target) {
    std::optional<std::size_t> best;
    for (const auto& p : ladder)
        if (p.accuracy >= target && (!best || p.samples < *best)) best = p.samples;
    return best;
}

// --------------------------------------------------------------- primal-dual

BandwidthProblem::BandwidthProblem(LearningScenario scenario, std::optional<double> reference_hz)
    : scenario_(std::move(scenario)) {
    scenario_.validate();
    if (reference_hz) {
        if (!(*reference_hz > 0.0)) throw std::invalid_argument("BandwidthProblem: reference must be positive");
        reference_hz_ = *reference_hz;
        return;
    }
    LabeledSample mid;
    const double db = 0.5 * (scenario_.gain_db_min + scenario_.gain_db_max);
    mid.gains.assign(scenario_.users.size(), std::pow(10.0, db / 10.0));
    mid.rate_scales.assign(scenario_.users.size(), 0.5 * (scenario_.rate_scale_min + scenario_.rate_scale_max));
    const Eigen::VectorXd w = solve_label(LearningScenario{scenario_}, mid);
    reference_hz_ = w.mean();
}

PrimalDualProblem::Evaluation BandwidthProblem::evaluate(const LabeledSample& state,
                                                         const Eigen::VectorXd& action) const {
    const auto users = users_for(scenario_, state);
    const Eigen::Index k = Eigen::Index(users.size());
    if (action.size() != k) throw neural::ShapeError("BandwidthProblem: action has the wrong length");
    Evaluation e{action.sum(), Eigen::VectorXd::Ones(k), Eigen::VectorXd(k), Eigen::MatrixXd::Zero(k, k)};
    for (Eigen::Index i = 0; i < k; ++i) {
        const double w = reference_hz_ * std::max(action(i), 1e-9);
        const auto rc = crosslayer::relative_constraint(users[std::size_t(i)], scenario_.budget, w, scenario_.solver);
        e.constraints(i) = rc.value;
        e.constraint_jacobian(i, i) = rc.derivative * reference_hz_;
    }
    return e;
}

PrimalDualResult train_unsupervised_primal_dual(neural::FnnModel policy, neural::FnnModel multiplier,
                                                const PrimalDualProblem& problem,
                                                const std::vector<LabeledSample>& states,
                                                const PrimalDualConfig& cfg) {
    cfg.primal.validate();
    if (states.empty()) throw std::invalid_argument("train_unsupervised_primal_dual: no states");
    const std::size_t m = problem.constraint_size();
    if (policy.output_size() != problem.action_size())
        throw neural::ShapeError("train_unsupervised_primal_dual: policy output does not match the action size");
    if (!cfg.scalar_multiplier) {
        if (multiplier.output_size() != m || multiplier.input_size() != policy.input_size())
            throw neural::ShapeError("train_unsupervised_primal_dual: multiplier network has the wrong shape");
        if (multiplier.layers().back().activation != neural::Activation::softplus)
            throw std::invalid_argument("train_unsupervised_primal_dual: multiplier network must end in softplus");
    }

    neural::TrainConfig dual_cfg = cfg.primal;
    dual_cfg.learning_rate = cfg.primal.learning_rate * cfg.dual_rate_ratio;
    neural::Optimizer primal_opt(policy, cfg.primal);
    std::optional<neural::Optimizer> dual_opt;
    if (!cfg.scalar_multiplier) dual_opt.emplace(multiplier, dual_cfg);

    PrimalDualResult result;
    result.scalar_multipliers = Eigen::VectorXd::Zero(Eigen::Index(m));
    result.min_multiplier_seen = std::numeric_limits<double>::infinity();

    CounterRng rng(cfg.primal.seed, 0x9du);
    std::vector<std::size_t> order(states.size());
    std::iota(order.begin(), order.end(), 0);
    const std::size_t batch = std::min(cfg.primal.batch_size, states.size());
    double best_violation = std::numeric_limits<double>::infinity();
    std::size_t best_epoch = 0;

    for (std::size_t epoch = 0; epoch < cfg.primal.epochs; ++epoch) {
        const double dual_lr = dual_cfg.learning_rate_at(epoch);
        primal_opt.set_learning_rate(cfg.primal.learning_rate_at(epoch));
        if (dual_opt) dual_opt->set_learning_rate(dual_lr);
        std::shuffle(order.begin(), order.end(), rng);
        double violation = 0.0, objective = 0.0, mult = 0.0;
        for (std::size_t b = 0; b < order.size(); b += batch) {
            const std::size_t e = std::min(order.size(), b + batch);
            const double n = double(e - b);
            const Eigen::MatrixXd x = feature_matrix(states, order, b, e);
            const auto pcache = neural::forward_cached(policy, x);
            std::optional<neural::ForwardCache> mcache;
            Eigen::MatrixXd mu;
            if (cfg.scalar_multiplier) {
                mu = result.scalar_multipliers.replicate(1, Eigen::Index(e - b));
            } else {
                mcache = neural::forward_cached(multiplier, x);
                mu = mcache->outputs.back();
            }
            result.min_multiplier_seen = std::min(result.min_multiplier_seen, mu.minCoeff());

            Eigen::MatrixXd up_policy(pcache.outputs.back().rows(), x.cols());
            Eigen::MatrixXd up_mult(Eigen::Index(m), x.cols());
            for (Eigen::Index j = 0; j < x.cols(); ++j) {
                const auto ev = problem.evaluate(states[order[b + std::size_t(j)]], pcache.outputs.back().col(j));
                if (!std::isfinite(ev.objective) || !ev.constraints.allFinite())
                    throw Diverged("train_unsupervised_primal_dual: non-finite evaluation at epoch " +
                                   std::to_string(epoch));
                const Eigen::VectorXd weight = mu.col(j) + cfg.penalty * ev.constraints.cwiseMax(0.0);
                up_policy.col(j) = (ev.objective_grad + ev.constraint_jacobian.transpose() * weight) / n;
                up_mult.col(j) = -ev.constraints / n;
                objective += ev.objective;
                violation += ev.constraints.cwiseMax(0.0).mean();
                mult += mu.col(j).mean();
            }
            const auto pg = neural::backward(policy, pcache, up_policy);
            if (!pg.finite()) throw Diverged("train_unsupervised_primal_dual: non-finite policy gradient");
            primal_opt.step(policy, pg);
            if (cfg.scalar_multiplier) {
                const Eigen::VectorXd mean_c = -up_mult.rowwise().sum();
                result.scalar_multipliers =
                    (result.scalar_multipliers + dual_lr * mean_c).cwiseMax(0.0);
            } else {
                const auto mg = neural::backward(multiplier, *mcache, up_mult);
                if (!mg.finite()) throw Diverged("train_unsupervised_primal_dual: non-finite multiplier gradient");
                dual_opt->step(multiplier, mg);
            }
        }
        const double count = double(states.size());
        result.violation_trace.push_back(violation / count);
        result.objective_trace.push_back(objective / count);
        result.multiplier_trace.push_back(mult / count);
        if (result.violation_trace.back() < best_violation * (1.0 - 1e-3)) {
            best_violation = result.violation_trace.back();
            best_epoch = epoch;
        } else if (epoch - best_epoch > cfg.patience && best_violation > 0.0) {
            result.stalled = true;
        }
    }
    result.policy = std::move(policy);
    result.multiplier = std::move(multiplier);
    return result;
}

}  // namespace urllc::learn
