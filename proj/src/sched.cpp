#include "urllc/sched.hpp"

#include "urllc/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

namespace urllc::sched {

std::optional<int> try_required_rbs(double snr, double packet_bits, double eps, int rb_symbols, int cap) {
    if (!(eps > 0.0 && eps <= 0.5)) throw numerics::DomainError("required_rbs: target must lie in (0, 0.5]");
    if (!(snr >= 0.0) || !(packet_bits > 0.0) || rb_symbols < 1)
        throw std::invalid_argument("required_rbs: bad link parameters");
    const double per_rb = double(rb_symbols) * std::log2(1.0 + snr);
    if (!(per_rb > 0.0)) return std::nullopt;
    const double bound = std::ceil(packet_bits / per_rb);
    if (bound > double(cap)) return std::nullopt;
    for (int n = std::max(1, int(bound)); n <= cap; ++n)
        if (fbl::decoding_error(double(n) * rb_symbols, snr, packet_bits) <= eps) return n;
    return std::nullopt;
}

int required_rbs(double snr, double packet_bits, double eps, int rb_symbols, int cap) {
    const auto n = try_required_rbs(snr, packet_bits, eps, rb_symbols, cap);
    if (!n) throw RbCapExceeded("required_rbs: more than " + std::to_string(cap) + " resource blocks needed");
    return *n;
}

int required_rbs(const fbl::LinkConfig& link, double packet_bits, double eps, int rb_symbols, int cap) {
    return required_rbs(link.snr(), packet_bits, eps, rb_symbols, cap);
}

double reward_indicator(int hol_delay, bool scheduled, bool decode_ok, DelayWindow window) {
    return scheduled && decode_ok && window.contains(hol_delay) ? 1.0 : 0.0;
}

double reward_model_based(int hol_delay, bool scheduled, double eps_c, DelayWindow window, bool log_transform) {
    if (!log_transform) return scheduled && window.contains(hol_delay) ? 1.0 - eps_c : 0.0;
    return scheduled && window.contains(hol_delay) ? -std::log(std::max(eps_c, kLogRewardErrorFloor)) : 0.0;
}

void PotentialSpec::validate() const {
    if (!(d_min > 0 && d_min < d_max && d_max <= d_end)) throw std::invalid_argument("PotentialSpec: need 0 < d_min < d_max <= d_end");
    if (!(peak > 0.0)) throw std::invalid_argument("PotentialSpec: peak must be positive");
}

double potential_triangular(double d, const PotentialSpec& spec) {
    if (d <= 0.0) return 0.0;
    if (d <= spec.d_min) return spec.peak * d / spec.d_min;
    if (d >= spec.d_end) return 0.0;
    return spec.peak * (spec.d_end - d) / double(spec.d_end - spec.d_min);
}

double shape_reward(double reward, double psi_now, double psi_next, double gamma) {
    return reward - psi_now + gamma * psi_next;
}

double cmdp_dual_update(double lambda, double measured_cost, double cost_budget, double step) {
    return std::max(0.0, lambda + step * (measured_cost - cost_budget));
}

double lagrangian_reward(double reward, const std::vector<double>& lambdas, const std::vector<double>& costs) {
    if (lambdas.size() != costs.size()) throw std::invalid_argument("lagrangian_reward: length mismatch");
    for (std::size_t m = 0; m < lambdas.size(); ++m) reward -= lambdas[m] * costs[m];
    return reward;
}

// ---------------------------------------------------------------- environment

void EnvConfig::validate() const {
    if (users < 1) throw std::invalid_argument("EnvConfig: need at least one user");
    if (mean_snr_db.size() != users || arrival_prob.size() != users)
        throw std::invalid_argument("EnvConfig: per-user vectors must have one entry per user");
    for (double p : arrival_prob)
        if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("EnvConfig: arrival probability must lie in [0,1]");
    if (rb_budget < 1 || rb_symbols < 1) throw std::invalid_argument("EnvConfig: RB budget and size must be positive");
    if (!(packet_bits > 0.0)) throw std::invalid_argument("EnvConfig: packet size must be positive");
    if (!(target_eps > 0.0 && target_eps <= 0.5)) throw std::invalid_argument("EnvConfig: target eps must lie in (0, 0.5]");
    if (window.d_min < 0 || window.d_max < window.d_min) throw std::invalid_argument("EnvConfig: bad delay window");
    if (queue_cap < 1) throw std::invalid_argument("EnvConfig: queue capacity must be positive");
    if (cqi_levels < 2 || !(cqi_max_db > cqi_min_db)) throw std::invalid_argument("EnvConfig: bad CQI quantizer");
    if (decode_error_override && !(*decode_error_override >= 0.0 && *decode_error_override <= 1.0))
        throw std::invalid_argument("EnvConfig: decode error override must lie in [0,1]");
}

EnvConfig perturbed(const EnvConfig& cfg, double snr_shift_db, double arrival_scale) {
    EnvConfig out = cfg;
    for (auto& s : out.mean_snr_db) s += snr_shift_db;
    for (auto& p : out.arrival_prob) p = std::clamp(p * arrival_scale, 0.0, 1.0);
    return out;
}

SchedulerEnv::SchedulerEnv(EnvConfig cfg) : cfg_(std::move(cfg)), rng_(cfg_.seed, 0x5c4edULL) {
    cfg_.validate();
    queues_.resize(cfg_.users);
    const std::size_t k = cfg_.users;
    state_.hol_delay.assign(k, 0);
    state_.required_rbs.assign(k, 0);
    state_.cqi.assign(k, 0);
    state_.queue_len.assign(k, 0);
    state_.snr.assign(k, 0.0);
    draw_channels();
}

void SchedulerEnv::draw_channels() {
    for (std::size_t k = 0; k < cfg_.users; ++k) {
        const double fade = -std::log1p(-rng_.uniform());
        const double snr = std::pow(10.0, cfg_.mean_snr_db[k] / 10.0) * fade;
        state_.snr[k] = snr;
        const auto n = try_required_rbs(snr, cfg_.packet_bits, cfg_.target_eps, cfg_.rb_symbols, cfg_.rb_budget);
        state_.required_rbs[k] = n ? *n : cfg_.rb_budget + 1;
        const double db = snr > 0.0 ? 10.0 * std::log10(snr) : cfg_.cqi_min_db;
        const double level = std::floor((db - cfg_.cqi_min_db) / (cfg_.cqi_max_db - cfg_.cqi_min_db) * cfg_.cqi_levels);
        state_.cqi[k] = int(std::clamp(level, 0.0, double(cfg_.cqi_levels - 1)));
        state_.queue_len[k] = queues_[k].size();
        state_.hol_delay[k] = queues_[k].empty() ? 0 : queues_[k].front();
    }
}

double SchedulerEnv::decode_error(std::size_t k, int rbs) const {
    if (rbs <= 0) return 1.0;
    if (cfg_.decode_error_override) return *cfg_.decode_error_override;
    return fbl::decoding_error(double(rbs) * cfg_.rb_symbols, state_.snr.at(k), cfg_.packet_bits);
}

StepResult SchedulerEnv::step(const SchedAction& action) {
    if (action.rbs.size() != cfg_.users) throw BudgetViolation("env step: action has the wrong length");
    int total = 0;
    for (int r : action.rbs) {
        if (r < 0) throw BudgetViolation("env step: negative RB grant");
        total += r;
    }
    if (total > cfg_.rb_budget) throw BudgetViolation("env step: action exceeds the RB budget");

    StepResult out;
    out.rewards.assign(cfg_.users, 0.0);
    out.user_losses.assign(cfg_.users, 0.0);
    for (std::size_t k = 0; k < cfg_.users; ++k) {
        if (action.rbs[k] == 0 || queues_[k].empty()) continue;
        const int d = queues_[k].front();
        const double eps = decode_error(k, action.rbs[k]);
        const bool ok = rng_.uniform() >= eps;
        queues_[k].pop_front();
        switch (cfg_.reward) {
            case RewardMode::indicator: out.rewards[k] = reward_indicator(d, true, ok, cfg_.window); break;
            case RewardMode::model_based: out.rewards[k] = reward_model_based(d, true, eps, cfg_.window, false); break;
            case RewardMode::model_based_log: out.rewards[k] = reward_model_based(d, true, eps, cfg_.window, true); break;
        }
        if (!ok) {
            ++out.info.decode_losses;
            out.user_losses[k] += 1.0;
        } else if (d < cfg_.window.d_min) {
            ++out.info.early_losses;
            out.user_losses[k] += 1.0;
        } else {
            ++out.info.delivered;
        }
    }
    for (std::size_t k = 0; k < cfg_.users; ++k) {
        auto& q = queues_[k];
        for (auto& age : q) ++age;
        while (!q.empty() && q.front() > cfg_.window.d_max) {
            q.pop_front();
            ++out.info.expired_losses;
            out.user_losses[k] += 1.0;
        }
        if (rng_.uniform() < cfg_.arrival_prob[k]) {
            ++out.info.arrivals;
            if (q.size() < cfg_.queue_cap) {
                q.push_back(0);
            } else {
                ++out.info.overflow_losses;
                out.user_losses[k] += 1.0;
            }
        }
    }
    draw_channels();
    return out;
}

Eigen::VectorXd encode_state(const SchedState& s, const EnvConfig& cfg, StateEncoding encoding) {
    const std::size_t k = cfg.users;
    Eigen::VectorXd x(Eigen::Index(4 * k));
    for (std::size_t i = 0; i < k; ++i) {
        const Eigen::Index b = Eigen::Index(4 * i);
        x(b) = s.queue_len[i] > 0 ? 1.0 : 0.0;
        x(b + 1) = double(s.hol_delay[i]) / double(std::max(1, cfg.window.d_max));
        x(b + 2) = encoding == StateEncoding::required_rbs ? double(s.required_rbs[i]) / double(cfg.rb_budget + 1)
                                                           : double(s.cqi[i]) / double(cfg.cqi_levels - 1);
        x(b + 3) = double(std::min(s.queue_len[i], cfg.queue_cap)) / double(cfg.queue_cap);
    }
    return x;
}

namespace {

std::vector<std::size_t> descending(const Eigen::VectorXd& v) {
    std::vector<std::size_t> order(std::size_t(v.size()));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v(Eigen::Index(a)) > v(Eigen::Index(b)); });
    return order;
}

}  // namespace

SchedAction decode_scores(const Eigen::VectorXd& scores, const SchedState& s, const EnvConfig& cfg) {
    SchedAction a{std::vector<int>(cfg.users, 0)};
    int left = cfg.rb_budget;
    for (std::size_t k : descending(scores)) {
        if (scores(Eigen::Index(k)) <= 0.0 || s.queue_len[k] == 0) continue;
        const int n = s.required_rbs[k];
        if (n <= left) {
            a.rbs[k] = n;
            left -= n;
        }
    }
    return a;
}

SchedAction decode_rb_levels(const Eigen::VectorXd& levels, const SchedState& s, const EnvConfig& cfg) {
    SchedAction a{std::vector<int>(cfg.users, 0)};
    int left = cfg.rb_budget;
    for (std::size_t k : descending(levels)) {
        if (s.queue_len[k] == 0) continue;
        const double frac = std::clamp((levels(Eigen::Index(k)) + 1.0) / 2.0, 0.0, 1.0);
        const int want = int(std::lround(frac * cfg.rb_budget));
        a.rbs[k] = std::min(want, left);
        left -= a.rbs[k];
    }
    return a;
}

// ------------------------------------------------------------- replay buffer

PrioritizedReplay::PrioritizedReplay(std::size_t capacity, double eps_w, double beta)
    : capacity_(capacity), eps_w_(eps_w), beta_(beta) {
    if (capacity == 0) throw std::invalid_argument("PrioritizedReplay: capacity must be positive");
    if (!(eps_w > 0.0)) throw std::invalid_argument("PrioritizedReplay: eps_w must be positive");
    leaves_ = 1;
    while (leaves_ < capacity) leaves_ *= 2;
    tree_.assign(2 * leaves_, 0.0);
    data_.reserve(std::min<std::size_t>(capacity, 4096));
}

void PrioritizedReplay::set_leaf(std::size_t index, double value) {
    std::size_t node = leaves_ + index;
    tree_[node] = value;
    for (node /= 2; node >= 1; node /= 2) tree_[node] = tree_[2 * node] + tree_[2 * node + 1];
}

void PrioritizedReplay::add(Transition t) {
    if (data_.size() < capacity_) {
        data_.push_back(std::move(t));
    } else {
        data_[next_] = std::move(t);
    }
    set_leaf(next_, max_w_ + eps_w_);
    next_ = (next_ + 1) % capacity_;
    size_ = std::min(size_ + 1, capacity_);
}

void PrioritizedReplay::update_priority(std::size_t index, double w) {
    if (index >= size_) throw std::out_of_range("PrioritizedReplay: index out of range");
    if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("PrioritizedReplay: priority must be finite and nonnegative");
    max_w_ = std::max(max_w_, w);
    set_leaf(index, w + eps_w_);
}

double PrioritizedReplay::probability(std::size_t index) const {
    if (index >= size_) throw std::out_of_range("PrioritizedReplay: index out of range");
    return tree_[leaves_ + index] / tree_[1];
}

PrioritizedReplay::Batch PrioritizedReplay::sample(std::size_t batch, CounterRng& rng) const {
    if (size_ == 0) throw std::logic_error("PrioritizedReplay: sampling from an empty buffer");
    Batch out;
    const double total = tree_[1];
    double largest = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
        double u = rng.uniform() * total;
        std::size_t node = 1;
        while (node < leaves_) {
            const std::size_t left = 2 * node;
            if (u < tree_[left] || tree_[left + 1] <= 0.0) {
                node = left;
            } else {
                u -= tree_[left];
                node = left + 1;
            }
        }
        const std::size_t idx = std::min(node - leaves_, size_ - 1);
        const double p = tree_[leaves_ + idx] / total;
        const double c = std::pow(1.0 / (double(size_) * p), beta_);
        out.indices.push_back(idx);
        out.corrections.push_back(c);
        largest = std::max(largest, c);
    }
    for (auto& c : out.corrections) c /= largest;
    return out;
}

PrioritizedReplay::Batch PrioritizedReplay::sample_uniform(std::size_t batch, CounterRng& rng) const {
    if (size_ == 0) throw std::logic_error("PrioritizedReplay: sampling from an empty buffer");
    Batch out;
    for (std::size_t b = 0; b < batch; ++b) {
        out.indices.push_back(std::size_t(rng() % size_));
        out.corrections.push_back(1.0);
    }
    return out;
}

// ----------------------------------------------------------------------- DDPG

AgentConfig AgentConfig::plain(std::uint64_t seed) {
    AgentConfig c;
    c.encoding = StateEncoding::raw_cqi;
    c.reward = RewardMode::indicator;
    c.shaping = false;
    c.multi_head = false;
    c.prioritized = false;
    c.seed = seed;
    return c;
}

AgentConfig AgentConfig::knowledge_assisted(std::uint64_t seed) {
    AgentConfig c;
    c.seed = seed;
    return c;
}

DdpgNetworks make_networks(std::size_t state_size, std::size_t action_size, std::size_t heads,
                           const AgentConfig& cfg) {
    using neural::Activation;
    std::vector<std::size_t> actor_sizes{state_size}, critic_sizes{state_size + action_size};
    std::vector<Activation> hidden_acts;
    for (std::size_t i = 0; i < cfg.hidden_layers; ++i) {
        actor_sizes.push_back(cfg.hidden);
        critic_sizes.push_back(cfg.hidden);
        hidden_acts.push_back(Activation::relu);
    }
    actor_sizes.push_back(action_size);
    critic_sizes.push_back(heads);
    auto actor_acts = hidden_acts, critic_acts = hidden_acts;
    actor_acts.push_back(Activation::tanh);
    critic_acts.push_back(Activation::identity);

    DdpgNetworks n;
    n.actor = neural::FnnModel::initialized(actor_sizes, actor_acts, cfg.seed * 2 + 1);
    n.critic = neural::FnnModel::initialized(critic_sizes, critic_acts, cfg.seed * 2 + 2);
    n.actor.layer(n.actor.layer_count() - 1).weights *= 0.1;
    n.critic.layer(n.critic.layer_count() - 1).weights *= 0.1;
    n.actor_target = n.actor;
    n.critic_target = n.critic;
    return n;
}

namespace {

Eigen::MatrixXd stack(const Eigen::MatrixXd& top, const Eigen::MatrixXd& bottom) {
    Eigen::MatrixXd out(top.rows() + bottom.rows(), top.cols());
    out << top, bottom;
    return out;
}

}  // namespace

DdpgStats ddpg_update(DdpgNetworks& nets, neural::Optimizer& actor_opt, neural::Optimizer& critic_opt,
                      const std::vector<const Transition*>& batch, const std::vector<double>& corrections,
                      double gamma, double tau, double action_reg) {
    if (batch.empty() || corrections.size() != batch.size())
        throw std::invalid_argument("ddpg_update: batch and corrections must be nonempty and equal in length");
    const Eigen::Index n = Eigen::Index(batch.size());
    const Eigen::Index sdim = batch[0]->state.size(), adim = batch[0]->action.size(),
                       heads = batch[0]->rewards.size();
    if (std::size_t(heads) != nets.critic.output_size())
        throw neural::ShapeError("ddpg_update: reward vector does not match the critic heads");
    Eigen::MatrixXd s(sdim, n), a(adim, n), r(heads, n), s2(sdim, n);
    Eigen::RowVectorXd live(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        s.col(j) = batch[std::size_t(j)]->state;
        a.col(j) = batch[std::size_t(j)]->action;
        r.col(j) = batch[std::size_t(j)]->rewards;
        s2.col(j) = batch[std::size_t(j)]->next_state;
        live(j) = batch[std::size_t(j)]->done ? 0.0 : 1.0;
    }

    Eigen::MatrixXd y = r;
    if (gamma != 0.0) {
        const Eigen::MatrixXd q2 = nets.critic_target.forward_batch(stack(s2, nets.actor_target.forward_batch(s2)));
        y += gamma * (q2.array().rowwise() * live.array()).matrix();
    }

    DdpgStats stats;
    const auto ccache = neural::forward_cached(nets.critic, stack(s, a));
    const Eigen::MatrixXd diff = ccache.outputs.back() - y;
    Eigen::MatrixXd upstream(heads, n);
    const double norm = double(n * heads);
    for (Eigen::Index j = 0; j < n; ++j) {
        const double w = corrections[std::size_t(j)];
        const double td = diff.col(j).squaredNorm();
        stats.td_errors.push_back(td);
        stats.critic_loss += w * td / norm;
        upstream.col(j) = 2.0 * w * diff.col(j) / norm;
    }
    if (!std::isfinite(stats.critic_loss)) throw std::runtime_error("ddpg_update: critic loss is not finite");
    critic_opt.step(nets.critic, neural::backward(nets.critic, ccache, upstream));

    const auto acache = neural::forward_cached(nets.actor, s);
    const auto qcache = neural::forward_cached(nets.critic, stack(s, acache.outputs.back()));
    const Eigen::MatrixXd up_q = Eigen::MatrixXd::Constant(heads, n, -1.0 / double(n));
    const auto qgrad = neural::backward(nets.critic, qcache, up_q);
    const Eigen::MatrixXd reg = action_reg != 0.0 ? Eigen::MatrixXd(acache.pre.back() * (action_reg / double(n)))
                                                  : Eigen::MatrixXd();
    const auto agrad = neural::backward(nets.actor, acache, qgrad.input.bottomRows(adim), reg);
    if (!agrad.finite()) throw std::runtime_error("ddpg_update: actor gradient is not finite");
    actor_opt.step(nets.actor, agrad);

    neural::soft_update(nets.critic_target, nets.critic, tau);
    neural::soft_update(nets.actor_target, nets.actor, tau);
    return stats;
}

Eigen::VectorXd critic_action_gradient(const neural::FnnModel& critic, const Eigen::VectorXd& state,
                                       const Eigen::VectorXd& action) {
    Eigen::VectorXd x(state.size() + action.size());
    x << state, action;
    const auto g = neural::backward(critic, x, Eigen::VectorXd::Ones(Eigen::Index(critic.output_size())));
    return g.input.col(0).tail(action.size());
}

SchedulerAgent::SchedulerAgent(const EnvConfig& env, AgentConfig cfg)
    : cfg_(cfg),
      users_(env.users),
      nets_(make_networks(4 * env.users, env.users, cfg.multi_head ? env.users : 1, cfg)),
      actor_opt_(nets_.actor, neural::TrainConfig{cfg.actor_lr, cfg.batch, 1, cfg.seed, neural::OptimizerKind::adam}),
      critic_opt_(nets_.critic, neural::TrainConfig{cfg.critic_lr, cfg.batch, 1, cfg.seed, neural::OptimizerKind::adam}),
      replay_(cfg.replay_capacity, cfg.eps_w, cfg.priority_beta),
      rng_(cfg.seed, 0xa9e27ULL) {
    env.validate();
    if (cfg_.shaping) cfg_.potential.validate();
}

SchedAction SchedulerAgent::act(const SchedState& s, const EnvConfig& env, CounterRng* noise) const {
    Eigen::VectorXd a = nets_.actor.forward(encode_state(s, env, cfg_.encoding));
    if (noise) {
        std::normal_distribution<double> gauss(0.0, cfg_.exploration_sigma);
        for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = std::clamp(a(i) + gauss(*noise), -1.0, 1.0);
    }
    return cfg_.encoding == StateEncoding::required_rbs ? decode_scores(a, s, env) : decode_rb_levels(a, s, env);
}

Eigen::VectorXd SchedulerAgent::head_rewards(const StepResult& r, const SchedState& before, const SchedState& after,
                                             double lambda) const {
    Eigen::VectorXd per_user = Eigen::VectorXd::Zero(Eigen::Index(users_));
    for (std::size_t k = 0; k < users_; ++k) {
        double v = r.rewards[k];
        if (lambda > 0.0) v = lagrangian_reward(v, {lambda}, {r.user_losses[k]});
        if (cfg_.shaping)
            v = shape_reward(v, potential_triangular(before.hol_delay[k], cfg_.potential),
                             potential_triangular(after.hol_delay[k], cfg_.potential), cfg_.gamma);
        per_user(Eigen::Index(k)) = v;
    }
    if (cfg_.multi_head) return per_user;
    return Eigen::VectorXd::Constant(1, per_user.sum());
}

std::vector<WindowRecord> SchedulerAgent::train(SchedulerEnv& env, const TrainSchedule& schedule) {
    const EnvConfig& ecfg = env.config();
    if (ecfg.users != users_) throw std::invalid_argument("SchedulerAgent::train: environment has a different user count");
    if (ecfg.reward != cfg_.reward) throw std::invalid_argument("SchedulerAgent::train: environment uses a different reward");
    std::vector<WindowRecord> windows;
    std::size_t win_arrivals = 0, win_losses = 0;
    double win_reward = 0.0, lambda = 0.0;
    std::vector<const Transition*> batch;

    for (std::size_t t = 0; t < schedule.slots; ++t) {
        const SchedState before = env.state();
        const Eigen::VectorXd x = encode_state(before, ecfg, cfg_.encoding);
        Eigen::VectorXd a = nets_.actor.forward(x);
        if (schedule.explore) {
            std::normal_distribution<double> gauss(0.0, cfg_.exploration_sigma);
            for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = std::clamp(a(i) + gauss(rng_), -1.0, 1.0);
        }
        const SchedAction action = cfg_.encoding == StateEncoding::required_rbs ? decode_scores(a, before, ecfg)
                                                                                : decode_rb_levels(a, before, ecfg);
        const StepResult res = env.step(action);
        const SchedState& after = env.state();
        const Eigen::VectorXd rewards = head_rewards(res, before, after, schedule.cmdp.enabled ? lambda : 0.0);
        replay_.add({x, a, rewards, encode_state(after, ecfg, cfg_.encoding), false});

        win_arrivals += res.info.arrivals;
        win_losses += res.info.losses();
        win_reward += std::accumulate(res.rewards.begin(), res.rewards.end(), 0.0);

        if (t >= cfg_.warmup_slots && t % cfg_.update_every == 0 && replay_.size() >= cfg_.batch) {
            const auto pick = cfg_.prioritized ? replay_.sample(cfg_.batch, rng_) : replay_.sample_uniform(cfg_.batch, rng_);
            batch.clear();
            for (auto i : pick.indices) batch.push_back(&replay_.at(i));
            const auto stats = ddpg_update(nets_, actor_opt_, critic_opt_, batch, pick.corrections, cfg_.gamma, cfg_.tau,
                                           cfg_.action_reg);
            if (cfg_.prioritized)
                for (std::size_t j = 0; j < pick.indices.size(); ++j) replay_.update_priority(pick.indices[j], stats.td_errors[j]);
        }

        if ((t + 1) % schedule.eval_window == 0) {
            const double rate = win_arrivals ? double(win_losses) / double(win_arrivals) : 0.0;
            if (schedule.cmdp.enabled) lambda = cmdp_dual_update(lambda, rate, schedule.cmdp.loss_budget, schedule.cmdp.step);
            windows.push_back({t + 1, rate, win_reward / double(schedule.eval_window), lambda});
            win_arrivals = win_losses = 0;
            win_reward = 0.0;
        }
    }
    return windows;
}

double SchedulerAgent::evaluate(SchedulerEnv& env, std::size_t slots) const {
    std::size_t arrivals = 0, losses = 0;
    for (std::size_t t = 0; t < slots; ++t) {
        const StepResult r = env.step(act(env.state(), env.config(), nullptr));
        arrivals += r.info.arrivals;
        losses += r.info.losses();
    }
    return arrivals ? double(losses) / double(arrivals) : 0.0;
}

void SchedulerAgent::enter_finetune() {
    actor_opt_.set_learning_rate(cfg_.finetune_lr);
    critic_opt_.set_learning_rate(cfg_.finetune_lr);
}

void SchedulerAgent::set_actor(const neural::FnnModel& actor) {
    if (actor.layer_sizes() != nets_.actor.layer_sizes())
        throw neural::ShapeError("SchedulerAgent::set_actor: layer sizes do not match the agent");
    nets_.actor = actor;
    nets_.actor_target = actor;
}

void write_windows_csv(std::ostream& out, const std::vector<WindowRecord>& windows) {
    out << "slot,loss_rate,mean_reward,lambda\n";
    for (const auto& w : windows) out << w.slot << ',' << w.loss_rate << ',' << w.mean_reward << ',' << w.lambda << '\n';
}

}  // namespace urllc::sched
