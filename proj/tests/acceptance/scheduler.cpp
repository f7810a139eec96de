// Knowledge-assisted versus plain DDPG scheduling.

#include "acceptance.hpp"

#include "urllc/sched.hpp"

#include <cstdio>

namespace urllc::acceptance {

namespace {

struct Outcome {
    double eval_loss;
    double first_window_loss;
    double last_window_loss;
};

// Trains on one environment stream and evaluates greedily on a fresh one.
Outcome train_and_evaluate(const sched::AgentConfig& agent_cfg, std::uint64_t seed) {
    sched::EnvConfig env;  // 4 users, 12 RBs per slot
    env.reward = agent_cfg.reward;
    env.seed = 700 + seed;
    sched::SchedulerEnv train_env(env);
    sched::SchedulerAgent agent(env, agent_cfg);
    sched::TrainSchedule schedule;
    schedule.slots = 100000;
    schedule.eval_window = 10000;
    const auto windows = agent.train(train_env, schedule);

    env.seed = 7700 + seed;
    sched::SchedulerEnv eval_env(env);
    return {agent.evaluate(eval_env, 20000), windows.front().loss_rate, windows.back().loss_rate};
}

}  // namespace

Verdict ac7() {
    std::vector<double> ka, plain;
    std::string plain_trend;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto k = train_and_evaluate(sched::AgentConfig::knowledge_assisted(seed), seed);
        const auto p = train_and_evaluate(sched::AgentConfig::plain(seed), seed);
        ka.push_back(k.eval_loss);
        plain.push_back(p.eval_loss);
        plain_trend += fmt("%.3f->%.3f ", p.first_window_loss, p.last_window_loss);
        std::fprintf(stderr, "AC-7 seed %llu: loss knowledge_assisted=%.5f plain=%.5f\n", (unsigned long long)seed,
                     k.eval_loss, p.eval_loss);
    }
    const double mk = median(ka), mp = median(plain);
    const bool pass = mp >= 2.0 * mk;
    return {pass, fmt("median eval loss over 5 seeds: knowledge_assisted=%.5f plain=%.5f ratio=%.1f (need >= 2); "
                      "plain training-window loss first->last per seed: ",
                      mk, mp, mk > 0.0 ? mp / mk : 0.0) +
                      plain_trend};
}

}  // namespace urllc::acceptance
