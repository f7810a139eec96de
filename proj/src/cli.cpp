#include "urllc/cli.hpp"

#include "urllc/crosslayer.hpp"
#include "urllc/fbl.hpp"
#include "urllc/learn.hpp"
#include "urllc/neural.hpp"
#include "urllc/qos.hpp"
#include "urllc/scenario.hpp"
#include "urllc/sched.hpp"
#include "urllc/sim.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <ostream>
#include <map>
#include <set>
#include <sstream>

namespace urllc::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

namespace {

class Infeasibility : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string cell_text(const json& v) {
    if (v.is_null()) return "";
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
}

json number(double x) {
    if (std::isfinite(x)) return x;
    return x > 0 ? "inf" : (x < 0 ? "-inf" : "nan");
}

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<json>> rows;

    std::string render(const std::string& format) const {
        std::ostringstream o;
        if (format == "json") {
            for (const auto& r : rows) {
                json rec = json::object();
                for (std::size_t c = 0; c < columns.size(); ++c) rec[columns[c]] = c < r.size() ? r[c] : json();
                // Keep column order in the output.
                o << '{';
                for (std::size_t c = 0; c < columns.size(); ++c)
                    o << (c ? "," : "") << json(columns[c]).dump() << ':' << rec[columns[c]].dump();
                o << "}\n";
            }
            return o.str();
        }
        for (std::size_t c = 0; c < columns.size(); ++c) o << (c ? "," : "") << csv_field(columns[c]);
        o << "\r\n";
        for (const auto& r : rows) {
            for (std::size_t c = 0; c < columns.size(); ++c) o << (c ? "," : "") << csv_field(c < r.size() ? cell_text(r[c]) : "");
            o << "\r\n";
        }
        return o.str();
    }
};

std::string utc_stamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
    return buf;
}

// One run directory. Files are created once and never rewritten, except the
// manifest which is written last.
class Run {
public:
    Run(const fs::path& root, const std::string& command, std::string format)
        : format_(std::move(format)) {
        fs::create_directories(root);
        const std::string base = utc_stamp() + "-" + command;
        for (int n = 1;; ++n) {
            const fs::path p = root / (n == 1 ? base : base + "-" + std::to_string(n));
            if (fs::create_directory(p)) {
                dir_ = p;
                break;
            }
        }
        id_ = dir_.filename().string();
    }

    const fs::path& dir() const { return dir_; }
    const std::string& id() const { return id_; }

    fs::path new_file(const std::string& name) {
        const fs::path p = dir_ / name;
        if (fs::exists(p)) throw std::logic_error("refusing to overwrite " + p.string());
        artifacts_.push_back(name);
        return p;
    }

    void write_text(const std::string& name, const std::string& text) {
        std::ofstream f(new_file(name), std::ios::binary);
        f << text;
        if (!f) throw std::runtime_error("cannot write " + name);
    }

    void table(const std::string& stem, const Table& t) {
        write_text(stem + (format_ == "json" ? ".jsonl" : ".csv"), t.render(format_));
    }

    void warn(json w, std::ostream& err) {
        err << w.dump() << '\n';
        warnings_.push_back(std::move(w));
    }

    json summary = json::object();

    void finish(json manifest, int code) {
        manifest["run_id"] = id_;
        manifest["status"] = code == ok ? "ok" : "failed";
        manifest["exit_code"] = code;
        manifest["summary"] = summary;
        manifest["warnings"] = warnings_;
        manifest["artifacts"] = artifacts_;
        std::ofstream f(dir_ / "manifest.json", std::ios::binary);
        f << manifest.dump(2) << '\n';
    }

private:
    fs::path dir_;
    std::string id_;
    std::string format_;
    std::vector<std::string> artifacts_;
    json warnings_ = json::array();
};

struct Options {
    std::uint64_t seed = 1;
    std::string out;
    std::vector<std::string> overrides;
    std::optional<std::size_t> quadrature_order;
    std::string format = "csv";
    std::string scenario_path;
    std::string model_path;
};

double percentile(std::vector<double> v, double q) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const auto k = std::size_t(std::min(double(v.size() - 1), std::ceil(q * double(v.size())) - 1.0));
    return v[std::max<std::size_t>(k, 0)];
}

neural::TrainConfig train_config(const scenario::LearnSpec& l, std::uint64_t seed) {
    neural::TrainConfig c;
    c.learning_rate = l.learning_rate;
    c.final_lr_fraction = l.final_lr_fraction;
    c.batch_size = l.batch_size;
    c.epochs = l.epochs;
    c.seed = seed;
    c.optimizer = l.optimizer == "sgd"        ? neural::OptimizerKind::sgd
                  : l.optimizer == "momentum" ? neural::OptimizerKind::momentum
                                              : neural::OptimizerKind::adam;
    return c;
}

neural::FnnModel make_net(std::size_t in, std::size_t out, const scenario::LearnSpec& l, neural::Activation last,
                          std::uint64_t seed) {
    std::vector<std::size_t> sizes{in};
    std::vector<neural::Activation> acts;
    for (std::size_t i = 0; i < l.hidden_layers; ++i) {
        sizes.push_back(l.hidden_units);
        acts.push_back(neural::Activation::relu);
    }
    sizes.push_back(out);
    acts.push_back(last);
    return neural::FnnModel::initialized(sizes, acts, seed);
}

Table loss_table(const learn::SupervisedResult& r) {
    Table t{{"epoch", "train_loss", "holdout_loss"}, {}};
    for (std::size_t e = 0; e < r.train_loss.size(); ++e)
        t.rows.push_back({e, number(r.train_loss[e]), e < r.holdout_loss.size() ? number(r.holdout_loss[e]) : json()});
    return t;
}

// ------------------------------------------------------------------ commands

void cmd_fbl(const scenario::Scenario& s, Run& run) {
    const scenario::FblSpec f = s.fbl.value_or(scenario::FblSpec{});
    Table t{{"snr_db", "eps", "blocklength", "shannon_bps", "na_rate_bps", "na_over_shannon", "max_payload_bits",
             "decoding_error_at_payload"},
            {}};
    for (double snr_db : f.snr_db) {
        const fbl::LinkConfig link(f.bandwidth_hz, std::pow(10.0, snr_db / 10.0), f.frame_ms * 1e-3, f.payload_bits);
        const double shannon = fbl::shannon_rate(link);
        const double err = fbl::decoding_error(link);
        for (double eps : f.eps) {
            const double na = fbl::na_rate(link, eps);
            t.rows.push_back({snr_db, eps, link.blocklength(), shannon, na, na / shannon,
                              std::max(0.0, na * link.frame_duration_s()), err});
        }
    }
    run.table("fbl", t);
    run.summary["rows"] = t.rows.size();
}

void cmd_qos(const scenario::Scenario& s, const Options& o, Run& run, std::ostream& err) {
    const auto budget = s.system_budget();
    const auto users = s.user_profiles();
    auto cfg = s.sim_config(o.seed);
    cfg.tail_thresholds_s = {budget.qos.queue_delay_s()};
    cfg.target_eps = budget.qos.eps_q();
    Table t{{"user", "arrival_rate_pkts_per_s", "packet_bits", "queue_delay_s", "eps_q", "eb_pkts_per_s", "eb_bps",
             "theta_per_pkt", "tail_bound", "sim_packets", "sim_tail", "sim_tail_lower", "sim_tail_upper",
             "sim_insufficient_resolution"},
            {}};
    for (std::size_t k = 0; k < users.size(); ++k) {
        const auto& u = users[k];
        if (u.service != crosslayer::ServiceClass::urllc) continue;
        const double eb = qos::effective_bandwidth_poisson(*u.source, budget.qos);
        const auto theta = qos::qos_exponent(eb, budget.qos);
        const double bound = qos::delay_violation_prob(theta, eb, budget.qos.queue_delay_s());
        auto c = cfg;
        c.seed = cfg.seed + k;
        const auto sim = sim::run_queue_sim(*u.source, eb * u.source->packet_bits, c).summary;
        const auto& tail = sim.waiting_tails.front();
        if (tail.insufficient_resolution)
            run.warn({{"warning", "insufficient_resolution"}, {"user", k}, {"samples", tail.samples},
                      {"target", budget.qos.eps_q()}},
                     err);
        t.rows.push_back({k, u.source->rate_pkts_per_s, u.source->packet_bits, budget.qos.queue_delay_s(),
                          budget.qos.eps_q(), eb, eb * u.source->packet_bits, theta.value, bound, sim.packets,
                          tail.estimate, tail.lower, tail.upper, tail.insufficient_resolution});
    }
    run.table("qos", t);
    run.summary["urllc_users"] = t.rows.size();
}

Table allocation_table(const std::vector<crosslayer::UserProfile>& users, const crosslayer::Allocation& a) {
    Table t{{"user", "service", "bandwidth_hz", "power_w", "feasible", "margin"}, {}};
    for (std::size_t k = 0; k < users.size(); ++k)
        t.rows.push_back({k, users[k].service == crosslayer::ServiceClass::urllc ? "urllc" : "delay_tolerant",
                          a.bandwidth_hz[k], a.power_w[k], bool(a.feasible[k]), number(a.margin[k])});
    return t;
}

void cmd_optimize_power(const scenario::Scenario& s, Run& run) {
    const auto budget = s.system_budget();
    const auto users = s.user_profiles();
    const auto opts = s.solver_options();
    const auto a = crosslayer::min_total_power_allocation(users, budget, opts);
    run.table("allocation", allocation_table(users, a));
    double used = 0.0;
    for (double w : a.bandwidth_hz) used += w;
    const bool all = std::all_of(a.feasible.begin(), a.feasible.end(), [](bool b) { return b; });
    run.summary["total_power_w"] = a.total_power_w;
    run.summary["bandwidth_used_hz"] = used;
    run.summary["bandwidth_budget_hz"] = budget.total_bandwidth_hz;
    run.summary["all_feasible"] = all;
    if (!s.solver.split_fractions.empty()) {
        const auto x = crosslayer::optimize_loss_split(users, budget, s.solver.split_fractions, opts);
        Table t{{"decoding_fraction", "total_power_w"}, {}};
        for (std::size_t i = 0; i < x.decoding_fractions.size(); ++i)
            t.rows.push_back({x.decoding_fractions[i], number(x.total_power_w[i])});
        run.table("split", t);
        run.summary["equal_split_power_w"] = number(x.equal_split_power_w);
        run.summary["best_split_power_w"] = number(x.best_power_w);
        run.summary["best_decoding_fraction"] = x.best_fraction;
        run.summary["split_relative_gap"] = number(x.relative_gap);
    }
    if (!all) throw Infeasibility("allocation leaves some users unserved");
}

void cmd_optimize_bandwidth(const scenario::Scenario& s, Run& run, std::ostream& err) {
    const auto budget = s.system_budget();
    const auto users = s.user_profiles();
    const auto opts = s.solver_options();
    Table t{{"user", "bandwidth_hz", "constraint", "used_dense_scan"}, {}};
    double total = 0.0;
    for (std::size_t k = 0; k < users.size(); ++k) {
        if (users[k].service != crosslayer::ServiceClass::urllc || !users[k].fixed_power_w)
            throw std::invalid_argument("optimize bandwidth: user " + std::to_string(k) +
                                        " must be URLLC with fixed_power_w");
        const auto b = crosslayer::min_bandwidth_for_user(users[k], budget, opts);
        if (!b.warning.empty()) run.warn({{"warning", "bracket_not_monotone"}, {"user", k}, {"message", b.warning}}, err);
        t.rows.push_back({k, b.bandwidth_hz, b.constraint, b.used_dense_scan});
        total += b.bandwidth_hz;
    }
    run.table("bandwidth", t);
    run.summary["total_bandwidth_hz"] = total;
    run.summary["bandwidth_budget_hz"] = budget.total_bandwidth_hz;
    run.summary["within_budget"] = total <= budget.total_bandwidth_hz;
    if (total > budget.total_bandwidth_hz) throw Infeasibility("bandwidth demand exceeds the budget");
}

void cmd_validate(const scenario::Scenario& s, const Options& o, Run& run, std::ostream& err) {
    const auto budget = s.system_budget();
    const auto users = s.user_profiles();
    const auto a = crosslayer::min_total_power_allocation(users, budget, s.solver_options());
    run.table("allocation", allocation_table(users, a));
    const auto cfg = s.sim_config(o.seed);
    const double target = budget.qos.overall_loss();
    Table t{{"user", "packets", "eps_c_hat", "eps_q_hat", "eps_tot_hat", "eps_tot_lower", "eps_tot_upper",
             "eps_tot_independent", "target", "meets_target", "insufficient_resolution"},
            {}};
    bool all = true;
    for (std::size_t k = 0; k < users.size(); ++k) {
        if (users[k].service != crosslayer::ServiceClass::urllc) continue;
        auto c = cfg;
        c.seed = cfg.seed + k;
        const auto r = sim::run_link_sim(users[k], budget, a.bandwidth_hz[k], a.power_w[k], c);
        const bool coarse = double(r.packets) < 100.0 / target;
        const bool meets = r.eps_tot_interval.upper <= target;
        all = all && meets;
        if (coarse)
            run.warn({{"warning", "insufficient_resolution"}, {"user", k}, {"packets", r.packets}, {"target", target},
                      {"needed", std::ceil(100.0 / target)}},
                     err);
        t.rows.push_back({k, r.packets, r.eps_c_hat, r.eps_q_hat, r.eps_tot_hat, r.eps_tot_interval.lower,
                          r.eps_tot_interval.upper, r.eps_tot_independent, target, meets, coarse});
    }
    run.table("validate", t);
    run.summary["total_power_w"] = a.total_power_w;
    run.summary["all_meet_target"] = all;
}

void eval_table(Run& run, const learn::LearningScenario& ls, const std::vector<learn::LabeledSample>& eval,
                const std::function<Eigen::VectorXd(const learn::LabeledSample&)>& predict_fn) {
    const std::size_t k = ls.users.size();
    Table t{{"sample", "user", "optimal", "predicted", "qos_error"}, {}};
    std::vector<double> nus, acc;
    for (std::size_t i = 0; i < eval.size(); ++i) {
        const Eigen::VectorXd p = predict_fn(eval[i]);
        std::vector<double> nu(k, 0.0);
        if (ls.label == learn::LabelKind::bandwidth) nu = learn::qos_errors(ls, eval[i], p);
        const double eta = learn::normalized_accuracy(p, eval[i].label);
        acc.push_back(std::min(eta, 2.0 - eta));
        for (std::size_t j = 0; j < k; ++j) {
            nus.push_back(nu[j]);
            t.rows.push_back({i, j, eval[i].label(Eigen::Index(j)), p(Eigen::Index(j)), nu[j]});
        }
    }
    run.table("evaluation", t);
    double mean = 0.0;
    for (double a : acc) mean += a / double(acc.size());
    run.summary["mean_accuracy"] = mean;
    if (ls.label == learn::LabelKind::bandwidth) {
        run.summary["qos_error_p50"] = percentile(nus, 0.5);
        run.summary["qos_error_p99"] = percentile(nus, 0.99);
    }
}

void cmd_learn(const std::string& mode, const scenario::Scenario& s, const Options& o, Run& run) {
    const auto ls = s.learning_scenario();
    const auto& l = *s.learn;
    const std::size_t in = ls.feature_size(), out = ls.label_size();
    const auto eval = learn::generate_labels(ls, l.eval_samples, o.seed + 0x100000).samples;

    if (mode == "supervised") {
        const auto train = learn::generate_labels(ls, l.train_samples, o.seed);
        learn::SupervisedConfig cfg;
        cfg.train = train_config(l, o.seed);
        const auto r = learn::train_supervised(make_net(in, out, l, neural::Activation::identity, o.seed), train.samples, cfg);
        run.table("loss", loss_table(r));
        neural::save_model(r.model, run.new_file("model.txt").string());
        eval_table(run, ls, eval, [&](const learn::LabeledSample& x) { return learn::predict(r.model, r.scaler, x.features); });
        run.summary["resampled"] = train.resampled;
        run.summary["final_train_loss"] = r.train_loss.back();
        return;
    }
    if (mode == "unsupervised") {
        if (ls.label != learn::LabelKind::bandwidth)
            throw std::invalid_argument("learn unsupervised: needs learn.label = bandwidth");
        CounterRng rng(o.seed, 0x75);
        std::vector<learn::LabeledSample> states;
        for (std::size_t i = 0; i < l.train_samples; ++i) states.push_back(learn::draw_state(ls, rng));
        const learn::BandwidthProblem problem(ls);
        learn::PrimalDualConfig cfg;
        cfg.primal = train_config(l, o.seed);
        cfg.dual_rate_ratio = l.dual_rate_ratio;
        cfg.penalty = l.penalty;
        scenario::LearnSpec small = l;
        small.hidden_layers = 1;
        small.hidden_units = 32;
        const auto r = learn::train_unsupervised_primal_dual(make_net(in, out, l, neural::Activation::softplus, o.seed),
                                                             make_net(in, out, small, neural::Activation::softplus, o.seed + 1),
                                                             problem, states, cfg);
        Table t{{"epoch", "objective", "violation", "multiplier"}, {}};
        for (std::size_t e = 0; e < r.objective_trace.size(); ++e)
            t.rows.push_back({e, r.objective_trace[e], r.violation_trace[e], r.multiplier_trace[e]});
        run.table("training", t);
        neural::save_model(r.policy, run.new_file("policy.txt").string());
        const double ref = problem.reference_hz();
        eval_table(run, ls, eval, [&](const learn::LabeledSample& x) {
            return Eigen::VectorXd((r.policy.forward(x.features).array().max(1e-9) * ref).matrix());
        });
        run.summary["reference_hz"] = ref;
        run.summary["stalled"] = r.stalled;
        return;
    }
    // transfer: source task as configured, target task with a shifted noise floor.
    const auto source = learn::generate_labels(ls, l.train_samples, o.seed);
    learn::SupervisedConfig cfg;
    cfg.train = train_config(l, o.seed);
    const auto src = learn::train_supervised(make_net(in, out, l, neural::Activation::identity, o.seed), source.samples, cfg);
    auto target = ls;
    target.budget.noise_psd_w_per_hz *= std::pow(10.0, l.transfer_noise_shift_db / 10.0);
    const auto tgt_train = learn::generate_labels(target, l.transfer_samples, o.seed + 0x200000).samples;
    const auto tgt_eval = learn::generate_labels(target, l.eval_samples, o.seed + 0x300000).samples;
    const auto tuned = learn::finetune_transfer(src, tgt_train, l.frozen_layers, cfg);
    const auto scratch =
        learn::train_supervised(make_net(in, out, l, neural::Activation::identity, o.seed + 7), tgt_train, cfg);
    const double before = learn::mean_symmetric_accuracy(src.model, src.scaler, tgt_eval);
    const double after = learn::mean_symmetric_accuracy(tuned.model, tuned.scaler, tgt_eval);
    const double from_scratch = learn::mean_symmetric_accuracy(scratch.model, scratch.scaler, tgt_eval);
    run.table("loss_finetune", loss_table(tuned));
    run.table("loss_scratch", loss_table(scratch));
    neural::save_model(tuned.model, run.new_file("model_finetuned.txt").string());
    Table t{{"model", "target_samples", "accuracy"}, {}};
    t.rows.push_back({"source_only", 0, before});
    t.rows.push_back({"finetuned", tgt_train.size(), after});
    t.rows.push_back({"scratch", tgt_train.size(), from_scratch});
    run.table("transfer", t);
    run.summary["accuracy_source_only"] = before;
    run.summary["accuracy_finetuned"] = after;
    run.summary["accuracy_scratch"] = from_scratch;
}

sched::AgentConfig agent_config(const scenario::SchedSpec& c, std::uint64_t seed, const sched::EnvConfig& env) {
    auto a = c.agent == "plain" ? sched::AgentConfig::plain(seed) : sched::AgentConfig::knowledge_assisted(seed);
    a.potential = {env.window.d_min, env.window.d_max, 1.0, env.window.d_max};
    return a;
}

void cmd_sched(const std::string& mode, const scenario::Scenario& s, const Options& o, Run& run) {
    const auto env_cfg = s.env_config(o.seed);
    const auto& c = *s.sched;
    sched::SchedulerAgent agent(env_cfg, agent_config(c, o.seed, env_cfg));
    if (mode == "train") {
        sched::SchedulerEnv env(env_cfg);
        sched::TrainSchedule schedule;
        schedule.slots = c.train_slots;
        schedule.eval_window = c.eval_window;
        const auto windows = agent.train(env, schedule);
        Table t{{"slot", "loss_rate", "mean_reward", "lambda"}, {}};
        for (const auto& w : windows) t.rows.push_back({w.slot, w.loss_rate, w.mean_reward, w.lambda});
        run.table("windows", t);
        neural::save_model(agent.networks().actor, run.new_file("actor.txt").string());
    } else {
        if (o.model_path.empty()) throw std::invalid_argument("sched eval: --model is required");
        agent.set_actor(neural::load_model(o.model_path));
    }
    auto eval_cfg = env_cfg;
    eval_cfg.seed = o.seed + 0x400000;
    sched::SchedulerEnv eval_env(eval_cfg);
    const double loss = agent.evaluate(eval_env, c.eval_slots);
    run.summary["eval_loss_rate"] = loss;
    run.summary["agent"] = c.agent;
}

int report(std::ostream& err, const std::string& kind, const std::string& message, int code,
           const std::string& field = {}, int line = -1) {
    json e{{"error", kind}, {"message", message}, {"exit_code", code}};
    if (!field.empty()) e["field"] = field;
    if (line > 0) e["line"] = line;
    err << e.dump() << '\n';
    return code;
}

}  // namespace

// ---------------------------------------------------------------------- export

std::string export_results(const std::string& path, const std::string& format) {
    if (format != "csv" && format != "json") throw std::invalid_argument("export: format must be csv or json");
    const fs::path root(path);
    if (!fs::exists(root)) throw std::invalid_argument("export: missing manifest: " + path + " does not exist");
    std::vector<fs::path> runs;
    if (fs::exists(root / "manifest.json")) {
        runs.push_back(root);
    } else {
        if (!fs::is_directory(root)) throw std::invalid_argument("export: missing manifest in " + path);
        for (const auto& e : fs::directory_iterator(root)) {
            if (!e.is_directory()) continue;
            if (!fs::exists(e.path() / "manifest.json"))
                throw std::invalid_argument("export: missing manifest in " + e.path().string());
            runs.push_back(e.path());
        }
    }
    std::vector<json> manifests;
    std::set<std::string> keys;
    for (const auto& r : runs) {
        std::ifstream f(r / "manifest.json");
        json m;
        try {
            m = json::parse(f);
        } catch (const json::exception& e) {
            throw std::invalid_argument("export: unreadable manifest in " + r.string() + ": " + e.what());
        }
        const json summary = m.value("summary", json::object());
        for (const auto& [k, v] : summary.items()) keys.insert(k);
        manifests.push_back(std::move(m));
    }
    std::sort(manifests.begin(), manifests.end(), [](const json& a, const json& b) {
        return std::pair(a.value("config_hash", ""), a.value("run_id", "")) <
               std::pair(b.value("config_hash", ""), b.value("run_id", ""));
    });
    Table t{{"config_hash", "run_id", "command", "seed", "status", "exit_code"}, {}};
    for (const auto& k : keys) t.columns.push_back("summary." + k);
    for (const auto& m : manifests) {
        std::vector<json> row{m.value("config_hash", ""), m.value("run_id", ""), m.value("command", ""),
                              m.value("seed", json()), m.value("status", ""), m.value("exit_code", json())};
        const json summary = m.value("summary", json::object());
        for (const auto& k : keys) {
            const json v = summary.contains(k) ? summary[k] : json();
            row.push_back(v.is_structured() ? json(v.dump()) : v);
        }
        t.rows.push_back(std::move(row));
    }
    return t.render(format);
}

// ------------------------------------------------------------------------ run

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(int(argv.size()), argv.data(), out, err);
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    Options o;
    CLI::App app{"URLLC cross-layer design experiments"};
    app.require_subcommand(1);
    app.fallthrough();
    app.add_option("--seed", o.seed, "Random seed")->capture_default_str();
    app.add_option("--out", o.out, "Output root (default $URLLC_OUT_ROOT or ./runs); export: also write the table here");
    app.add_option("--override", o.overrides, "Scenario override key.path=value (repeatable)");
    app.add_option("--quadrature-order", o.quadrature_order, "Gauss-Laguerre order for fading expectations")
        ->check(CLI::Range(2, 512));
    app.add_option("--format", o.format, "Table format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();

    auto scenario_arg = [&](CLI::App* c) { c->add_option("scenario", o.scenario_path, "Scenario YAML")->required(); };
    auto* fbl_cmd = app.add_subcommand("fbl", "Rate and decoding-error tables");
    scenario_arg(fbl_cmd);
    auto* qos_cmd = app.add_subcommand("qos", "Effective bandwidth, QoS exponent and delay tails");
    scenario_arg(qos_cmd);
    auto* opt_cmd = app.add_subcommand("optimize", "Resource allocation");
    opt_cmd->require_subcommand(1);
    auto* opt_power = opt_cmd->add_subcommand("power", "Minimum total power allocation");
    scenario_arg(opt_power);
    auto* opt_bw = opt_cmd->add_subcommand("bandwidth", "Minimum bandwidth per user with fixed power");
    scenario_arg(opt_bw);
    auto* val_cmd = app.add_subcommand("validate", "Link simulation against the analytic design");
    scenario_arg(val_cmd);
    auto* learn_cmd = app.add_subcommand("learn", "Learning-based allocation");
    learn_cmd->require_subcommand(1);
    std::map<std::string, CLI::App*> learn_modes;
    for (const char* m : {"supervised", "unsupervised", "transfer"}) {
        learn_modes[m] = learn_cmd->add_subcommand(m);
        scenario_arg(learn_modes[m]);
    }
    auto* sched_cmd = app.add_subcommand("sched", "DRL scheduler");
    sched_cmd->require_subcommand(1);
    auto* sched_train = sched_cmd->add_subcommand("train");
    scenario_arg(sched_train);
    auto* sched_eval = sched_cmd->add_subcommand("eval");
    scenario_arg(sched_eval);
    sched_eval->add_option("--model", o.model_path, "Actor saved by sched train")->required();
    auto* export_cmd = app.add_subcommand("export", "Consolidate run manifests into one table");
    std::string export_path;
    export_cmd->add_option("path", export_path, "Run directory or output root")->required();

    for (auto* c : app.get_subcommands({}))
        for (auto* sub : c->get_subcommands({})) sub->fallthrough();
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return ok;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return ok;
    } catch (const CLI::ParseError& e) {
        return report(err, "usage", e.what(), validation_error);
    }

    if (export_cmd->parsed()) {
        try {
            const std::string table = export_results(export_path, o.format);
            out << table;
            if (!o.out.empty()) {
                std::ofstream f(o.out, std::ios::binary);
                f << table;
                if (!f) return report(err, "runtime", "cannot write " + o.out, runtime_error);
            }
            return ok;
        } catch (const std::invalid_argument& e) {
            return report(err, "validation", e.what(), validation_error);
        } catch (const std::exception& e) {
            return report(err, "runtime", e.what(), runtime_error);
        }
    }

    std::string command;
    std::string mode;
    if (fbl_cmd->parsed()) command = "fbl";
    if (qos_cmd->parsed()) command = "qos";
    if (val_cmd->parsed()) command = "validate";
    if (opt_cmd->parsed()) command = "optimize", mode = opt_power->parsed() ? "power" : "bandwidth";
    if (learn_cmd->parsed())
        for (const auto& [m, c] : learn_modes)
            if (c->parsed()) command = "learn", mode = m;
    if (sched_cmd->parsed()) command = "sched", mode = sched_train->parsed() ? "train" : "eval";

    scenario::Scenario s;
    auto overrides = o.overrides;
    if (o.quadrature_order) overrides.push_back("solver.quadrature_order=" + std::to_string(*o.quadrature_order));
    try {
        s = scenario::load_scenario(o.scenario_path, overrides);
        if (command == "qos" || command == "optimize" || command == "validate") {
            s.system_budget();
            s.user_profiles();
        }
        if (command == "learn") s.learning_scenario();
        if (command == "sched") s.env_config(o.seed);
    } catch (const scenario::ScenarioError& e) {
        return report(err, "validation", e.what(), validation_error, e.field(), e.line());
    } catch (const std::invalid_argument& e) {
        return report(err, "validation", e.what(), validation_error);
    }

    const std::string config = scenario::to_yaml(s);
    const std::string hash = scenario::config_hash(config);
    fs::path root = o.out;
    if (root.empty()) {
        const char* env = std::getenv("URLLC_OUT_ROOT");
        root = env && *env ? env : "runs";
    }
    std::optional<Run> run_dir;
    try {
        run_dir.emplace(root, mode.empty() ? command : command + "-" + mode, o.format);
    } catch (const std::exception& e) {
        return report(err, "runtime", std::string("cannot create run directory: ") + e.what(), runtime_error);
    }
    Run& r = *run_dir;
    r.write_text("config.yaml", config);
    json manifest{{"command", mode.empty() ? command : command + " " + mode},
                  {"scenario", o.scenario_path},
                  {"config_hash", hash},
                  {"seed", o.seed},
                  {"format", o.format},
                  {"config", config},
                  {"started_utc", utc_stamp()}};
    out << "seed=" << o.seed << " config_hash=" << hash << " run_dir=" << r.dir().string() << '\n';

    int code = ok;
    try {
        if (command == "fbl") cmd_fbl(s, r);
        if (command == "qos") cmd_qos(s, o, r, err);
        if (command == "optimize" && mode == "power") cmd_optimize_power(s, r);
        if (command == "optimize" && mode == "bandwidth") cmd_optimize_bandwidth(s, r, err);
        if (command == "validate") cmd_validate(s, o, r, err);
        if (command == "learn") cmd_learn(mode, s, o, r);
        if (command == "sched") cmd_sched(mode, s, o, r);
    } catch (const Infeasibility& e) {
        code = report(err, "infeasible", e.what(), infeasible);
    } catch (const crosslayer::Infeasible& e) {
        code = report(err, "infeasible", e.what(), infeasible);
    } catch (const learn::SystematicallyInfeasible& e) {
        code = report(err, "infeasible", e.what(), infeasible);
    } catch (const scenario::ScenarioError& e) {
        code = report(err, "validation", e.what(), validation_error, e.field(), e.line());
    } catch (const std::invalid_argument& e) {
        code = report(err, "validation", e.what(), validation_error);
    } catch (const std::exception& e) {
        code = report(err, "runtime", e.what(), runtime_error);
    }
    r.finish(manifest, code);
    return code;
}

}  // namespace urllc::cli
