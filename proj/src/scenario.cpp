#include "urllc/scenario.hpp"

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace urllc::scenario {

namespace {

int line_of(const YAML::Node& n) {
    const auto m = n.Mark();
    return m.is_null() ? -1 : m.line + 1;
}

std::string located(const std::string& msg, int line) {
    return line > 0 ? "line " + std::to_string(line) + ": " + msg : msg;
}

[[noreturn]] void fail(const std::string& field, const std::string& msg, int line) {
    throw ScenarioError(located(field + ": " + msg, line), field, line);
}

// Reads one mapping, remembering which keys were consumed so leftovers can be
// reported as unknown.
class Section {
public:
    Section(YAML::Node node, std::string path) : node_(std::move(node)), path_(std::move(path)) {
        if (node_ && !node_.IsMap()) fail(path_, "expected a mapping", line_of(node_));
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return node_ && node_[key];
    }

    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    template <class T>
    T get(const std::string& key, T fallback) {
        if (!has(key)) return fallback;
        return convert<T>(node_[key], field(key));
    }

    template <class T>
    T required(const std::string& key) {
        if (!has(key)) fail(field(key), "required field is missing", line_of(node_));
        return convert<T>(node_[key], field(key));
    }

    template <class T>
    std::optional<T> optional(const std::string& key) {
        if (!has(key)) return std::nullopt;
        return convert<T>(node_[key], field(key));
    }

    YAML::Node child(const std::string& key) {
        seen_.insert(key);
        return node_ ? node_[key] : YAML::Node();
    }

    void check(const std::string& key, bool ok, const std::string& msg) {
        if (!ok) fail(field(key), msg, node_ && node_[key] ? line_of(node_[key]) : line_of(node_));
    }

    void finish() const {
        if (!node_) return;
        for (const auto& kv : node_) {
            const auto key = kv.first.as<std::string>();
            if (!seen_.count(key)) fail(field(key), "unknown key", line_of(kv.first));
        }
    }

    template <class T>
    static T convert(const YAML::Node& n, const std::string& field) {
        try {
            if constexpr (std::is_same_v<T, double>) {
                if (!n.IsScalar()) fail(field, "expected a number", line_of(n));
                const double v = n.as<double>();
                if (!std::isfinite(v)) fail(field, "must be finite", line_of(n));
                return v;
            } else if constexpr (std::is_same_v<T, std::vector<double>>) {
                if (!n.IsSequence()) fail(field, "expected a list of numbers", line_of(n));
                std::vector<double> out;
                for (std::size_t i = 0; i < n.size(); ++i) out.push_back(convert<double>(n[i], field));
                return out;
            } else if constexpr (std::is_same_v<T, std::size_t>) {
                if (!n.IsScalar()) fail(field, "expected an integer", line_of(n));
                const auto s = n.Scalar();
                if (!s.empty() && s[0] == '-') fail(field, "must be nonnegative", line_of(n));
                return n.as<std::size_t>();
            } else {
                if (!n.IsScalar()) fail(field, "expected a scalar", line_of(n));
                return n.as<T>();
            }
        } catch (const YAML::BadConversion&) {
            fail(field, "cannot convert value '" + (n.IsScalar() ? n.Scalar() : std::string("<node>")) + "'", line_of(n));
        }
    }

private:
    YAML::Node node_;
    std::string path_;
    std::set<std::string> seen_;
};

void one_of(Section& s, const std::string& key, const std::string& value, std::initializer_list<const char*> allowed) {
    std::string list;
    for (const char* a : allowed) {
        if (value == a) return;
        list += list.empty() ? a : std::string(", ") + a;
    }
    s.check(key, false, "must be one of " + list);
}

BudgetSpec read_budget(YAML::Node n) {
    Section s(n, "budget");
    BudgetSpec b;
    b.total_bandwidth_hz = s.required<double>("total_bandwidth_hz");
    s.check("total_bandwidth_hz", b.total_bandwidth_hz > 0.0, "must be positive");
    b.antennas = s.get<int>("antennas", b.antennas);
    s.check("antennas", b.antennas >= 1, "must be at least 1");
    b.noise_psd_dbm_per_hz = s.get<double>("noise_psd_dbm_per_hz", b.noise_psd_dbm_per_hz);
    b.fading = s.get<std::string>("fading", b.fading);
    one_of(s, "fading", b.fading, {"gamma", "deterministic"});
    b.deterministic_gain = s.get<double>("deterministic_gain", b.deterministic_gain);
    s.check("deterministic_gain", b.deterministic_gain > 0.0, "must be positive");
    s.finish();
    return b;
}

QosSpec read_qos(YAML::Node n) {
    Section s(n, "qos");
    QosSpec q;
    q.e2e_delay_ms = s.required<double>("e2e_delay_ms");
    q.overall_loss = s.required<double>("overall_loss");
    q.frame_ms = s.get<double>("frame_ms", q.frame_ms);
    q.decoding_fraction = s.get<double>("decoding_fraction", q.decoding_fraction);
    s.check("frame_ms", q.frame_ms > 0.0, "must be positive");
    s.check("e2e_delay_ms", q.e2e_delay_ms > q.frame_ms, "must exceed frame_ms");
    s.check("overall_loss", q.overall_loss > 0.0 && q.overall_loss < 0.5, "must lie in (0, 0.5)");
    s.check("decoding_fraction", q.decoding_fraction > 0.0 && q.decoding_fraction < 1.0, "must lie in (0, 1)");
    s.finish();
    return q;
}

UserSpec read_user(YAML::Node n, std::size_t i) {
    Section s(n, "users." + std::to_string(i));
    UserSpec u;
    u.service = s.get<std::string>("service", u.service);
    one_of(s, "service", u.service, {"urllc", "delay_tolerant"});
    u.gain_db = s.required<double>("gain_db");
    if (u.service == "urllc") {
        u.arrival_rate_pkts_per_s = s.required<double>("arrival_rate_pkts_per_s");
        u.packet_bits = s.required<double>("packet_bits");
        s.check("arrival_rate_pkts_per_s", u.arrival_rate_pkts_per_s > 0.0, "must be positive");
        s.check("packet_bits", u.packet_bits > 0.0, "must be positive");
        u.fixed_power_w = s.optional<double>("fixed_power_w");
        s.check("fixed_power_w", !u.fixed_power_w || *u.fixed_power_w > 0.0, "must be positive");
    } else {
        u.mean_rate_bps = s.required<double>("mean_rate_bps");
        s.check("mean_rate_bps", u.mean_rate_bps > 0.0, "must be positive");
    }
    s.finish();
    return u;
}

SolverSpec read_solver(YAML::Node n) {
    Section s(n, "solver");
    SolverSpec o;
    o.quadrature_order = s.get<std::size_t>("quadrature_order", o.quadrature_order);
    s.check("quadrature_order", o.quadrature_order >= 2 && o.quadrature_order <= 512, "must lie in [2, 512]");
    o.grid_points = s.get<std::size_t>("grid_points", o.grid_points);
    s.check("grid_points", o.grid_points >= 2, "must be at least 2");
    o.refine = s.get<bool>("refine", o.refine);
    o.power_cap_w = s.get<double>("power_cap_w", o.power_cap_w);
    s.check("power_cap_w", o.power_cap_w > 0.0, "must be positive");
    o.rate_dispersion = s.get<std::string>("rate_dispersion", o.rate_dispersion);
    one_of(s, "rate_dispersion", o.rate_dispersion, {"exact", "unit"});
    o.split_fractions = s.get<std::vector<double>>("split_fractions", o.split_fractions);
    for (double f : o.split_fractions) s.check("split_fractions", f > 0.0 && f < 1.0, "entries must lie in (0, 1)");
    s.finish();
    return o;
}

SimSpec read_sim(YAML::Node n) {
    Section s(n, "sim");
    SimSpec o;
    o.horizon_packets = s.get<std::size_t>("horizon_packets", o.horizon_packets);
    s.check("horizon_packets", o.horizon_packets > 0, "must be positive");
    o.warmup_fraction = s.get<double>("warmup_fraction", o.warmup_fraction);
    s.check("warmup_fraction", o.warmup_fraction >= 0.0 && o.warmup_fraction < 0.5, "must lie in [0, 0.5)");
    o.arrivals = s.get<std::string>("arrivals", o.arrivals);
    one_of(s, "arrivals", o.arrivals, {"poisson", "deterministic", "bernoulli"});
    o.slot_ms = s.get<double>("slot_ms", o.slot_ms);
    s.check("slot_ms", o.slot_ms > 0.0, "must be positive");
    s.finish();
    return o;
}

LearnSpec read_learn(YAML::Node n) {
    Section s(n, "learn");
    LearnSpec o;
    o.label = s.get<std::string>("label", o.label);
    one_of(s, "label", o.label, {"bandwidth", "power"});
    o.gain_db_min = s.get<double>("gain_db_min", o.gain_db_min);
    o.gain_db_max = s.get<double>("gain_db_max", o.gain_db_max);
    s.check("gain_db_max", o.gain_db_max >= o.gain_db_min, "must be at least gain_db_min");
    o.rate_scale_min = s.get<double>("rate_scale_min", o.rate_scale_min);
    o.rate_scale_max = s.get<double>("rate_scale_max", o.rate_scale_max);
    s.check("rate_scale_min", o.rate_scale_min > 0.0, "must be positive");
    s.check("rate_scale_max", o.rate_scale_max >= o.rate_scale_min, "must be at least rate_scale_min");
    o.train_samples = s.get<std::size_t>("train_samples", o.train_samples);
    s.check("train_samples", o.train_samples >= 2, "must be at least 2");
    o.eval_samples = s.get<std::size_t>("eval_samples", o.eval_samples);
    s.check("eval_samples", o.eval_samples >= 1, "must be positive");
    o.hidden_layers = s.get<std::size_t>("hidden_layers", o.hidden_layers);
    o.hidden_units = s.get<std::size_t>("hidden_units", o.hidden_units);
    s.check("hidden_units", o.hidden_units >= 1, "must be positive");
    o.epochs = s.get<std::size_t>("epochs", o.epochs);
    s.check("epochs", o.epochs >= 1, "must be positive");
    o.learning_rate = s.get<double>("learning_rate", o.learning_rate);
    s.check("learning_rate", o.learning_rate > 0.0, "must be positive");
    o.final_lr_fraction = s.get<double>("final_lr_fraction", o.final_lr_fraction);
    s.check("final_lr_fraction", o.final_lr_fraction > 0.0 && o.final_lr_fraction <= 1.0, "must be in (0, 1]");
    o.batch_size = s.get<std::size_t>("batch_size", o.batch_size);
    s.check("batch_size", o.batch_size >= 1, "must be positive");
    o.optimizer = s.get<std::string>("optimizer", o.optimizer);
    one_of(s, "optimizer", o.optimizer, {"sgd", "momentum", "adam"});
    o.frozen_layers = s.get<std::size_t>("frozen_layers", o.frozen_layers);
    s.check("frozen_layers", o.frozen_layers <= o.hidden_layers, "must not exceed hidden_layers");
    o.transfer_noise_shift_db = s.get<double>("transfer_noise_shift_db", o.transfer_noise_shift_db);
    o.transfer_samples = s.get<std::size_t>("transfer_samples", o.transfer_samples);
    s.check("transfer_samples", o.transfer_samples >= 2, "must be at least 2");
    o.dual_rate_ratio = s.get<double>("dual_rate_ratio", o.dual_rate_ratio);
    s.check("dual_rate_ratio", o.dual_rate_ratio > 0.0, "must be positive");
    o.penalty = s.get<double>("penalty", o.penalty);
    s.check("penalty", o.penalty >= 0.0, "must be non-negative");
    s.finish();
    return o;
}

SchedSpec read_sched(YAML::Node n) {
    Section s(n, "sched");
    SchedSpec o;
    o.users = s.get<std::size_t>("users", o.users);
    s.check("users", o.users >= 1, "must be positive");
    o.rb_budget = s.get<int>("rb_budget", o.rb_budget);
    s.check("rb_budget", o.rb_budget >= 1, "must be positive");
    o.rb_symbols = s.get<int>("rb_symbols", o.rb_symbols);
    s.check("rb_symbols", o.rb_symbols >= 1, "must be positive");
    o.packet_bits = s.get<double>("packet_bits", o.packet_bits);
    s.check("packet_bits", o.packet_bits > 0.0, "must be positive");
    o.target_eps = s.get<double>("target_eps", o.target_eps);
    s.check("target_eps", o.target_eps > 0.0 && o.target_eps <= 0.5, "must lie in (0, 0.5]");
    o.d_min_slots = s.get<int>("d_min_slots", o.d_min_slots);
    o.d_max_slots = s.get<int>("d_max_slots", o.d_max_slots);
    s.check("d_min_slots", o.d_min_slots >= 0, "must be nonnegative");
    s.check("d_max_slots", o.d_max_slots >= o.d_min_slots, "must be at least d_min_slots");
    const bool sized = s.has("users");
    o.mean_snr_db = s.get<std::vector<double>>("mean_snr_db", sized ? std::vector<double>(o.users, 10.0) : o.mean_snr_db);
    o.arrival_prob = s.get<std::vector<double>>("arrival_prob", sized ? std::vector<double>(o.users, 0.3) : o.arrival_prob);
    s.check("mean_snr_db", o.mean_snr_db.size() == o.users, "needs one entry per user");
    s.check("arrival_prob", o.arrival_prob.size() == o.users, "needs one entry per user");
    for (double p : o.arrival_prob) s.check("arrival_prob", p >= 0.0 && p <= 1.0, "entries must lie in [0, 1]");
    o.agent = s.get<std::string>("agent", o.agent);
    one_of(s, "agent", o.agent, {"knowledge_assisted", "plain"});
    o.train_slots = s.get<std::size_t>("train_slots", o.train_slots);
    o.eval_slots = s.get<std::size_t>("eval_slots", o.eval_slots);
    s.check("eval_slots", o.eval_slots >= 1, "must be positive");
    o.eval_window = s.get<std::size_t>("eval_window", o.eval_window);
    s.check("eval_window", o.eval_window >= 1, "must be positive");
    s.finish();
    return o;
}

FblSpec read_fbl(YAML::Node n) {
    Section s(n, "fbl");
    FblSpec o;
    o.bandwidth_hz = s.get<double>("bandwidth_hz", o.bandwidth_hz);
    s.check("bandwidth_hz", o.bandwidth_hz > 0.0, "must be positive");
    o.frame_ms = s.get<double>("frame_ms", o.frame_ms);
    s.check("frame_ms", o.frame_ms > 0.0, "must be positive");
    o.payload_bits = s.get<double>("payload_bits", o.payload_bits);
    s.check("payload_bits", o.payload_bits > 0.0, "must be positive");
    o.snr_db = s.get<std::vector<double>>("snr_db", o.snr_db);
    o.eps = s.get<std::vector<double>>("eps", o.eps);
    for (double e : o.eps) s.check("eps", e > 0.0 && e < 1.0, "entries must lie in (0, 1)");
    s.finish();
    return o;
}

void apply_override(YAML::Node& root, const std::string& spec) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0) fail(spec, "override must look like key.path=value", -1);
    const std::string path = spec.substr(0, eq);
    YAML::Node value;
    try {
        value = YAML::Load(spec.substr(eq + 1));
    } catch (const YAML::Exception& e) {
        fail(path, std::string("override value does not parse: ") + e.what(), -1);
    }
    std::vector<std::string> keys;
    std::stringstream ss(path);
    for (std::string k; std::getline(ss, k, '.');) {
        if (k.empty()) fail(path, "empty path segment", -1);
        keys.push_back(k);
    }
    YAML::Node cur = root;
    for (std::size_t i = 0; i < keys.size(); ++i) {
        const bool last = i + 1 == keys.size();
        if (cur.IsSequence()) {
            std::size_t idx = 0;
            try {
                idx = std::stoul(keys[i]);
            } catch (const std::exception&) {
                fail(path, "expected a list index at '" + keys[i] + "'", -1);
            }
            if (idx >= cur.size()) fail(path, "list index out of range", -1);
            if (last) {
                cur[idx] = value;
            } else {
                YAML::Node next = cur[idx];
                cur.reset(next);
            }
        } else {
            if (last) {
                cur[keys[i]] = value;
            } else {
                if (!cur[keys[i]]) cur[keys[i]] = YAML::Node(YAML::NodeType::Map);
                YAML::Node next = cur[keys[i]];
                cur.reset(next);
            }
        }
    }
}

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

// Shortest text that reads back to the same double.
std::string num(double x) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

std::vector<std::string> nums(const std::vector<double>& v) {
    std::vector<std::string> out;
    for (double x : v) out.push_back(num(x));
    return out;
}

}  // namespace

Scenario parse_scenario(const std::string& text, const std::vector<std::string>& overrides) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ScenarioError(located(e.msg, e.mark.line + 1), "<document>", e.mark.line + 1);
    }
    if (!root || root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
    for (const auto& o : overrides) apply_override(root, o);

    Section top(root, "");
    Scenario s;
    if (top.has("budget")) s.budget = read_budget(top.child("budget"));
    if (top.has("qos")) s.qos = read_qos(top.child("qos"));
    if (top.has("users")) {
        const auto users = top.child("users");
        if (!users.IsSequence()) fail("users", "expected a list", line_of(users));
        for (std::size_t i = 0; i < users.size(); ++i) s.users.push_back(read_user(users[i], i));
    }
    s.solver = read_solver(top.child("solver"));
    s.sim = read_sim(top.child("sim"));
    if (top.has("learn")) s.learn = read_learn(top.child("learn"));
    if (top.has("sched")) s.sched = read_sched(top.child("sched"));
    if (top.has("fbl")) s.fbl = read_fbl(top.child("fbl"));
    top.finish();
    return s;
}

Scenario load_scenario(const std::string& path, const std::vector<std::string>& overrides) {
    std::ifstream in(path);
    if (!in) throw ScenarioError("cannot open scenario file " + path, "<file>");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str(), overrides);
}

std::string to_yaml(const Scenario& s) {
    YAML::Emitter e;
    e << YAML::BeginMap;
    if (s.budget) {
        const auto& b = *s.budget;
        e << YAML::Key << "budget" << YAML::Value << YAML::BeginMap;
        e << YAML::Key << "total_bandwidth_hz" << YAML::Value << num(b.total_bandwidth_hz);
        e << YAML::Key << "antennas" << YAML::Value << b.antennas;
        e << YAML::Key << "noise_psd_dbm_per_hz" << YAML::Value << num(b.noise_psd_dbm_per_hz);
        e << YAML::Key << "fading" << YAML::Value << b.fading;
        e << YAML::Key << "deterministic_gain" << YAML::Value << num(b.deterministic_gain);
        e << YAML::EndMap;
    }
    if (s.qos) {
        const auto& q = *s.qos;
        e << YAML::Key << "qos" << YAML::Value << YAML::BeginMap;
        e << YAML::Key << "e2e_delay_ms" << YAML::Value << num(q.e2e_delay_ms);
        e << YAML::Key << "overall_loss" << YAML::Value << num(q.overall_loss);
        e << YAML::Key << "frame_ms" << YAML::Value << num(q.frame_ms);
        e << YAML::Key << "decoding_fraction" << YAML::Value << num(q.decoding_fraction);
        e << YAML::EndMap;
    }
    if (!s.users.empty()) {
        e << YAML::Key << "users" << YAML::Value << YAML::BeginSeq;
        for (const auto& u : s.users) {
            e << YAML::BeginMap;
            e << YAML::Key << "service" << YAML::Value << u.service;
            e << YAML::Key << "gain_db" << YAML::Value << num(u.gain_db);
            if (u.service == "urllc") {
                e << YAML::Key << "arrival_rate_pkts_per_s" << YAML::Value << num(u.arrival_rate_pkts_per_s);
                e << YAML::Key << "packet_bits" << YAML::Value << num(u.packet_bits);
                if (u.fixed_power_w) e << YAML::Key << "fixed_power_w" << YAML::Value << num(*u.fixed_power_w);
            } else {
                e << YAML::Key << "mean_rate_bps" << YAML::Value << num(u.mean_rate_bps);
            }
            e << YAML::EndMap;
        }
        e << YAML::EndSeq;
    }
    e << YAML::Key << "solver" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "quadrature_order" << YAML::Value << s.solver.quadrature_order;
    e << YAML::Key << "grid_points" << YAML::Value << s.solver.grid_points;
    e << YAML::Key << "refine" << YAML::Value << s.solver.refine;
    e << YAML::Key << "power_cap_w" << YAML::Value << num(s.solver.power_cap_w);
    e << YAML::Key << "rate_dispersion" << YAML::Value << s.solver.rate_dispersion;
    e << YAML::Key << "split_fractions" << YAML::Value << YAML::Flow << nums(s.solver.split_fractions);
    e << YAML::EndMap;
    e << YAML::Key << "sim" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "horizon_packets" << YAML::Value << s.sim.horizon_packets;
    e << YAML::Key << "warmup_fraction" << YAML::Value << num(s.sim.warmup_fraction);
    e << YAML::Key << "arrivals" << YAML::Value << s.sim.arrivals;
    e << YAML::Key << "slot_ms" << YAML::Value << num(s.sim.slot_ms);
    e << YAML::EndMap;
    if (s.learn) {
        const auto& l = *s.learn;
        e << YAML::Key << "learn" << YAML::Value << YAML::BeginMap;
        e << YAML::Key << "label" << YAML::Value << l.label;
        e << YAML::Key << "gain_db_min" << YAML::Value << num(l.gain_db_min);
        e << YAML::Key << "gain_db_max" << YAML::Value << num(l.gain_db_max);
        e << YAML::Key << "rate_scale_min" << YAML::Value << num(l.rate_scale_min);
        e << YAML::Key << "rate_scale_max" << YAML::Value << num(l.rate_scale_max);
        e << YAML::Key << "train_samples" << YAML::Value << l.train_samples;
        e << YAML::Key << "eval_samples" << YAML::Value << l.eval_samples;
        e << YAML::Key << "hidden_layers" << YAML::Value << l.hidden_layers;
        e << YAML::Key << "hidden_units" << YAML::Value << l.hidden_units;
        e << YAML::Key << "epochs" << YAML::Value << l.epochs;
        e << YAML::Key << "learning_rate" << YAML::Value << num(l.learning_rate);
        e << YAML::Key << "final_lr_fraction" << YAML::Value << num(l.final_lr_fraction);
        e << YAML::Key << "batch_size" << YAML::Value << l.batch_size;
        e << YAML::Key << "optimizer" << YAML::Value << l.optimizer;
        e << YAML::Key << "frozen_layers" << YAML::Value << l.frozen_layers;
        e << YAML::Key << "transfer_noise_shift_db" << YAML::Value << num(l.transfer_noise_shift_db);
        e << YAML::Key << "transfer_samples" << YAML::Value << l.transfer_samples;
        e << YAML::Key << "dual_rate_ratio" << YAML::Value << num(l.dual_rate_ratio);
        e << YAML::Key << "penalty" << YAML::Value << num(l.penalty);
        e << YAML::EndMap;
    }
    if (s.sched) {
        const auto& c = *s.sched;
        e << YAML::Key << "sched" << YAML::Value << YAML::BeginMap;
        e << YAML::Key << "users" << YAML::Value << c.users;
        e << YAML::Key << "rb_budget" << YAML::Value << c.rb_budget;
        e << YAML::Key << "rb_symbols" << YAML::Value << c.rb_symbols;
        e << YAML::Key << "packet_bits" << YAML::Value << num(c.packet_bits);
        e << YAML::Key << "target_eps" << YAML::Value << num(c.target_eps);
        e << YAML::Key << "d_min_slots" << YAML::Value << c.d_min_slots;
        e << YAML::Key << "d_max_slots" << YAML::Value << c.d_max_slots;
        e << YAML::Key << "mean_snr_db" << YAML::Value << YAML::Flow << nums(c.mean_snr_db);
        e << YAML::Key << "arrival_prob" << YAML::Value << YAML::Flow << nums(c.arrival_prob);
        e << YAML::Key << "agent" << YAML::Value << c.agent;
        e << YAML::Key << "train_slots" << YAML::Value << c.train_slots;
        e << YAML::Key << "eval_slots" << YAML::Value << c.eval_slots;
        e << YAML::Key << "eval_window" << YAML::Value << c.eval_window;
        e << YAML::EndMap;
    }
    if (s.fbl) {
        const auto& f = *s.fbl;
        e << YAML::Key << "fbl" << YAML::Value << YAML::BeginMap;
        e << YAML::Key << "bandwidth_hz" << YAML::Value << num(f.bandwidth_hz);
        e << YAML::Key << "frame_ms" << YAML::Value << num(f.frame_ms);
        e << YAML::Key << "payload_bits" << YAML::Value << num(f.payload_bits);
        e << YAML::Key << "snr_db" << YAML::Value << YAML::Flow << nums(f.snr_db);
        e << YAML::Key << "eps" << YAML::Value << YAML::Flow << nums(f.eps);
        e << YAML::EndMap;
    }
    e << YAML::EndMap;
    return std::string(e.c_str()) + "\n";
}

std::string config_hash(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

crosslayer::SystemBudget Scenario::system_budget() const {
    if (!budget) throw ScenarioError("scenario has no budget section", "budget");
    if (!qos) throw ScenarioError("scenario has no qos section", "qos");
    const double eps_c = qos->overall_loss * qos->decoding_fraction;
    const qos::QosTarget target(qos->e2e_delay_ms * 1e-3, qos->overall_loss, qos->frame_ms * 1e-3,
                                qos::LossSplit{eps_c, qos->overall_loss - eps_c, 0.0});
    crosslayer::SystemBudget b(budget->total_bandwidth_hz, budget->antennas,
                               std::pow(10.0, (budget->noise_psd_dbm_per_hz - 30.0) / 10.0), target);
    if (budget->fading == "deterministic") b.fading = crosslayer::FadingModel::deterministic(budget->deterministic_gain);
    return b;
}

std::vector<crosslayer::UserProfile> Scenario::user_profiles() const {
    if (users.empty()) throw ScenarioError("scenario has no users", "users");
    std::vector<crosslayer::UserProfile> out;
    for (const auto& u : users) {
        if (u.service == "urllc")
            out.push_back(crosslayer::UserProfile::urllc(db_to_linear(u.gain_db),
                                                         qos::PoissonSource(u.arrival_rate_pkts_per_s, u.packet_bits),
                                                         u.fixed_power_w));
        else
            out.push_back(crosslayer::UserProfile::delay_tolerant(db_to_linear(u.gain_db), u.mean_rate_bps));
    }
    return out;
}

crosslayer::SolverOptions Scenario::solver_options() const {
    crosslayer::SolverOptions o;
    o.quadrature_order = solver.quadrature_order;
    o.grid_points = solver.grid_points;
    o.refine = solver.refine;
    o.power_cap_w = solver.power_cap_w;
    o.rate_dispersion = solver.rate_dispersion == "unit" ? fbl::Dispersion::unit : fbl::Dispersion::exact;
    return o;
}

sim::SimConfig Scenario::sim_config(std::uint64_t seed) const {
    sim::SimConfig c;
    c.seed = seed;
    c.horizon = sim.horizon_packets;
    c.warmup_fraction = sim.warmup_fraction;
    c.arrivals = sim.arrivals == "deterministic" ? sim::ArrivalModel::deterministic
                 : sim.arrivals == "bernoulli"   ? sim::ArrivalModel::bernoulli
                                                 : sim::ArrivalModel::poisson;
    c.slot_s = sim.slot_ms * 1e-3;
    c.keep_samples = false;
    return c;
}

learn::LearningScenario Scenario::learning_scenario() const {
    if (!learn) throw ScenarioError("scenario has no learn section", "learn");
    learn::LearningScenario l{user_profiles(), system_budget(), learn->gain_db_min, learn->gain_db_max, 1.0, 1.0,
                              learn::LabelKind::bandwidth, solver_options()};
    l.rate_scale_min = learn->rate_scale_min;
    l.rate_scale_max = learn->rate_scale_max;
    l.label = learn->label == "power" ? learn::LabelKind::power : learn::LabelKind::bandwidth;
    try {
        l.validate();
    } catch (const std::invalid_argument& e) {
        throw ScenarioError(e.what(), "learn");
    }
    return l;
}

sched::EnvConfig Scenario::env_config(std::uint64_t seed) const {
    if (!sched) throw ScenarioError("scenario has no sched section", "sched");
    sched::EnvConfig c;
    c.users = sched->users;
    c.rb_budget = sched->rb_budget;
    c.rb_symbols = sched->rb_symbols;
    c.packet_bits = sched->packet_bits;
    c.target_eps = sched->target_eps;
    c.window = {sched->d_min_slots, sched->d_max_slots};
    c.mean_snr_db = sched->mean_snr_db;
    c.arrival_prob = sched->arrival_prob;
    c.reward = sched->agent == "plain" ? sched::RewardMode::indicator : sched::RewardMode::model_based_log;
    c.seed = seed;
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw ScenarioError(e.what(), "sched");
    }
    return c;
}

}  // namespace urllc::scenario
