#include "ess/qlearn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include "json.hpp"
#include <sstream>

#include "ess/numeric.hpp"
#include "ess/symbolic.hpp"

namespace ess {

using nlohmann::json;

TargetMode target_mode_from_string(std::string_view s) {
    if (s == "next") return TargetMode::Next;
    if (s == "max") return TargetMode::Max;
    if (s == "return") return TargetMode::Return;
    throw Error("unknown target mode: " + std::string(s));
}

double QTable::get(const StateKey& s, ActionClass a) const {
    auto it = entries.find({s, a});
    return it == entries.end() ? 0.0 : it->second;
}

bool QTable::knows(const StateKey& s) const {
    auto it = entries.lower_bound({s, ActionClass::Delete1});
    return it != entries.end() && it->first.first == s;
}

void q_update(QTable& q, const StateKey& s, ActionClass a, double r, const StateKey& s2, ActionClass a2, bool terminal,
              std::optional<double> alpha, std::optional<double> gamma) {
    if (!std::isfinite(r)) throw Error("reward must be finite");
    const double al = alpha.value_or(q.hyper.alpha);
    const double next = terminal ? 0.0 : q.get(s2, a2);
    const double cur = q.get(s, a);
    q.set(s, a, cur + al * (r + gamma.value_or(q.hyper.gamma) * next - cur));
}

SchedulingEnvironment::SchedulingEnvironment(TaskTree t0, NodeCosts costs, Index cores, RewardWeights weights,
                                             BackendFactory factory, int ready_cap)
    : t0_(std::move(t0)), costs_(std::move(costs)), cores_(cores), weights_(weights), factory_(std::move(factory)) {
    if (cores < 1) throw Error("cores must be at least 1");
    if (ready_cap < 1) throw Error("ready cap must be at least 1");
    spec_.cores = static_cast<int>(cores);
    spec_.ready_cap = ready_cap;
}

StateKey SchedulingEnvironment::reset() {
    run_.reset();
    backend_ = factory_();
    run_ = std::make_unique<ScheduleRun>(t0_, cores_, *backend_, costs_, weights_);
    return run_->key(spec_);
}

std::vector<ActionClass> SchedulingEnvironment::actions() const {
    return realizable_classes(run_->tree(), cores_);
}

Environment::Outcome SchedulingEnvironment::step(ActionClass a) {
    auto action = realize(run_->tree(), cores_, a);
    if (!action) throw Error("action class not realizable: " + std::string(to_string(a)));
    const auto st = run_->step(*action);
    Outcome out;
    out.reward = st.reward;
    out.terminal = run_->finished();
    out.advanced = st.advanced;
    out.next = run_->key(spec_);
    return out;
}

namespace {
ActionClass greedy(const QTable& q, const StateKey& s, const std::vector<ActionClass>& available) {
    ActionClass best = available.front();
    double best_q = q.get(s, best);
    for (std::size_t i = 1; i < available.size(); ++i) {
        const double v = q.get(s, available[i]);
        if (v > best_q) {
            best_q = v;
            best = available[i];
        }
    }
    return best;
}
}  // namespace

ActionClass choose_action(const QTable& q, const StateKey& s, const std::vector<ActionClass>& available,
                          double epsilon, std::mt19937_64& rng) {
    if (available.empty()) throw Error("no action available");
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    if (coin(rng) < epsilon) {
        std::uniform_int_distribution<std::size_t> pick(0, available.size() - 1);
        return available[pick(rng)];
    }
    return greedy(q, s, available);
}

Index run_episode(QTable& q, Environment& env, std::mt19937_64& rng, double epsilon, double alpha, TargetMode mode,
                  Index max_steps) {
    StateKey s = env.reset();
    ActionClass a = choose_action(q, s, env.actions(), epsilon, rng);
    if (mode == TargetMode::Return) {
        struct Visit {
            StateKey s;
            ActionClass a;
            double r;
            bool advanced;
        };
        std::vector<Visit> path;
        for (Index step = 1; step <= max_steps; ++step) {
            const auto out = env.step(a);
            path.push_back({s, a, out.reward, out.advanced});
            if (out.terminal) {
                double g = 0.0;
                for (auto it = path.rbegin(); it != path.rend(); ++it) {
                    g = it->r + (it->advanced ? q.hyper.gamma : 1.0) * g;
                    const double cur = q.get(it->s, it->a);
                    q.set(it->s, it->a, cur + alpha * (g - cur));
                }
                return step;
            }
            s = out.next;
            a = choose_action(q, s, env.actions(), epsilon, rng);
        }
        throw Error("episode did not terminate within the step limit");
    }
    for (Index step = 1; step <= max_steps; ++step) {
        const auto out = env.step(a);
        if (out.terminal) {
            q_update(q, s, a, out.reward, out.next, ActionClass::Skip, true, alpha);
            return step;
        }
        const auto avail = env.actions();
        const ActionClass a2 = choose_action(q, out.next, avail, epsilon, rng);
        const ActionClass target = mode == TargetMode::Next ? a2 : greedy(q, out.next, avail);
        q_update(q, s, a, out.reward, out.next, target, false, alpha, out.advanced ? q.hyper.gamma : 1.0);
        s = out.next;
        a = a2;
    }
    throw Error("episode did not terminate within the step limit");
}

void train_episodes(QTable& q, const std::vector<Environment*>& envs, Index episodes, std::uint64_t seed,
                    TargetMode mode) {
    if (envs.empty()) throw Error("no environments to train on");
    if (episodes < 1) throw Error("episodes must be at least 1");
    std::mt19937_64 rng(seed);
    const double e0 = q.hyper.epsilon, e1 = q.hyper.epsilon_end;
    for (Index e = 0; e < episodes; ++e) {
        const double frac = episodes > 1 ? static_cast<double>(e) / static_cast<double>(episodes - 1) : 0.0;
        const double eps = e0 + (e1 - e0) * frac;
        const double alpha = q.hyper.alpha / std::sqrt(static_cast<double>(e + 1));
        run_episode(q, *envs[e % envs.size()], rng, eps, alpha, mode);
    }
}

QTable train(const std::vector<CscMatrix>& corpus, const TrainOptions& opts, std::vector<std::string>* skipped) {
    if (corpus.empty()) throw Error("training corpus is empty");
    if (opts.episodes < 1) throw Error("episodes must be at least 1");
    if (!(opts.hyper.alpha > 0.0 && opts.hyper.alpha <= 1.0)) throw Error("alpha must lie in (0, 1]");
    if (!(opts.hyper.gamma >= 0.0 && opts.hyper.gamma < 1.0)) throw Error("gamma must lie in [0, 1)");
    if (!(opts.hyper.epsilon >= 0.0 && opts.hyper.epsilon <= 1.0)) throw Error("epsilon must lie in [0, 1]");

    std::vector<std::unique_ptr<SchedulingEnvironment>> envs(corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        try {
            AnalyzeOptions ao;
            ao.relax = opts.relax;
            auto sym = std::make_shared<const Symbolic>(analyze(corpus[i], ao));
            TaskTree t0 = build_task_tree(*sym);
            NodeCosts costs = node_costs(*sym, t0);
            SchedulingEnvironment::BackendFactory factory;
            if (opts.real_exec) {
                const CscMatrix* a = &corpus[i];
                factory = [a, sym, cores = opts.cores] { return make_numeric_backend(*a, sym, cores); };
            } else {
                factory = [t0, costs, model = opts.sim] { return std::make_unique<SimulatedBackend>(t0, costs, model); };
            }
            envs[i] = std::make_unique<SchedulingEnvironment>(std::move(t0), std::move(costs), opts.cores,
                                                              opts.weights, std::move(factory), opts.ready_cap);
        } catch (const Error& e) {
            if (skipped) skipped->push_back("matrix " + std::to_string(i) + ": " + e.what());
        }
    }

    QTable q;
    q.hyper = opts.hyper;
    q.spec.cores = static_cast<int>(opts.cores);
    q.spec.ready_cap = opts.ready_cap;
    std::mt19937_64 rng(opts.seed);
    const double e0 = q.hyper.epsilon, e1 = q.hyper.epsilon_end;
    bool any = false;
    for (Index e = 0; e < opts.episodes; ++e) {
        auto& env = envs[e % envs.size()];
        if (!env) continue;  // analysis failed, episode skipped
        any = true;
        const double frac = opts.episodes > 1 ? static_cast<double>(e) / static_cast<double>(opts.episodes - 1) : 0.0;
        const double alpha = q.hyper.alpha / std::sqrt(static_cast<double>(e + 1));
        run_episode(q, *env, rng, e0 + (e1 - e0) * frac, alpha, opts.target);
    }
    if (!any) throw Error("no corpus matrix could be analyzed");
    return q;
}

Action infer_policy(const QTable& q, const TaskTree& s, Index cores, Index idle) {
    FeaturizerSpec spec = q.spec;
    spec.cores = static_cast<int>(cores);
    idle = std::clamp<Index>(idle, 0, cores);
    const StateKey key = featurize(s, idle, spec);
    if (!q.knows(key)) return Action::skip();
    const auto cls = greedy(q, key, realizable_classes(s, cores));
    return *realize(s, cores, cls);
}

QTablePolicy::QTablePolicy(std::shared_ptr<const QTable> q, Index cores, bool strict) : q_(std::move(q)) {
    if (!q_) throw Error("no Q table given");
    if (strict && q_->spec.cores != cores)
        throw Error("Q table was trained for " + std::to_string(q_->spec.cores) + " cores, not " +
                    std::to_string(cores));
}

Action QTablePolicy::choose(const ScheduleRun& run) { return infer_policy(*q_, run.tree(), run.cores(), run.idle()); }

namespace {
json spec_json(const FeaturizerSpec& s) {
    return json{{"ready_cap", s.ready_cap},
                {"cores", s.cores},
                {"imbalance_edges", s.imbalance_edges},
                {"remaining_edges", s.remaining_edges}};
}
}  // namespace

std::string dump_qtable(const QTable& q) {
    json j;
    j["version"] = kQTableVersion;
    j["hyper"] = {{"alpha", q.hyper.alpha}, {"gamma", q.hyper.gamma}, {"epsilon", q.hyper.epsilon}};
    j["featurizer"] = spec_json(q.spec);
    json entries = json::array();
    for (const auto& [k, v] : q.entries) {
        const auto& [s, a] = k;
        entries.push_back(
            {{"key", {s.ready, s.idle, s.imbalance, s.remaining}}, {"action", std::string(to_string(a))}, {"q", v}});
    }
    j["entries"] = std::move(entries);
    return j.dump(1) + "\n";
}

void save_qtable(const QTable& q, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << dump_qtable(q);
    if (!out) throw Error("failed writing " + path.string());
}

QTable parse_qtable(const std::string& text, const FeaturizerSpec* expected) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(std::string("corrupt Q table: ") + e.what());
    }
    try {
        if (!j.is_object() || !j.contains("version") || j.at("version") != kQTableVersion)
            throw Error("Q table version mismatch: expected " + std::string(kQTableVersion));
        QTable q;
        const auto& h = j.at("hyper");
        q.hyper.alpha = h.at("alpha").get<double>();
        q.hyper.gamma = h.at("gamma").get<double>();
        q.hyper.epsilon = h.at("epsilon").get<double>();
        const auto& f = j.at("featurizer");
        q.spec.ready_cap = f.at("ready_cap").get<int>();
        q.spec.cores = f.at("cores").get<int>();
        q.spec.imbalance_edges = f.at("imbalance_edges").get<std::vector<double>>();
        q.spec.remaining_edges = f.at("remaining_edges").get<std::vector<double>>();
        if (expected && !(*expected == q.spec)) throw Error("Q table featurizer spec does not match");
        if (q.spec.cores < 1 || q.spec.ready_cap < 0) throw Error("corrupt Q table: bad featurizer spec");
        for (const auto& e : j.at("entries")) {
            const auto key = e.at("key").get<std::vector<int>>();
            if (key.size() != 4) throw Error("corrupt Q table: key must have 4 entries");
            StateKey s{key[0], key[1], key[2], key[3]};
            if (s.ready < 0 || s.ready > q.spec.ready_cap || s.idle < 0 || s.idle > q.spec.cores || s.imbalance < 0 ||
                s.imbalance > static_cast<int>(q.spec.imbalance_edges.size()) || s.remaining < 0 ||
                s.remaining > static_cast<int>(q.spec.remaining_edges.size()))
                throw Error("corrupt Q table: key out of range");
            const double v = e.at("q").get<double>();
            if (!std::isfinite(v)) throw Error("corrupt Q table: non-finite value");
            if (!q.entries.emplace(std::pair{s, action_class_from_string(e.at("action").get<std::string>())}, v).second)
                throw Error("corrupt Q table: duplicate entry");
        }
        return q;
    } catch (const json::exception& e) {
        throw Error(std::string("corrupt Q table: ") + e.what());
    }
}

QTable load_qtable(const std::filesystem::path& path, const FeaturizerSpec* expected) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_qtable(ss.str(), expected);
}

}  // namespace ess
