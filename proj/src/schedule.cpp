#include "ess/schedule.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>

namespace ess {

NodeCosts node_costs(const Symbolic& s, const TaskTree& t) {
    NodeCosts c;
    c.front_bytes.assign(t.size(), 0.0);
    c.contrib_bytes.assign(t.size(), 0.0);
    for (Index f = 0; f < s.frontals.count(); ++f) {
        const double m = static_cast<double>(s.rows[f].size());
        const double rest = m - static_cast<double>(s.frontals.frontals[f].size());
        c.front_bytes[f] = m * m * sizeof(double);
        c.contrib_bytes[f] = rest * rest * sizeof(double);
    }
    return c;
}

SimulatedBackend::SimulatedBackend(const TaskTree& tree, NodeCosts costs, SimCostModel model)
    : costs_(std::move(costs)) {
    for (Index v = 0; v < tree.size(); ++v) {
        workload_.push_back(tree.workload(v));
        parent_.push_back(tree.parent(v));
    }
    if (model.seconds_per_unit > 0.0) {
        seconds_per_unit_ = model.seconds_per_unit;
        overhead_s_ = model.task_overhead;
    } else {
        const double total = tree.total_workload();
        seconds_per_unit_ = total > 0.0 ? 1.0 / total : 1.0;
        overhead_s_ = model.task_overhead;
    }
    handoff_units_ = model.handoff_units_per_entry;
    if (costs_.contrib_bytes.size() < workload_.size()) costs_.contrib_bytes.resize(workload_.size(), 0.0);
    if (costs_.front_bytes.size() < workload_.size()) costs_.front_bytes.resize(workload_.size(), 0.0);
}

void SimulatedBackend::start(Index task_id, const std::vector<Index>& nodes, Index core) {
    std::vector<bool> in_task(workload_.size(), false);
    for (Index v : nodes) in_task[v] = true;
    double units = 0.0, peak = 0.0;
    for (Index v : nodes) {
        units += workload_[v];
        peak = std::max(peak, costs_.front_bytes[v]);
    }
    // Contributions arriving over cut edges have to be fetched from another core.
    for (Index u = 0; u < static_cast<Index>(parent_.size()); ++u)
        if (parent_[u] != kNone && in_task[parent_[u]] && !in_task[u])
            units += handoff_units_ * costs_.contrib_bytes[u] / sizeof(double);
    Completion c;
    c.task_id = task_id;
    c.core = core;
    c.t_start = clock_;
    c.t_end = clock_ + units * seconds_per_unit_ + overhead_s_;
    c.peak_bytes = peak;
    running_.push_back(c);
}

ExecutionBackend::Completion SimulatedBackend::wait_next() {
    if (running_.empty()) throw Error("no task is running");
    auto it = std::min_element(running_.begin(), running_.end(), [](const Completion& a, const Completion& b) {
        return a.t_end != b.t_end ? a.t_end < b.t_end : a.core < b.core;
    });
    Completion c = *it;
    running_.erase(it);
    clock_ = c.t_end;
    return c;
}

ScheduleRun::ScheduleRun(TaskTree tree, Index cores, ExecutionBackend& backend, NodeCosts costs,
                         RewardWeights weights, Index max_actions_per_instant)
    : tree_(std::move(tree)),
      cores_(cores),
      backend_(backend),
      costs_(std::move(costs)),
      weights_(weights),
      max_actions_(max_actions_per_instant),
      core_task_(cores, kNone) {
    if (cores < 1) throw Error("cores must be at least 1");
    if (max_actions_ < 1) throw Error("at least one action per instant is required");
    costs_.front_bytes.resize(tree_.size(), 0.0);
    costs_.contrib_bytes.resize(tree_.size(), 0.0);
}

Index ScheduleRun::idle() const { return std::count(core_task_.begin(), core_task_.end(), kNone); }

double ScheduleRun::live_bytes() const {
    double bytes = 0.0;
    for (Index top : core_task_) {
        if (top == kNone) continue;
        double peak = 0.0;
        for (Index v : tree_.task_nodes(top)) peak = std::max(peak, costs_.front_bytes[v]);
        bytes += peak;
    }
    for (Index v = 0; v < tree_.size(); ++v)
        if (tree_.is_cut(v) && tree_.done(v) && !tree_.started(tree_.parent(v))) bytes += costs_.contrib_bytes[v];
    return bytes;
}

ScheduleRun::Step ScheduleRun::step(const Action& a) {
    if (finished()) throw Error("schedule already finished");
    FeaturizerSpec spec;
    spec.cores = static_cast<int>(cores_);
    EpochRecord rec;
    rec.epoch = static_cast<Index>(trace_.epochs.size());
    rec.key = featurize(tree_, idle(), spec);
    rec.action = a;

    apply_action_in_place(tree_, a);
    Step out;
    const bool force = a.kind == ActionKind::Skip || ++actions_this_instant_ >= max_actions_;
    if (force) {
        advance(out);
    } else {
        out.epoch.busy.assign(cores_, 0.0);
        out.reward = reward(out.epoch, weights_);
    }
    rec.elapsed_s = out.epoch.elapsed_s;
    rec.peak_bytes = out.epoch.peak_bytes;
    rec.imbalance = imbalance(out.epoch.busy);
    rec.reward = out.reward;
    trace_.epochs.push_back(std::move(rec));
    return out;
}

void ScheduleRun::advance(Step& out) {
    actions_this_instant_ = 0;
    auto ready = tree_.ready_tasks();
    std::vector<std::pair<double, Index>> order;
    for (Index top : ready) order.emplace_back(-tree_.task_workload(top), top);
    std::sort(order.begin(), order.end());
    std::size_t next = 0;
    for (Index core = 0; core < cores_ && next < order.size(); ++core) {
        if (core_task_[core] != kNone) continue;
        const Index top = order[next++].second;
        auto nodes = tree_.task_nodes(top);
        tree_.mark_started(top);
        const Index id = next_task_id_++;
        task_nodes_.push_back(nodes);
        task_top_.push_back(top);
        core_task_[core] = top;
        backend_.start(id, nodes, core);
    }
    if (idle() == cores_) throw Error("no runnable task although the schedule is unfinished");

    const double t0 = backend_.now();
    out.epoch.peak_bytes = live_bytes();
    out.epoch.busy.assign(cores_, 0.0);
    for (Index core = 0; core < cores_; ++core)
        if (core_task_[core] != kNone) out.epoch.busy[core] = 1.0;

    const auto done = backend_.wait_next();
    if (done.error) std::rethrow_exception(done.error);
    const Index top = task_top_[done.task_id];
    tree_.mark_done(top);
    core_task_[done.core] = kNone;

    TraceRow row;
    row.task_id = done.task_id;
    row.frontals = task_nodes_[done.task_id];
    if (tree_.has_virtual_root()) std::erase(row.frontals, tree_.root());
    row.core = done.core;
    row.t_start_us = done.t_start * 1e6;
    row.t_end_us = done.t_end * 1e6;
    row.peak_bytes = done.peak_bytes;
    trace_.rows.push_back(std::move(row));
    trace_.makespan_s = std::max(trace_.makespan_s, done.t_end);

    out.epoch.elapsed_s = std::max(0.0, done.t_end - t0);
    out.reward = reward(out.epoch, weights_);
    out.advanced = true;
    out.terminal = finished();
}

Action static_level_cuts(const TaskTree& t, Index cores) {
    Action a;
    if (cores <= 1 || t.size() == 0) return a;
    std::vector<Index> frontier{t.root()}, next;
    while (!frontier.empty() && static_cast<Index>(a.edges.size()) < cores) {
        next.clear();
        for (Index v : frontier) {
            const auto& ch = t.children(v);
            if (ch.size() >= 2)
                for (Index c : ch)
                    if (!t.started(c) && !t.is_cut(c)) a.edges.push_back(c);
            next.insert(next.end(), ch.begin(), ch.end());
        }
        frontier.swap(next);
    }
    if (a.edges.empty()) return a;
    std::sort(a.edges.begin(), a.edges.end());
    a.kind = ActionKind::Delete;
    return a;
}

Action StaticPolicy::choose(const ScheduleRun& run) {
    if (applied_) return Action::skip();
    applied_ = true;
    return static_level_cuts(run.tree(), run.cores());
}

void run_schedule(ScheduleRun& run, SchedulePolicy& policy) {
    while (!run.finished()) run.step(policy.choose(run));
}

ScheduleTrace simulate(const TaskTree& t0, const NodeCosts& costs, Index cores, SchedulePolicy& policy,
                       const SimCostModel& model, const RewardWeights& w) {
    SimulatedBackend backend(t0, costs, model);
    ScheduleRun run(t0, cores, backend, costs, w);
    run_schedule(run, policy);
    return run.trace();
}

namespace {
std::string join(const std::vector<Index>& v, char sep) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += sep;
        s += std::to_string(v[i]);
    }
    return s;
}

std::string_view kind_name(ActionKind k) {
    switch (k) {
        case ActionKind::Delete: return "Delete";
        case ActionKind::Add: return "Add";
        case ActionKind::Skip: return "Skip";
    }
    return "?";
}
}  // namespace

void write_trace_csv(const ScheduleTrace& trace, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    out << std::setprecision(17);
    out << "task_id,frontals,core,t_start_us,t_end_us,peak_bytes\n";
    for (const auto& r : trace.rows)
        out << r.task_id << ',' << join(r.frontals, ';') << ',' << r.core << ',' << r.t_start_us << ','
            << r.t_end_us << ',' << r.peak_bytes << '\n';
    out << "\nepoch,action,edges,key,elapsed_us,peak_bytes,imbalance,reward\n";
    for (const auto& e : trace.epochs)
        out << e.epoch << ',' << kind_name(e.action.kind) << ',' << join(e.action.edges, ';') << ','
            << e.key.ready << ';' << e.key.idle << ';' << e.key.imbalance << ';' << e.key.remaining << ','
            << e.elapsed_s * 1e6 << ',' << e.peak_bytes << ',' << e.imbalance << ',' << e.reward << '\n';
}

}  // namespace ess
