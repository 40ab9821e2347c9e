#include "ess/taskmdp.hpp"

#include <algorithm>
#include <array>
#include <set>

namespace ess {

TaskTree::TaskTree(std::vector<Index> parent, std::vector<double> workload)
    : parent_(std::move(parent)), workload_(std::move(workload)) {
    if (parent_.size() != workload_.size()) throw Error("parent and workload lengths differ");
    std::vector<Index> roots;
    for (Index v = 0; v < size(); ++v) {
        if (parent_[v] == kNone) roots.push_back(v);
        else if (parent_[v] <= v || parent_[v] >= size()) throw Error("tree parent must follow its child");
        if (!(workload_[v] >= 0.0)) throw Error("workloads must be non-negative");
    }
    if (roots.size() > 1) {
        const Index vr = size();
        for (Index r : roots) parent_[r] = vr;
        parent_.push_back(kNone);
        workload_.push_back(0.0);
        virtual_root_ = true;
        root_ = vr;
    } else if (roots.size() == 1) {
        root_ = roots.front();
    }
    children_.assign(parent_.size(), {});
    for (Index v = 0; v < size(); ++v)
        if (parent_[v] != kNone) children_[parent_[v]].push_back(v);
    cut_.assign(parent_.size(), false);
    started_.assign(parent_.size(), false);
    done_.assign(parent_.size(), false);
    for (double w : workload_) total_ += w;
}

Index TaskTree::cut_count() const { return std::count(cut_.begin(), cut_.end(), true); }

std::vector<Index> TaskTree::cut_edges() const {
    std::vector<Index> e;
    for (Index v = 0; v < size(); ++v)
        if (cut_[v]) e.push_back(v);
    return e;
}

bool TaskTree::all_done() const { return std::all_of(done_.begin(), done_.end(), [](bool d) { return d; }); }

double TaskTree::remaining_workload() const {
    double r = 0.0;
    for (Index v = 0; v < size(); ++v)
        if (!done_[v]) r += workload_[v];
    return r;
}

std::vector<Index> TaskTree::task_top() const {
    std::vector<Index> top(parent_.size());
    for (Index v = size() - 1; v >= 0; --v)
        top[v] = (parent_[v] == kNone || cut_[v]) ? v : top[parent_[v]];
    return top;
}

std::vector<Index> TaskTree::task_tops() const {
    std::vector<Index> tops;
    for (Index v = 0; v < size(); ++v)
        if (parent_[v] == kNone || cut_[v]) tops.push_back(v);
    return tops;
}

std::vector<Index> TaskTree::task_nodes(Index top) const {
    const auto tt = task_top();
    std::vector<Index> nodes;
    for (Index v = 0; v <= top; ++v)
        if (tt[v] == top) nodes.push_back(v);
    return nodes;
}

double TaskTree::task_workload(Index top) const {
    const auto tt = task_top();
    double w = 0.0;
    for (Index v = 0; v <= top; ++v)
        if (tt[v] == top) w += workload_[v];
    return w;
}

std::vector<Index> TaskTree::task_dependencies(Index top) const {
    const auto tt = task_top();
    std::vector<Index> deps;
    for (Index v = 0; v < size(); ++v)
        if (cut_[v] && tt[parent_[v]] == top) deps.push_back(v);
    return deps;
}

std::vector<Index> TaskTree::ready_tasks() const {
    const auto tt = task_top();
    std::vector<bool> blocked(parent_.size(), false);
    for (Index v = 0; v < size(); ++v)
        if (cut_[v] && !done_[v]) blocked[tt[parent_[v]]] = true;
    std::vector<Index> ready;
    for (Index v = 0; v < size(); ++v)
        if (tt[v] == v && !started_[v] && !blocked[v]) ready.push_back(v);
    return ready;
}

void TaskTree::set_cut(Index child, bool value) {
    if (!is_edge(child)) throw Error("unknown edge " + std::to_string(child));
    cut_[child] = value;
}

void TaskTree::mark_started(Index top) {
    for (Index v : task_nodes(top)) started_[v] = true;
}

void TaskTree::mark_done(Index top) {
    for (Index v : task_nodes(top)) {
        started_[v] = true;
        done_[v] = true;
    }
}

void TaskTree::check_invariants() const {
    Index roots = 0;
    for (Index v = 0; v < size(); ++v) {
        if (parent_[v] == kNone) {
            ++roots;
            if (cut_[v]) throw Error("root edge cannot be cut");
        }
        if (done_[v] && !started_[v]) throw Error("node done before it started");
        for (Index c : children_[v])
            if (done_[v] && !done_[c]) throw Error("node " + std::to_string(v) + " done before child " + std::to_string(c));
    }
    if (size() > 0 && roots != 1) throw Error("task tree must have exactly one root");
    // Removing k cut edges from a tree must leave k + 1 components.
    if (size() > 0 && static_cast<Index>(task_tops().size()) != cut_count() + 1)
        throw Error("task count does not match cut count");
    // A task is started or done as a whole.
    const auto tt = task_top();
    for (Index v = 0; v < size(); ++v)
        if (started_[v] != started_[tt[v]] || done_[v] != done_[tt[v]])
            throw Error("task " + std::to_string(tt[v]) + " partially executed");
}

TaskTree build_task_tree(const FrontalPartition& p, const EliminationTree& t, const FillPattern& f) {
    if (static_cast<Index>(p.frontal_of.size()) != t.size() || f.size() != t.size())
        throw Error("partition, tree and fill pattern sizes differ");
    std::vector<double> work(p.frontals.size(), 0.0);
    for (std::size_t k = 0; k < p.frontals.size(); ++k)
        for (Index c : p.frontals[k]) {
            if (p.frontal_of[c] != static_cast<Index>(k)) throw Error("partition inconsistent");
            const double s = static_cast<double>(f.cols[c].size());
            work[k] += s * s;
        }
    return TaskTree(frontal_parents(p, t), std::move(work));
}

TaskTree build_task_tree(const Symbolic& s) { return build_task_tree(s.frontals, s.etree, s.fill); }

namespace {

struct Candidates {
    std::vector<Index> split;  // heaviest first
    std::vector<Index> merge;  // lightest first
};

Candidates candidates(const TaskTree& s) {
    const Index n = s.size();
    const auto top = s.task_top();
    std::vector<double> side(n), task_w(n, 0.0);
    std::vector<int> in_task_children(n, 0);
    for (Index v = 0; v < n; ++v) side[v] = s.workload(v);
    for (Index v = 0; v < n; ++v) {
        task_w[top[v]] += s.workload(v);
        const Index p = s.parent(v);
        if (p != kNone && !s.is_cut(v)) {
            side[p] += side[v];
            ++in_task_children[p];
        }
    }

    Candidates c;
    std::vector<std::pair<double, Index>> split, merge;
    for (Index v = 0; v < n; ++v) {
        const Index p = s.parent(v);
        if (p == kNone || s.started(v) || s.started(p)) continue;
        if (!s.is_cut(v)) {
            if (in_task_children[p] >= 2) split.emplace_back(-side[v], v);
        } else {
            merge.emplace_back(task_w[v] + task_w[top[p]], v);
        }
    }
    std::sort(split.begin(), split.end());
    std::sort(merge.begin(), merge.end());
    for (const auto& e : split) c.split.push_back(e.second);
    for (const auto& e : merge) c.merge.push_back(e.second);
    return c;
}

Action prefix(ActionKind kind, const std::vector<Index>& edges, Index k) {
    Action a{kind, std::vector<Index>(edges.begin(), edges.begin() + k)};
    std::sort(a.edges.begin(), a.edges.end());
    return a;
}

}  // namespace

std::vector<Action> enumerate_actions(const TaskTree& s, Index cores, Index k) {
    if (cores < 1) throw Error("cores must be at least 1");
    const auto c = candidates(s);
    std::vector<Action> out{Action::skip()};
    for (Index i = 1; i <= std::min<Index>(k, c.split.size()); ++i) out.push_back(prefix(ActionKind::Delete, c.split, i));
    for (Index i = 1; i <= std::min<Index>(k, c.merge.size()); ++i) out.push_back(prefix(ActionKind::Add, c.merge, i));
    return out;
}

void apply_action_in_place(TaskTree& s, const Action& a) {
    if (a.kind == ActionKind::Skip) {
        if (!a.edges.empty()) throw Error("skip carries no edges");
        return;
    }
    std::set<Index> seen;
    const auto top = s.task_top();
    for (Index e : a.edges) {
        if (!s.is_edge(e)) throw Error("action references unknown edge " + std::to_string(e));
        if (!seen.insert(e).second) throw Error("edge listed twice in action");
        const Index p = s.parent(e);
        if (a.kind == ActionKind::Delete) {
            if (s.is_cut(e)) throw Error("edge " + std::to_string(e) + " already cut");
            if (s.started(e) || s.started(p)) throw Error("cannot cut an edge of a started task");
        } else {
            if (!s.is_cut(e)) throw Error("edge " + std::to_string(e) + " is not cut");
            if (s.started(e) || s.started(top[p])) throw Error("cannot merge a started task");
        }
    }
    for (Index e : a.edges) s.set_cut(e, a.kind == ActionKind::Delete);
}

TaskTree apply_action(const TaskTree& s, const Action& a) {
    TaskTree next = s;
    apply_action_in_place(next, a);
    return next;
}

namespace {
constexpr std::array<std::string_view, kActionClassCount> kClassNames{
    "Delete-heaviest-1", "Delete-heaviest-2", "Delete-heaviest-3", "Add-lightest-pair", "Skip"};
}

std::string_view to_string(ActionClass c) { return kClassNames[static_cast<int>(c)]; }

ActionClass action_class_from_string(std::string_view s) {
    for (int i = 0; i < kActionClassCount; ++i)
        if (kClassNames[i] == s) return static_cast<ActionClass>(i);
    throw Error("unknown action class '" + std::string(s) + "'");
}

std::optional<Action> realize(const TaskTree& s, Index cores, ActionClass cls) {
    if (cores < 1) throw Error("cores must be at least 1");
    if (cls == ActionClass::Skip) return Action::skip();
    const auto c = candidates(s);
    if (cls == ActionClass::Add) {
        if (c.merge.empty()) return std::nullopt;
        return prefix(ActionKind::Add, c.merge, 1);
    }
    const Index k = static_cast<Index>(cls) + 1;
    if (static_cast<Index>(c.split.size()) < k) return std::nullopt;
    return prefix(ActionKind::Delete, c.split, k);
}

std::vector<ActionClass> realizable_classes(const TaskTree& s, Index cores) {
    if (cores < 1) throw Error("cores must be at least 1");
    const auto c = candidates(s);
    std::vector<ActionClass> out;
    for (Index k = 1; k <= 3 && k <= static_cast<Index>(c.split.size()); ++k) out.push_back(static_cast<ActionClass>(k - 1));
    if (!c.merge.empty()) out.push_back(ActionClass::Add);
    out.push_back(ActionClass::Skip);
    return out;
}

double imbalance(const std::vector<double>& busy) {
    if (busy.empty()) return 0.0;
    double sum = 0.0, mx = 0.0;
    for (double b : busy) {
        sum += b;
        mx = std::max(mx, b);
    }
    if (mx <= 0.0) return 0.0;
    return 1.0 - (sum / static_cast<double>(busy.size())) / mx;
}

double reward(const EpochTrace& epoch, const RewardWeights& w) {
    if (epoch.busy.empty()) throw Error("empty epoch trace");
    return -(w.w_time * epoch.elapsed_s + w.w_mem * epoch.peak_bytes + w.w_balance * imbalance(epoch.busy));
}

namespace {
int bucket(double x, const std::vector<double>& edges) {
    int b = 0;
    for (double e : edges)
        if (x >= e) ++b;
    return b;
}
}  // namespace

StateKey featurize(const TaskTree& s, Index idle, const FeaturizerSpec& spec) {
    if (idle < 0 || idle > spec.cores) throw Error("idle cores outside [0, cores]");
    StateKey key;
    const auto ready = s.ready_tasks();
    key.ready = static_cast<int>(std::min<Index>(static_cast<Index>(ready.size()), spec.ready_cap));
    key.idle = static_cast<int>(idle);
    if (!ready.empty()) {
        const auto top = s.task_top();
        std::vector<double> w(s.size(), 0.0);
        for (Index v = 0; v < s.size(); ++v) w[top[v]] += s.workload(v);
        double sum = 0.0, mx = 0.0;
        for (Index t : ready) {
            sum += w[t];
            mx = std::max(mx, w[t]);
        }
        const double mean = sum / static_cast<double>(ready.size());
        key.imbalance = bucket(mean > 0.0 ? mx / mean : 1.0, spec.imbalance_edges);
    }
    const double total = s.total_workload();
    key.remaining = bucket(total > 0.0 ? s.remaining_workload() / total : 0.0, spec.remaining_edges);
    return key;
}

StateKey featurize(const TaskTree& s, Index cores, Index idle) {
    FeaturizerSpec spec;
    spec.cores = static_cast<int>(cores);
    return featurize(s, idle, spec);
}

}  // namespace ess
