// Task-tree scheduling as a Markov decision process.
//
// A state is the frontal elimination tree with a set of cut edges. Removing
// the cut edges splits the tree into connected components; each component is
// a task that runs on one core once every task hanging below it has finished.
// Actions delete edges (more, smaller tasks), add them back (fewer, larger
// tasks) or leave the tree alone.
#pragma once

#include <compare>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ess/sparse.hpp"
#include "ess/symbolic.hpp"

namespace ess {

/// Frontal tree with cut edges and execution progress.
///
/// Node ids follow the frontal ids, so every parent id is larger than its
/// children's. When the frontal forest has several roots a zero-workload
/// virtual root is appended and joins them into a single tree. Edges are
/// named by their child node.
class TaskTree {
public:
    TaskTree() = default;
    /// `parent` may describe a forest; a virtual root is added if needed.
    TaskTree(std::vector<Index> parent, std::vector<double> workload);

    Index size() const { return static_cast<Index>(parent_.size()); }
    Index root() const { return root_; }
    bool has_virtual_root() const { return virtual_root_; }
    /// Number of real frontal nodes.
    Index frontal_count() const { return virtual_root_ ? size() - 1 : size(); }

    Index parent(Index v) const { return parent_[v]; }
    const std::vector<Index>& children(Index v) const { return children_[v]; }
    double workload(Index v) const { return workload_[v]; }
    double total_workload() const { return total_; }

    bool is_edge(Index child) const { return child >= 0 && child < size() && parent_[child] != kNone; }
    bool is_cut(Index child) const { return cut_[child]; }
    Index cut_count() const;
    std::vector<Index> cut_edges() const;

    bool done(Index v) const { return done_[v]; }
    bool started(Index v) const { return started_[v]; }
    bool all_done() const;
    double remaining_workload() const;

    /// Top node of the task containing each node.
    std::vector<Index> task_top() const;
    /// Tops of all tasks, ascending.
    std::vector<Index> task_tops() const;
    /// Nodes of the task whose top is `top`, ascending (children first).
    std::vector<Index> task_nodes(Index top) const;
    double task_workload(Index top) const;
    /// Tops of the tasks that must finish before `top` can start.
    std::vector<Index> task_dependencies(Index top) const;
    /// Tasks not started whose dependencies are all done, ascending by top.
    std::vector<Index> ready_tasks() const;

    void set_cut(Index child, bool value);
    void mark_started(Index top);
    void mark_done(Index top);

    /// Throws `Error` if any structural or progress invariant is broken.
    void check_invariants() const;

    friend bool operator==(const TaskTree&, const TaskTree&) = default;

private:
    std::vector<Index> parent_;
    std::vector<std::vector<Index>> children_;
    std::vector<double> workload_;
    std::vector<bool> cut_;
    std::vector<bool> started_;
    std::vector<bool> done_;
    Index root_ = kNone;
    bool virtual_root_ = false;
    double total_ = 0.0;
};

/// Initial task tree T0: one node per frontal, no cuts; workload is the sum
/// of squared column structure sizes of the frontal's columns.
TaskTree build_task_tree(const FrontalPartition& p, const EliminationTree& t, const FillPattern& f);
TaskTree build_task_tree(const Symbolic& s);

enum class ActionKind { Delete, Add, Skip };

struct Action {
    ActionKind kind = ActionKind::Skip;
    std::vector<Index> edges;  ///< child nodes of the affected edges

    static Action skip() { return {}; }
    friend bool operator==(const Action&, const Action&) = default;
};

inline constexpr Index kDefaultCandidates = 3;

/// Skip, then Delete actions cutting the 1..K heaviest split candidates,
/// then Add actions restoring the 1..K lightest merge candidates.
///
/// Split candidates are uncut edges between unstarted nodes whose parent has
/// at least two children in its task; they are ranked by the workload of the
/// child's side. Merge candidates are cut edges whose two tasks have not
/// started, ranked by their combined workload. Ties go to the smaller child id.
std::vector<Action> enumerate_actions(const TaskTree& s, Index cores, Index k = kDefaultCandidates);

/// Returns the successor state; throws on unknown or illegal edges.
TaskTree apply_action(const TaskTree& s, const Action& a);
void apply_action_in_place(TaskTree& s, const Action& a);

/// Fixed action alphabet used by the tabular policy.
enum class ActionClass { Delete1 = 0, Delete2, Delete3, Add, Skip };
inline constexpr int kActionClassCount = 5;

std::string_view to_string(ActionClass c);
ActionClass action_class_from_string(std::string_view s);

/// Concrete action for a class in state `s`, or nothing when unrealizable.
std::optional<Action> realize(const TaskTree& s, Index cores, ActionClass c);
/// Realizable classes in class order; Skip is always present.
std::vector<ActionClass> realizable_classes(const TaskTree& s, Index cores);

struct RewardWeights {
    double w_time = 1.0;          ///< per second
    double w_mem = 1e-9;          ///< per byte (1 per gigabyte)
    double w_balance = 0.5;
};

/// Measurements over one decision epoch.
struct EpochTrace {
    double elapsed_s = 0.0;
    double peak_bytes = 0.0;
    std::vector<double> busy;  ///< per-core busy fraction in [0, 1]
};

/// 1 - mean(busy) / max(busy); zero when no core was busy.
double imbalance(const std::vector<double>& busy);

/// -(w_time * elapsed + w_mem * peak_bytes + w_balance * imbalance)
double reward(const EpochTrace& epoch, const RewardWeights& w);

/// Discretized state used as the Q-table key.
struct StateKey {
    int ready = 0;       ///< ready task count clamped to 3
    int idle = 0;        ///< idle cores, exact
    int imbalance = 0;   ///< max/mean of ready task workloads, bucketed
    int remaining = 0;   ///< remaining work fraction, quartile bucket

    auto operator<=>(const StateKey&) const = default;
};

/// Bucket definitions shared by training and inference.
struct FeaturizerSpec {
    int ready_cap = 3;
    int cores = 1;
    std::vector<double> imbalance_edges{1.2, 2.0, 4.0};
    std::vector<double> remaining_edges{0.25, 0.5, 0.75};

    friend bool operator==(const FeaturizerSpec&, const FeaturizerSpec&) = default;
};

StateKey featurize(const TaskTree& s, Index cores, Index idle);
StateKey featurize(const TaskTree& s, Index idle, const FeaturizerSpec& spec);

}  // namespace ess
