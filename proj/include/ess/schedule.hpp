// Decision-epoch coordinator for task-tree execution.
//
// The coordinator owns the TaskTree. At every epoch it asks a policy for an
// action, applies it, and once the policy skips (or too many actions pile up
// at one instant) it dispatches ready tasks to idle cores and waits for the
// next completion. Backends either simulate task durations from workload
// estimates or run the numeric factorization on worker threads.
#pragma once

#include <exception>
#include <memory>
#include <string>
#include <vector>

#include "ess/symbolic.hpp"
#include "ess/taskmdp.hpp"

namespace ess {

struct TraceRow {
    Index task_id = 0;
    std::vector<Index> frontals;
    Index core = 0;
    double t_start_us = 0.0;
    double t_end_us = 0.0;
    double peak_bytes = 0.0;
};

struct EpochRecord {
    Index epoch = 0;
    Action action;
    StateKey key;
    double elapsed_s = 0.0;
    double peak_bytes = 0.0;
    double imbalance = 0.0;
    double reward = 0.0;
};

struct ScheduleTrace {
    std::vector<TraceRow> rows;
    std::vector<EpochRecord> epochs;
    double makespan_s = 0.0;
};

/// Writes the task rows (`task_id,frontals,core,t_start_us,t_end_us,peak_bytes`)
/// followed by a blank line and the decision-epoch rows.
void write_trace_csv(const ScheduleTrace& trace, const std::string& path);

/// Static memory estimates per task-tree node.
struct NodeCosts {
    std::vector<double> front_bytes;
    std::vector<double> contrib_bytes;
};

NodeCosts node_costs(const Symbolic& s, const TaskTree& t);

class ExecutionBackend {
public:
    struct Completion {
        Index task_id = 0;
        Index core = 0;
        double t_start = 0.0;  ///< seconds
        double t_end = 0.0;
        double peak_bytes = 0.0;
        std::exception_ptr error;
    };

    virtual ~ExecutionBackend() = default;
    /// Begins executing `nodes` (ascending) on `core`.
    virtual void start(Index task_id, const std::vector<Index>& nodes, Index core) = 0;
    /// Blocks until one running task finishes.
    virtual Completion wait_next() = 0;
    /// Seconds since the run began.
    virtual double now() const = 0;
};

/// Simulated time model; durations are proportional to node workloads.
struct SimCostModel {
    /// Simulated seconds per workload unit. Zero selects 1 / total workload,
    /// so an uncut schedule takes about one simulated second.
    double seconds_per_unit = 0.0;
    /// Fixed cost of starting a task, as a fraction of the uncut run time
    /// when `seconds_per_unit` is zero, otherwise in seconds.
    double task_overhead = 2e-3;
    /// Cost of handing one contribution entry across a cut edge, in workload units.
    double handoff_units_per_entry = 1.0;
};

class SimulatedBackend final : public ExecutionBackend {
public:
    SimulatedBackend(const TaskTree& tree, NodeCosts costs, SimCostModel model = {});

    void start(Index task_id, const std::vector<Index>& nodes, Index core) override;
    Completion wait_next() override;
    double now() const override { return clock_; }

private:
    std::vector<double> workload_;
    std::vector<Index> parent_;
    NodeCosts costs_;
    double seconds_per_unit_ = 0.0;
    double overhead_s_ = 0.0;
    double handoff_units_ = 0.0;
    double clock_ = 0.0;
    std::vector<Completion> running_;
};

class ScheduleRun {
public:
    struct Step {
        double reward = 0.0;
        EpochTrace epoch;
        bool advanced = false;
        bool terminal = false;
    };

    ScheduleRun(TaskTree tree, Index cores, ExecutionBackend& backend, NodeCosts costs,
                RewardWeights weights = {}, Index max_actions_per_instant = 8);

    const TaskTree& tree() const { return tree_; }
    Index cores() const { return cores_; }
    Index idle() const;
    bool finished() const { return tree_.all_done(); }
    StateKey key(const FeaturizerSpec& spec) const { return featurize(tree_, idle(), spec); }

    /// Applies `a`; advances time when `a` is Skip or the per-instant cap is reached.
    Step step(const Action& a);

    const ScheduleTrace& trace() const { return trace_; }

private:
    double live_bytes() const;
    void advance(Step& out);

    TaskTree tree_;
    Index cores_;
    ExecutionBackend& backend_;
    NodeCosts costs_;
    RewardWeights weights_;
    Index max_actions_;
    Index actions_this_instant_ = 0;
    Index next_task_id_ = 0;
    std::vector<Index> core_task_;  ///< top node running on each core, kNone when idle
    std::vector<std::vector<Index>> task_nodes_;  ///< by task id
    std::vector<Index> task_top_;                 ///< by task id
    ScheduleTrace trace_;
};

/// Chooses one action per decision epoch.
class SchedulePolicy {
public:
    virtual ~SchedulePolicy() = default;
    virtual Action choose(const ScheduleRun& run) = 0;
    virtual std::string name() const = 0;
};

/// Never cuts: the whole tree is a single task.
class SerialPolicy final : public SchedulePolicy {
public:
    Action choose(const ScheduleRun&) override { return Action::skip(); }
    std::string name() const override { return "serial"; }
};

/// Level-order greedy cuts sized to the core count, made once at the start.
///
/// Walking down from the root level by level, every node with two or more
/// children has all its child edges cut, until at least `cores` subtrees
/// have been split off or the tree is exhausted. Chains are descended
/// without cutting.
class StaticPolicy final : public SchedulePolicy {
public:
    Action choose(const ScheduleRun& run) override;
    std::string name() const override { return "static"; }

private:
    bool applied_ = false;
};

Action static_level_cuts(const TaskTree& t, Index cores);

/// Drives `run` to completion.
void run_schedule(ScheduleRun& run, SchedulePolicy& policy);

/// Convenience: simulated makespan of `policy` on a fresh copy of `t0`.
ScheduleTrace simulate(const TaskTree& t0, const NodeCosts& costs, Index cores, SchedulePolicy& policy,
                       const SimCostModel& model = {}, const RewardWeights& w = {});

}  // namespace ess
