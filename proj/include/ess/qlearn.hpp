// Tabular Q-learning over scheduling episodes and greedy policy lookup.
#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ess/schedule.hpp"
#include "ess/sparse.hpp"
#include "ess/taskmdp.hpp"

namespace ess {

struct QHyper {
    double alpha = 0.2;    ///< initial learning rate, decays as 1/sqrt(episode)
    double gamma = 0.95;
    double epsilon = 0.5;  ///< initial exploration rate
    double epsilon_end = 0.05;
    friend bool operator==(const QHyper&, const QHyper&) = default;
};

/// Update target: bootstrap on the action actually taken next, bootstrap on
/// the best one, or the observed discounted return to the end of the episode.
enum class TargetMode { Next, Max, Return };

TargetMode target_mode_from_string(std::string_view s);

class QTable {
public:
    QHyper hyper;
    FeaturizerSpec spec;
    std::map<std::pair<StateKey, ActionClass>, double> entries;

    /// Missing entries read as 0.
    double get(const StateKey& s, ActionClass a) const;
    void set(const StateKey& s, ActionClass a, double q) { entries[{s, a}] = q; }
    bool knows(const StateKey& s) const;

    friend bool operator==(const QTable&, const QTable&) = default;
};

/// Q(s,a) += alpha * (r + gamma * Q(s2,a2) - Q(s,a)); Q(s2,.) is 0 when
/// `terminal`. Uses hyper.alpha / hyper.gamma unless overridden.
void q_update(QTable& q, const StateKey& s, ActionClass a, double r, const StateKey& s2, ActionClass a2,
              bool terminal = false, std::optional<double> alpha = std::nullopt,
              std::optional<double> gamma = std::nullopt);

/// Episodic environment seen by the learner.
class Environment {
public:
    struct Outcome {
        double reward = 0.0;
        StateKey next;
        bool terminal = false;
        /// False when no time passed; such steps are not discounted.
        bool advanced = true;
    };

    virtual ~Environment() = default;
    virtual StateKey reset() = 0;
    /// Classes available in the current state, in class order.
    virtual std::vector<ActionClass> actions() const = 0;
    virtual Outcome step(ActionClass a) = 0;
};

/// One scheduling run per episode, starting from T0.
class SchedulingEnvironment final : public Environment {
public:
    using BackendFactory = std::function<std::unique_ptr<ExecutionBackend>()>;

    SchedulingEnvironment(TaskTree t0, NodeCosts costs, Index cores, RewardWeights weights, BackendFactory factory,
                          int ready_cap = FeaturizerSpec{}.ready_cap);

    StateKey reset() override;
    std::vector<ActionClass> actions() const override;
    Outcome step(ActionClass a) override;

    const FeaturizerSpec& spec() const { return spec_; }

private:
    TaskTree t0_;
    NodeCosts costs_;
    Index cores_;
    RewardWeights weights_;
    BackendFactory factory_;
    FeaturizerSpec spec_;
    std::unique_ptr<ExecutionBackend> backend_;
    std::unique_ptr<ScheduleRun> run_;
};

/// Epsilon-greedy choice; ties go to the earlier class.
ActionClass choose_action(const QTable& q, const StateKey& s, const std::vector<ActionClass>& available,
                          double epsilon, std::mt19937_64& rng);

/// Runs one episode, updating `q`. Returns the number of steps taken.
Index run_episode(QTable& q, Environment& env, std::mt19937_64& rng, double epsilon, double alpha, TargetMode mode,
                  Index max_steps = 1'000'000);

/// Episode e (0-based) uses environment e mod |envs|, epsilon decaying linearly
/// from hyper.epsilon to hyper.epsilon_end and alpha = hyper.alpha / sqrt(e + 1).
void train_episodes(QTable& q, const std::vector<Environment*>& envs, Index episodes, std::uint64_t seed,
                    TargetMode mode = TargetMode::Next);

struct TrainOptions {
    Index cores = 4;
    QHyper hyper;
    RewardWeights weights;
    Index episodes = 200;
    std::uint64_t seed = 1;
    TargetMode target = TargetMode::Next;
    Index relax = 4;
    int ready_cap = FeaturizerSpec{}.ready_cap;  ///< ready-task count bucket limit
    bool real_exec = false;  ///< time tasks by running the factorization
    SimCostModel sim;
};

/// Offline training over a corpus, one matrix per episode in round-robin
/// order. Matrices whose analysis fails are skipped; their messages are
/// appended to `skipped`.
QTable train(const std::vector<CscMatrix>& corpus, const TrainOptions& opts,
             std::vector<std::string>* skipped = nullptr);

/// Greedy class over those realizable in `s`; unknown states fall back to Skip.
Action infer_policy(const QTable& q, const TaskTree& s, Index cores, Index idle);

class QTablePolicy final : public SchedulePolicy {
public:
    /// With `strict`, throws if the table was trained for a different core
    /// count; otherwise states never seen in training fall back to Skip.
    QTablePolicy(std::shared_ptr<const QTable> q, Index cores, bool strict = true);
    Action choose(const ScheduleRun& run) override;
    std::string name() const override { return "qtable"; }

private:
    std::shared_ptr<const QTable> q_;
};

inline constexpr const char* kQTableVersion = "ess-q1";

void save_qtable(const QTable& q, const std::filesystem::path& path);
std::string dump_qtable(const QTable& q);
/// Validates the version, the featurizer spec (against `expected` if given)
/// and every entry before returning.
QTable load_qtable(const std::filesystem::path& path, const FeaturizerSpec* expected = nullptr);
QTable parse_qtable(const std::string& text, const FeaturizerSpec* expected = nullptr);

}  // namespace ess
