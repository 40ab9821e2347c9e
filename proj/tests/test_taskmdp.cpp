#include <algorithm>
#include <random>
#include <set>

#include "doctest.h"
#include "ess/schedule.hpp"
#include "ess/taskmdp.hpp"
#include "oracles.hpp"

using namespace ess;
using namespace oracle;

namespace {
TaskTree example_tree() {
    auto ex = example11();
    return build_task_tree(analyze_with_order(ex.a, ex.order, 0));
}

Action del(std::vector<Index> e) {
    std::sort(e.begin(), e.end());
    return {ActionKind::Delete, e};
}
Action add(std::vector<Index> e) {
    std::sort(e.begin(), e.end());
    return {ActionKind::Add, e};
}

std::set<std::set<Index>> ready_sets(const TaskTree& t) {
    std::set<std::set<Index>> out;
    for (Index top : t.ready_tasks()) {
        auto n = t.task_nodes(top);
        out.insert(std::set<Index>(n.begin(), n.end()));
    }
    return out;
}
}  // namespace

TEST_CASE("single node tree offers only skip") {
    TaskTree t({kNone}, {5.0});
    auto acts = enumerate_actions(t, 4);
    REQUIRE(acts.size() == 1);
    CHECK(acts[0].kind == ActionKind::Skip);
}

TEST_CASE("example: delete candidates at T0 include the two root edges") {
    auto t = example_tree();
    auto acts = enumerate_actions(t, 2);
    CHECK(std::find(acts.begin(), acts.end(), del({kEdgeA, kEdgeB})) != acts.end());
    auto r = realize(t, 2, ActionClass::Delete2);
    REQUIRE(r);
    CHECK(*r == del({kEdgeA, kEdgeB}));
}

TEST_CASE("example: T2 + add c,d then delete a is T1") {
    auto t0 = example_tree();
    auto t1 = apply_action(t0, del({kEdgeA, kEdgeB}));
    auto t2 = apply_action(t0, del({kEdgeB, kEdgeC, kEdgeD}));
    auto back = apply_action(apply_action(t2, add({kEdgeC, kEdgeD})), del({kEdgeA}));
    CHECK(back == t1);
    CHECK(apply_action(t1, Action::skip()) == t1);
}

TEST_CASE("example: add candidates at T3 re-attach {1} and {4}") {
    auto t3 = apply_action(example_tree(), del({kEdgeC, kEdgeD, kEdgeE, kEdgeF}));
    auto acts = enumerate_actions(t3, 4);
    CHECK(std::find(acts.begin(), acts.end(), add({kEdgeE, kEdgeF})) != acts.end());
    auto merged = apply_action(t3, add({kEdgeE, kEdgeF}));
    auto top = merged.task_top();
    CHECK(top[0] == top[4]);
    CHECK(top[2] == top[4]);
}

TEST_CASE("illegal actions are rejected") {
    auto t = example_tree();
    CHECK_THROWS_AS(apply_action(t, add({kEdgeA})), Error);
    CHECK_THROWS_AS(apply_action(t, del({7})), Error);   // root has no edge
    CHECK_THROWS_AS(apply_action(t, del({42})), Error);
    auto t1 = apply_action(t, del({kEdgeA}));
    CHECK_THROWS_AS(apply_action(t1, del({kEdgeA})), Error);
}

TEST_CASE("k cuts give k+1 tasks; delete then add restores the state") {
    std::mt19937_64 rng(5);
    auto t0 = example_tree();
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<Index> edges;
        for (Index v = 0; v < 7; ++v)
            if (rng() % 2) edges.push_back(v);
        if (edges.empty()) continue;
        auto t = apply_action(t0, del(edges));
        CHECK(static_cast<Index>(t.task_tops().size()) == static_cast<Index>(edges.size()) + 1);
        t.check_invariants();
        CHECK(apply_action(t, add(edges)) == t0);
    }
}

TEST_CASE("random action sequences keep dependency safety") {
    std::mt19937_64 rng(17);
    auto t0 = example_tree();
    for (int trial = 0; trial < 30; ++trial) {
        SimulatedBackend be(t0, {}, {});
        ScheduleRun run(t0, 3, be, {});
        while (!run.finished()) {
            auto acts = enumerate_actions(run.tree(), 3);
            run.step(acts[rng() % acts.size()]);
            run.tree().check_invariants();
        }
        // every task ends after the tasks below it
        const auto& rows = run.trace().rows;
        std::vector<double> end_of(8, -1.0), start_of(8, -1.0);
        for (const auto& r : rows)
            for (Index f : r.frontals) {
                end_of[f] = r.t_end_us;
                start_of[f] = r.t_start_us;
            }
        for (Index v = 0; v < 7; ++v) CHECK(end_of[v] <= end_of[t0.parent(v)]);
        for (const auto& r : rows)
            for (Index f : r.frontals)
                for (Index c : t0.children(f))
                    if (std::find(r.frontals.begin(), r.frontals.end(), c) == r.frontals.end())
                        CHECK(end_of[c] <= start_of[f]);
    }
}

TEST_CASE("tie-breaking among equal workloads is by smaller id") {
    // star: root 4 with four equal leaves
    TaskTree t({4, 4, 4, 4, kNone}, {1, 1, 1, 1, 1});
    auto d1 = realize(t, 4, ActionClass::Delete1);
    REQUIRE(d1);
    CHECK(d1->edges == std::vector<Index>{0});
    auto d3 = realize(t, 4, ActionClass::Delete3);
    CHECK(d3->edges == std::vector<Index>{0, 1, 2});
}

TEST_CASE("reward") {
    RewardWeights w{1.0, 0.0, 0.0};
    CHECK(reward({0.0, 0.0, {1.0, 1.0}}, w) == 0.0);
    CHECK(reward({1.0, 0.0, {1.0}}, w) == -1.0);
    RewardWeights wb{0.0, 0.0, 1.0};
    // 1 - mean/max = 1 - 0.75
    CHECK(reward({0.0, 0.0, {1.0, 0.5}}, wb) == doctest::Approx(-0.25));
    CHECK_THROWS_AS(reward({0.0, 0.0, {}}, wb), Error);
}

TEST_CASE("featurize") {
    auto t = example_tree();
    // terminal
    auto done = t;
    done.mark_started(done.root());
    done.mark_done(done.root());
    auto k = featurize(done, 4, 4);
    CHECK(k.ready == 0);
    CHECK(k.remaining == 0);

    // T3 with equal workloads: four equal ready tasks
    std::vector<Index> parent;
    for (Index v = 0; v < t.size(); ++v) parent.push_back(t.parent(v));
    TaskTree eq(parent, std::vector<double>(8, 1.0));
    apply_action_in_place(eq, del({kEdgeC, kEdgeD, kEdgeE, kEdgeF}));
    CHECK(eq.ready_tasks().size() == 4);
    auto k3 = featurize(eq, 4, 4);
    CHECK(k3 == StateKey{3, 4, 0, 3});
    CHECK(featurize(eq, 4, 4) == k3);
}
