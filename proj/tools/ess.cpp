// ess: analyze | gen | train | factor | solve | bench
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ess/bench.hpp"
#include "ess/blocks.hpp"
#include "ess/matgen.hpp"
#include "ess/mmio.hpp"
#include "ess/numeric.hpp"
#include "ess/qlearn.hpp"
#include "ess/symbolic.hpp"
#include "ess/taskmdp.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace ess;

namespace {

std::vector<fs::path> corpus_files(const fs::path& dir) {
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".mtx") out.push_back(e.path());
    std::sort(out.begin(), out.end());
    if (out.empty()) throw Error("no .mtx files in " + dir.string());
    return out;
}

Ordering parse_order(const std::string& s) {
    if (s == "amd") return Ordering::MinDegree;
    if (s == "natural") return Ordering::Natural;
    throw Error("unknown ordering: " + s);
}

struct WeightFlags {
    RewardWeights w;
    void add(CLI::App* app) {
        app->add_option("--w-time", w.w_time, "reward weight per second");
        app->add_option("--w-mem", w.w_mem, "reward weight per byte");
        app->add_option("--w-balance", w.w_balance, "reward weight for imbalance");
    }
};

struct FactorFlags {
    Index threads = 1;
    std::string qtable;
    std::string policy = "static";
    double pivot_tol = kDefaultPivotTol;
    Index relax = 4;
    std::string order = "amd";
    WeightFlags weights;

    void add(CLI::App* app) {
        app->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
        auto* q = app->add_option("--qtable", qtable, "trained Q table");
        app->add_option("--policy", policy, "serial or static")
            ->check(CLI::IsMember({"serial", "static"}))
            ->excludes(q);
        app->add_option("--pivot-tol", pivot_tol, "threshold pivoting tolerance");
        app->add_option("--relax", relax, "frontal merge slack");
        app->add_option("--order", order, "amd or natural")->check(CLI::IsMember({"amd", "natural"}));
        weights.add(app);
    }

    std::unique_ptr<SchedulePolicy> make() const {
        if (!qtable.empty()) {
            FeaturizerSpec expect;
            expect.cores = static_cast<int>(threads);
            auto q = std::make_shared<const QTable>(load_qtable(qtable, &expect));
            return make_policy("qtable", threads, q);
        }
        return make_policy(policy, threads);
    }

    std::pair<LUFactors, ScheduleTrace> run(const CscMatrix& a) const {
        AnalyzeOptions ao;
        ao.ordering = parse_order(order);
        ao.relax = relax;
        auto sym = std::make_shared<const Symbolic>(analyze(a, ao));
        auto pol = make();
        FactorOptions fo;
        fo.threads = threads;
        fo.pivot_tol = pivot_tol;
        fo.weights = weights.w;
        return parallel_factor(a, sym, build_task_tree(*sym), *pol, fo);
    }
};

int cmd_analyze(const std::string& path, const std::string& order, Index relax, const std::string& json_out,
                bool blocks, Index border) {
    const CscMatrix a = load_matrix_market(path);
    AnalyzeOptions ao;
    ao.ordering = parse_order(order);
    ao.relax = relax;
    const Symbolic s = analyze(a, ao);
    const TaskTree t = build_task_tree(s);
    Index frontal_height = 0;
    std::vector<Index> depth(t.size(), 0);
    for (Index v = t.size() - 1; v >= 0; --v) {
        if (t.parent(v) != kNone) depth[v] = depth[t.parent(v)] + 1;
        frontal_height = std::max(frontal_height, depth[v]);
    }
    const Index fill = fill_count(s.pattern, s.fill);

    std::printf("n               %td\n", a.n());
    std::printf("nnz             %td\n", a.nnz());
    std::printf("fill            %td\n", fill);
    std::printf("frontals        %td\n", s.frontals.count());
    std::printf("etree height    %td\n", s.etree.height());
    std::printf("frontal height  %td\n", frontal_height);
    std::printf("frontal  columns  rows  workload\n");
    for (Index f = 0; f < s.frontals.count(); ++f)
        std::printf("%7td %8zu %5zu %9.0f\n", f, s.frontals.frontals[f].size(), s.rows[f].size(), t.workload(f));

    nlohmann::json j;
    j["n"] = a.n();
    j["nnz"] = a.nnz();
    j["fill"] = fill;
    j["etree_height"] = s.etree.height();
    j["frontal_height"] = frontal_height;
    j["order"] = s.order.perm();
    j["etree_parent"] = s.etree.parent;
    j["frontals"] = s.frontals.frontals;
    j["frontal_parent"] = s.parent;
    std::vector<double> work;
    for (Index f = 0; f < s.frontals.count(); ++f) work.push_back(t.workload(f));
    j["workload"] = work;

    if (blocks) {
        const BlockMap m = find_diagonal_blocks(a, border);
        const ReusePlan plan = reuse_plan(a, m);
        const Symbolic bs = analyze_blocks(a, m, &plan, relax);
        const double ratio = plan.groups.empty() ? 0.0 : static_cast<double>(m.blocks.size()) / plan.groups.size();
        std::printf("blocks          %zu\n", m.blocks.size());
        std::printf("groups          %zu\n", plan.groups.size());
        std::printf("reuse ratio     %.2f\n", ratio);
        std::printf("block analyses  %td\n", bs.block_analyses);
        j["blocks"] = m.blocks.size();
        j["groups"] = plan.groups.size();
        j["reuse_ratio"] = ratio;
        j["block_analyses"] = bs.block_analyses;
    }
    if (!json_out.empty()) {
        std::ofstream out(json_out);
        if (!out) throw Error("cannot write " + json_out);
        out << j.dump(1) << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multifrontal sparse LU with learned task-tree scheduling"};
    app.require_subcommand(1);

    // analyze
    auto* an = app.add_subcommand("analyze", "symbolic analysis report");
    std::string an_path, an_order = "amd", an_json;
    Index an_relax = 4, an_border = 0;
    bool an_blocks = false;
    an->add_option("matrix", an_path)->required()->check(CLI::ExistingFile);
    an->add_option("--order", an_order)->check(CLI::IsMember({"amd", "natural"}));
    an->add_option("--relax", an_relax)->check(CLI::NonNegativeNumber);
    an->add_option("--json", an_json);
    an->add_flag("--blocks", an_blocks);
    an->add_option("--border", an_border)->check(CLI::NonNegativeNumber);

    // gen
    auto* gen = app.add_subcommand("gen", "generate a synthetic matrix");
    std::string gen_spec, gen_out, gen_blockmap;
    std::optional<std::uint64_t> gen_seed;
    gen->add_option("--templates", gen_spec)->required()->check(CLI::ExistingFile);
    gen->add_option("--out", gen_out)->required();
    gen->add_option("--blockmap", gen_blockmap);
    gen->add_option("--seed", gen_seed, "overrides the seed in the spec");

    // train
    auto* tr = app.add_subcommand("train", "offline Q-learning over a corpus");
    std::string tr_corpus, tr_out, tr_target = "next";
    TrainOptions topt;
    bool tr_real = false;
    WeightFlags tr_w;
    tr->add_option("--corpus", tr_corpus)->required()->check(CLI::ExistingDirectory);
    tr->add_option("--episodes", topt.episodes)->check(CLI::PositiveNumber);
    tr->add_option("--alpha", topt.hyper.alpha);
    tr->add_option("--gamma", topt.hyper.gamma);
    tr->add_option("--epsilon", topt.hyper.epsilon);
    tr->add_option("--seed", topt.seed);
    tr->add_option("--threads", topt.cores)->check(CLI::PositiveNumber);
    tr->add_option("--relax", topt.relax);
    tr->add_option("--ready-cap", topt.ready_cap, "ready-task count bucket limit")->check(CLI::PositiveNumber);
    tr->add_option("--out", tr_out)->required();
    tr->add_option("--target", tr_target)->check(CLI::IsMember({"next", "max", "return"}));
    tr->add_flag("--real-exec", tr_real);
    tr_w.add(tr);

    // factor
    auto* fa = app.add_subcommand("factor", "numeric factorization");
    std::string fa_path, fa_trace;
    FactorFlags fa_f;
    fa->add_option("matrix", fa_path)->required()->check(CLI::ExistingFile);
    fa->add_option("--trace", fa_trace);
    fa_f.add(fa);

    // solve
    auto* so = app.add_subcommand("solve", "factor and solve A x = b");
    std::string so_path, so_rhs, so_out;
    FactorFlags so_f;
    so->add_option("matrix", so_path)->required()->check(CLI::ExistingFile);
    so->add_option("--rhs", so_rhs)->required()->check(CLI::ExistingFile);
    so->add_option("--out", so_out)->required();
    so_f.add(so);

    // bench
    auto* be = app.add_subcommand("bench", "timing table over a corpus");
    std::string be_corpus, be_q, be_out;
    std::vector<Index> be_threads{1, 2, 4};
    std::vector<std::string> be_policies{"serial", "static"};
    Index be_repeats = 5;
    be->add_option("--corpus", be_corpus)->required()->check(CLI::ExistingDirectory);
    be->add_option("--threads", be_threads)->delimiter(',');
    be->add_option("--policies", be_policies)->delimiter(',')->check(CLI::IsMember({"serial", "static", "qtable"}));
    be->add_option("--qtable", be_q);
    be->add_option("--repeats", be_repeats)->check(CLI::Range(3, 1000));
    be->add_option("--out", be_out);

    CLI11_PARSE(app, argc, argv);

    try {
        if (an->parsed()) return cmd_analyze(an_path, an_order, an_relax, an_json, an_blocks, an_border);

        if (gen->parsed()) {
            GenSpec spec = load_gen_spec(gen_spec);
            if (gen_seed) spec.seed = *gen_seed;
            const Generated g = generate(spec);
            save_matrix_market(g.matrix, gen_out);
            if (!gen_blockmap.empty()) {
                std::ofstream out(gen_blockmap);
                if (!out) throw Error("cannot write " + gen_blockmap);
                out << blockmap_json(g.blocks);
            }
            std::printf("wrote %s: n=%td nnz=%td blocks=%zu\n", gen_out.c_str(), g.matrix.n(), g.matrix.nnz(),
                        g.blocks.blocks.size());
            return 0;
        }

        if (tr->parsed()) {
            std::vector<CscMatrix> corpus;
            for (const auto& p : corpus_files(tr_corpus)) corpus.push_back(load_matrix_market(p));
            topt.real_exec = tr_real;
            topt.target = target_mode_from_string(tr_target);
            topt.weights = tr_w.w;
            std::vector<std::string> skipped;
            const QTable q = train(corpus, topt, &skipped);
            for (const auto& s : skipped) std::fprintf(stderr, "skipped %s\n", s.c_str());
            save_qtable(q, tr_out);
            std::printf("trained %td episodes on %zu matrices, %zu entries -> %s\n", topt.episodes, corpus.size(),
                        q.entries.size(), tr_out.c_str());
            return 0;
        }

        if (fa->parsed()) {
            const CscMatrix a = load_matrix_market(fa_path);
            const auto t0 = std::chrono::steady_clock::now();
            auto [lu, trace] = fa_f.run(a);
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            if (!fa_trace.empty()) write_trace_csv(trace, fa_trace);
            std::printf("n=%td frontals=%zu tasks=%zu delayed=%td time=%.6fs makespan=%.6fs\n", a.n(), lu.fronts.size(),
                        trace.rows.size(), lu.delayed_pivots, secs, trace.makespan_s);
            return 0;
        }

        if (so->parsed()) {
            const CscMatrix a = load_matrix_market(so_path);
            const auto b = load_vector(so_rhs);
            auto [lu, trace] = so_f.run(a);
            const auto x = solve(lu, b, so_f.threads);
            save_vector(x, so_out);
            std::printf("residual=%.3e\n", residual_norm(a, x, b));
            return 0;
        }

        if (be->parsed()) {
            std::vector<NamedMatrix> corpus;
            for (const auto& p : corpus_files(be_corpus)) corpus.push_back({p.filename().string(), load_matrix_market(p)});
            BenchOptions bo;
            bo.threads = be_threads;
            bo.policies = be_policies;
            bo.repeats = be_repeats;
            if (!be_q.empty()) bo.qtable = std::make_shared<const QTable>(load_qtable(be_q));
            const BenchReport rep = bench(corpus, bo);
            std::fputs(bench_table(rep).c_str(), stdout);
            if (!be_out.empty()) write_bench_csv(rep, be_out);
            if (!rep.all_valid()) {
                std::fprintf(stderr, "residual check failed\n");
                return 3;
            }
            return 0;
        }
    } catch (const SingularMatrixError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
