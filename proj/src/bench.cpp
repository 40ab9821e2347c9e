#include "ess/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "ess/numeric.hpp"
#include "ess/symbolic.hpp"

namespace ess {

std::unique_ptr<SchedulePolicy> make_policy(const std::string& name, Index threads, std::shared_ptr<const QTable> q,
                                            bool strict) {
    if (name == "serial") return std::make_unique<SerialPolicy>();
    if (name == "static") return std::make_unique<StaticPolicy>();
    if (name == "qtable") {
        if (!q) throw Error("policy qtable needs a Q table");
        return std::make_unique<QTablePolicy>(std::move(q), threads, strict);
    }
    throw Error("unknown policy: " + name);
}

bool BenchReport::all_valid() const {
    return std::all_of(rows.begin(), rows.end(), [](const BenchRow& r) { return r.valid; });
}

namespace {

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

struct Measured {
    double factor_s, solve_s, residual, peak;
};

Measured measure(const CscMatrix& a, const std::shared_ptr<const Symbolic>& sym, const TaskTree& t0,
                 const std::vector<double>& b, Index threads, const std::string& policy,
                 const BenchOptions& opts) {
    std::vector<double> ft, st;
    double worst = 0.0, peak = 0.0;
    for (Index r = 0; r < opts.repeats; ++r) {
        auto pol = make_policy(policy, threads, opts.qtable, false);
        FactorOptions fo;
        fo.threads = threads;
        const auto t0c = std::chrono::steady_clock::now();
        auto [lu, trace] = parallel_factor(a, sym, t0, *pol, fo);
        const auto t1c = std::chrono::steady_clock::now();
        const auto x = solve(lu, b, threads);
        const auto t2c = std::chrono::steady_clock::now();
        ft.push_back(std::chrono::duration<double>(t1c - t0c).count());
        st.push_back(std::chrono::duration<double>(t2c - t1c).count());
        worst = std::max(worst, residual_norm(a, x, b));
        for (const auto& row : trace.rows) peak = std::max(peak, row.peak_bytes);
    }
    return {median(ft), median(st), worst, peak};
}

}  // namespace

BenchReport bench(const std::vector<NamedMatrix>& corpus, const BenchOptions& opts) {
    if (corpus.empty()) throw Error("bench corpus is empty");
    if (opts.repeats < 3) throw Error("at least 3 repeats are required");
    BenchReport rep;
    for (const auto& [name, a] : corpus) {
        AnalyzeOptions ao;
        ao.relax = opts.relax;
        auto sym = std::make_shared<const Symbolic>(analyze(a, ao));
        const TaskTree t0 = build_task_tree(*sym);
        std::mt19937_64 rng(opts.rhs_seed);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        std::vector<double> b(a.n());
        for (auto& v : b) v = u(rng);

        const Measured base = measure(a, sym, t0, b, 1, "serial", opts);
        for (Index th : opts.threads)
            for (const auto& pol : opts.policies) {
                const Measured m = (th == 1 && pol == "serial") ? base : measure(a, sym, t0, b, th, pol, opts);
                BenchRow row;
                row.matrix = name;
                row.n = a.n();
                row.nnz = a.nnz();
                row.threads = th;
                row.policy = pol;
                row.factor_time_s = m.factor_s;
                row.solve_time_s = m.solve_s;
                row.residual = m.residual;
                row.speedup_vs_serial = m.factor_s > 0.0 ? base.factor_s / m.factor_s : 0.0;
                row.solve_speedup_vs_serial = m.solve_s > 0.0 ? base.solve_s / m.solve_s : 0.0;
                row.peak_bytes = m.peak;
                row.valid = m.residual <= opts.residual_limit;
                rep.rows.push_back(row);
            }
    }
    return rep;
}

void write_bench_csv(const BenchReport& r, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << "matrix,n,nnz,threads,policy,factor_time_s,solve_time_s,residual,speedup_vs_serial,"
           "solve_speedup_vs_serial,peak_bytes,valid\n";
    char buf[512];
    for (const auto& x : r.rows) {
        std::snprintf(buf, sizeof buf, "%s,%td,%td,%td,%s,%.9g,%.9g,%.3e,%.4f,%.4f,%.0f,%d\n", x.matrix.c_str(), x.n,
                      x.nnz, x.threads, x.policy.c_str(), x.factor_time_s, x.solve_time_s, x.residual,
                      x.speedup_vs_serial, x.solve_speedup_vs_serial, x.peak_bytes, x.valid ? 1 : 0);
        out << buf;
    }
}

std::string bench_table(const BenchReport& r) {
    std::ostringstream out;
    char buf[512];
    std::snprintf(buf, sizeof buf, "%-24s %8s %7s %-8s %12s %12s %10s %8s %8s %s\n", "matrix", "n", "threads", "policy",
                  "factor_s", "solve_s", "residual", "speedup", "solve_x", "");
    out << buf;
    for (const auto& x : r.rows) {
        std::snprintf(buf, sizeof buf, "%-24s %8td %7td %-8s %12.6f %12.6f %10.2e %8.2f %8.2f %s\n", x.matrix.c_str(),
                      x.n, x.threads, x.policy.c_str(), x.factor_time_s, x.solve_time_s, x.residual,
                      x.speedup_vs_serial, x.solve_speedup_vs_serial, x.valid ? "" : "RESIDUAL FAIL");
        out << buf;
    }
    return out.str();
}

}  // namespace ess
