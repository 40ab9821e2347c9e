// Timing harness: factor and solve under several policies and thread counts.
#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "ess/qlearn.hpp"
#include "ess/schedule.hpp"
#include "ess/sparse.hpp"

namespace ess {

/// "serial", "static" or "qtable" (needs `q`).
std::unique_ptr<SchedulePolicy> make_policy(const std::string& name, Index threads,
                                            std::shared_ptr<const QTable> q = nullptr, bool strict = true);

struct BenchRow {
    std::string matrix;
    Index n = 0;
    Index nnz = 0;
    Index threads = 1;
    std::string policy;
    double factor_time_s = 0.0;  ///< median
    double solve_time_s = 0.0;   ///< median
    double residual = 0.0;       ///< worst over repeats
    double speedup_vs_serial = 0.0;
    double solve_speedup_vs_serial = 0.0;
    double peak_bytes = 0.0;
    bool valid = true;
};

struct BenchReport {
    std::vector<BenchRow> rows;
    bool all_valid() const;
};

struct BenchOptions {
    std::vector<Index> threads{1, 2, 4};
    std::vector<std::string> policies{"serial", "static"};
    std::shared_ptr<const QTable> qtable;
    Index repeats = 5;
    double residual_limit = 1e-10;
    std::uint64_t rhs_seed = 7;
    Index relax = 4;
};

struct NamedMatrix {
    std::string name;
    CscMatrix matrix;
};

/// Every configuration is timed `repeats` times; the serial one-thread run
/// of each matrix is always measured and is the speedup reference.
BenchReport bench(const std::vector<NamedMatrix>& corpus, const BenchOptions& opts);

void write_bench_csv(const BenchReport& r, const std::filesystem::path& path);
std::string bench_table(const BenchReport& r);

}  // namespace ess
