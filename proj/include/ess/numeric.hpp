// Multifrontal numeric LU over a scheduled task tree, and triangular solves.
#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "ess/frontal.hpp"
#include "ess/schedule.hpp"
#include "ess/sparse.hpp"
#include "ess/symbolic.hpp"
#include "ess/taskmdp.hpp"

namespace ess {

/// Factor of one frontal. Indices are elimination positions.
struct FrontFactor {
    Index pivots = 0;
    std::vector<Index> rows;  ///< pivot rows first, then the rows passed to the parent
    std::vector<Index> cols;  ///< pivot columns first
    Eigen::MatrixXd lower;    ///< rows.size() x pivots, unit diagonal implied
    Eigen::MatrixXd upper;    ///< pivots x cols.size()
    /// Position of each trailing row / column in the parent's factor.
    std::vector<Index> parent_rows;
    std::vector<Index> parent_cols;
};

/// P A Q^T = L U, stored frontal by frontal.
struct LUFactors {
    Index n = 0;
    std::shared_ptr<const Symbolic> symbolic;
    std::vector<FrontFactor> fronts;
    Permutation row_perm;  ///< original row -> pivot step
    Permutation col_perm;  ///< original column -> pivot step
    TaskTree tasks;        ///< task partition the factorization ran with
    double pivot_tol = kDefaultPivotTol;
    KernelVariant variant = KernelVariant::Blocked;
    Index delayed_pivots = 0;  ///< pivots eliminated above their own frontal
    std::vector<Index> pattern_col_ptr;
    std::vector<Index> pattern_row_idx;

    /// Dense L and U in pivot-step order; for tests on small matrices.
    Eigen::MatrixXd dense_lower() const;
    Eigen::MatrixXd dense_upper() const;
};

struct FactorOptions {
    Index threads = 1;
    double pivot_tol = kDefaultPivotTol;
    KernelVariant variant = KernelVariant::Blocked;
    RewardWeights weights;
};

/// Factorizes `a` by running the frontal tree under `policy` on `threads`
/// worker threads. The coordinator is the calling thread. Factor values do
/// not depend on the policy or thread count.
std::pair<LUFactors, ScheduleTrace> parallel_factor(const CscMatrix& a, std::shared_ptr<const Symbolic> symbolic,
                                                    const TaskTree& t0, SchedulePolicy& policy,
                                                    const FactorOptions& opts = {});

/// Single-threaded reference: frontals in ascending order, no task tree.
LUFactors serial_factor(const CscMatrix& a, std::shared_ptr<const Symbolic> symbolic,
                        double pivot_tol = kDefaultPivotTol, KernelVariant variant = KernelVariant::Blocked);

/// Solves A x = b. With threads > 1 the forward and backward sweeps run the
/// factorization's tasks in parallel.
std::vector<double> solve(const LUFactors& lu, std::span<const double> b, Index threads = 1);

/// Numeric refactorization of a matrix with the analyzed pattern, reusing the
/// symbolic analysis and the recorded task partition.
LUFactors refactor_same_pattern(const LUFactors& lu, const CscMatrix& a2, Index threads = 1);

/// Backend whose tasks run the numeric factorization of their frontals on
/// worker threads. Used to train against real execution.
std::unique_ptr<ExecutionBackend> make_numeric_backend(const CscMatrix& a, std::shared_ptr<const Symbolic> symbolic,
                                                       Index threads, double pivot_tol = kDefaultPivotTol,
                                                       KernelVariant variant = KernelVariant::Blocked);

/// Raised by refactor_same_pattern when `a2` has a different pattern.
class PatternMismatchError : public Error {
public:
    PatternMismatchError(Index column, const std::string& what) : Error(what), column_(column) {}
    Index column() const { return column_; }

private:
    Index column_;
};

}  // namespace ess
