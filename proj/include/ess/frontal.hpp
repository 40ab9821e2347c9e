// Dense partial LU of a frontal matrix with threshold partial pivoting.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <utility>
#include <vector>

#include "ess/sparse.hpp"

namespace ess {

/// Raised when no acceptable pivot exists in a frontal that cannot delay.
class SingularMatrixError : public Error {
public:
    SingularMatrixError(Index column, const std::string& what) : Error(what), column_(column) {}
    Index column() const { return column_; }

private:
    Index column_;
};

inline constexpr double kDefaultPivotTol = 1e-3;
inline constexpr double kPivotFloor = 1e-14;

enum class KernelVariant { Unblocked, Blocked };

/// Square frontal working matrix.
///
/// `rows` and `cols` hold the global indices of each local row and column.
/// The leading `fully_summed` rows and columns are eligible as pivots; the
/// rest receive the Schur-complement update.
template <typename Scalar>
struct FrontalMatrix {
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    std::vector<Index> rows;
    std::vector<Index> cols;
    Index fully_summed = 0;
    Matrix values;

    Index size() const { return static_cast<Index>(rows.size()); }
};

/// Eliminates as many fully summed columns as threshold pivoting allows.
///
/// A pivot a(r, c) with r, c fully summed is accepted when
/// |a(r, c)| >= pivot_tol * max_i |a(i, c)| over every row of the front and
/// |a(r, c)| > floor. The diagonal entry (rows[r] == cols[c]) is preferred,
/// then the largest fully summed entry of the column. Columns without an
/// acceptable pivot are skipped in favour of later fully summed columns.
///
/// On return the first `pivots` rows and columns (permuted in `front.rows`
/// and `front.cols` alike) hold L (unit diagonal implied) and U; the trailing
/// block is the Schur complement, whose fully summed part, if any, must be
/// delayed to the parent.
template <typename Scalar>
Index factor_frontal(FrontalMatrix<Scalar>& front, double pivot_tol = kDefaultPivotTol,
                     KernelVariant variant = KernelVariant::Blocked, double floor = kPivotFloor) {
    using std::abs;
    auto& a = front.values;
    const Index m = front.size();
    const Index k = front.fully_summed;
    if (a.rows() != m || a.cols() != m || static_cast<Index>(front.cols.size()) != m || k < 0 || k > m)
        throw Error("frontal matrix dimensions inconsistent");

    // Pivots update either the panel only (blocked) or the whole trailing matrix.
    const Index update_end = variant == KernelVariant::Blocked ? k : m;

    Index s = 0;
    for (; s < k; ++s) {
        Index piv_row = kNone, piv_col = kNone;
        for (Index c = s; c < k && piv_col == kNone; ++c) {
            const double colmax = static_cast<double>(a.col(c).tail(m - s).cwiseAbs().maxCoeff());
            if (!(colmax > floor)) continue;
            const double accept = pivot_tol * colmax;
            Index best = kNone;
            double best_mag = 0.0;
            for (Index r = s; r < k; ++r) {
                const double mag = static_cast<double>(abs(a(r, c)));
                if (front.rows[r] == front.cols[c] && mag >= accept && mag > floor) {
                    best = r;
                    best_mag = mag;
                    break;
                }
                if (mag > best_mag) {
                    best = r;
                    best_mag = mag;
                }
            }
            if (best != kNone && best_mag >= accept && best_mag > floor) {
                piv_row = best;
                piv_col = c;
            }
        }
        if (piv_col == kNone) break;

        if (piv_col != s) {
            a.col(s).swap(a.col(piv_col));
            std::swap(front.cols[s], front.cols[piv_col]);
        }
        if (piv_row != s) {
            a.row(s).swap(a.row(piv_row));
            std::swap(front.rows[s], front.rows[piv_row]);
        }

        const Index below = m - s - 1;
        const Index right = update_end - s - 1;
        a.col(s).tail(below) /= a(s, s);
        if (below > 0 && right > 0)
            a.block(s + 1, s + 1, below, right).noalias() -=
                a.col(s).tail(below) * a.row(s).segment(s + 1, right);
    }
    const Index pivots = s;

    if (variant == KernelVariant::Blocked && pivots > 0 && m > k) {
        const Index rest = m - k;
        a.block(0, k, pivots, rest) =
            a.topLeftCorner(pivots, pivots).template triangularView<Eigen::UnitLower>().solve(a.block(0, k, pivots, rest));
        a.bottomRightCorner(m - pivots, rest).noalias() -= a.block(pivots, 0, m - pivots, pivots) * a.block(0, k, pivots, rest);
    }
    return pivots;
}

}  // namespace ess
