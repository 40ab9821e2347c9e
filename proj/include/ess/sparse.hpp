// Compressed sparse column storage, permutations and residual utilities.
#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ess {

using Index = std::ptrdiff_t;

inline constexpr Index kNone = -1;

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A square sparse matrix in compressed sparse column form.
///
/// Row indices are strictly increasing within each column. Construction
/// through `from_triplets` sums duplicates and sorts; the raw constructor
/// validates its arguments.
class CscMatrix {
public:
    CscMatrix() = default;
    CscMatrix(Index n, std::vector<Index> col_ptr, std::vector<Index> row_idx,
              std::vector<double> values);

    struct Triplet {
        Index row;
        Index col;
        double value;
    };

    /// Builds a matrix from coordinate entries; duplicates are summed.
    static CscMatrix from_triplets(Index n, std::span<const Triplet> entries);
    static CscMatrix identity(Index n);

    Index n() const { return n_; }
    Index nnz() const { return static_cast<Index>(row_idx_.size()); }

    const std::vector<Index>& col_ptr() const { return col_ptr_; }
    const std::vector<Index>& row_idx() const { return row_idx_; }
    const std::vector<double>& values() const { return values_; }
    std::vector<double>& values() { return values_; }

    std::span<const Index> col_rows(Index j) const {
        return {row_idx_.data() + col_ptr_[j], row_idx_.data() + col_ptr_[j + 1]};
    }
    std::span<const double> col_values(Index j) const {
        return {values_.data() + col_ptr_[j], values_.data() + col_ptr_[j + 1]};
    }

    /// Value at (i, j), zero when not stored.
    double coeff(Index i, Index j) const;

    /// Throws `Error` when any structural invariant is violated.
    void check_invariants() const;

    bool same_pattern(const CscMatrix& other) const {
        return n_ == other.n_ && col_ptr_ == other.col_ptr_ && row_idx_ == other.row_idx_;
    }

    std::vector<Triplet> triplets() const;

private:
    Index n_ = 0;
    std::vector<Index> col_ptr_{0};
    std::vector<Index> row_idx_;
    std::vector<double> values_;
};

bool operator==(const CscMatrix& a, const CscMatrix& b);

/// A bijection on [0, n) stored together with its inverse.
///
/// `perm[i]` is the new position of old index `i`; `inverse[k]` is the old
/// index that lands on position `k`.
class Permutation {
public:
    Permutation() = default;
    explicit Permutation(std::vector<Index> perm);

    static Permutation identity(Index n);
    /// Builds the permutation that places `order[k]` at position `k`.
    static Permutation from_order(std::span<const Index> order);

    Index size() const { return static_cast<Index>(perm_.size()); }
    Index operator[](Index i) const { return perm_[i]; }
    const std::vector<Index>& perm() const { return perm_; }
    const std::vector<Index>& inverse() const { return inverse_; }
    Permutation inverted() const { return Permutation(inverse_); }

    friend bool operator==(const Permutation&, const Permutation&) = default;

private:
    std::vector<Index> perm_;
    std::vector<Index> inverse_;
};

/// B with B[p[i]][q[j]] = A[i][j].
CscMatrix permute(const CscMatrix& a, const Permutation& p, const Permutation& q);

/// Pattern of A + A^T with unit values; the diagonal is always present.
CscMatrix symmetrize_pattern(const CscMatrix& a);

/// y = A x
std::vector<double> multiply(const CscMatrix& a, std::span<const double> x);

/// Infinity norm (maximum absolute row sum).
double norm_inf(const CscMatrix& a);

/// ||Ax - b||_inf / (||A||_inf ||x||_inf + ||b||_inf), zero for an exact solve.
double residual_norm(const CscMatrix& a, std::span<const double> x, std::span<const double> b);

}  // namespace ess
