#include "ess/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ess {

CscMatrix::CscMatrix(Index n, std::vector<Index> col_ptr, std::vector<Index> row_idx,
                     std::vector<double> values)
    : n_(n), col_ptr_(std::move(col_ptr)), row_idx_(std::move(row_idx)), values_(std::move(values)) {
    check_invariants();
}

CscMatrix CscMatrix::from_triplets(Index n, std::span<const Triplet> entries) {
    if (n < 0) throw Error("negative dimension");
    std::vector<Index> count(n + 1, 0);
    for (const auto& t : entries) {
        if (t.row < 0 || t.row >= n || t.col < 0 || t.col >= n)
            throw Error("triplet (" + std::to_string(t.row) + ", " + std::to_string(t.col) +
                        ") outside " + std::to_string(n) + "x" + std::to_string(n));
        ++count[t.col + 1];
    }
    std::partial_sum(count.begin(), count.end(), count.begin());

    std::vector<Index> rows(entries.size());
    std::vector<double> vals(entries.size());
    std::vector<Index> next(count.begin(), count.end() - 1);
    for (const auto& t : entries) {
        Index p = next[t.col]++;
        rows[p] = t.row;
        vals[p] = t.value;
    }

    // Sort each column by row and sum duplicates while compacting.
    CscMatrix m;
    m.n_ = n;
    m.col_ptr_.assign(n + 1, 0);
    m.row_idx_.reserve(rows.size());
    m.values_.reserve(rows.size());
    std::vector<std::pair<Index, double>> col;
    for (Index j = 0; j < n; ++j) {
        col.clear();
        for (Index p = count[j]; p < count[j + 1]; ++p) col.emplace_back(rows[p], vals[p]);
        std::stable_sort(col.begin(), col.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        for (const auto& [r, v] : col) {
            if (static_cast<Index>(m.row_idx_.size()) > m.col_ptr_[j] && m.row_idx_.back() == r)
                m.values_.back() += v;
            else {
                m.row_idx_.push_back(r);
                m.values_.push_back(v);
            }
        }
        m.col_ptr_[j + 1] = static_cast<Index>(m.row_idx_.size());
    }
    return m;
}

CscMatrix CscMatrix::identity(Index n) {
    std::vector<Index> cp(n + 1), ri(n);
    std::iota(cp.begin(), cp.end(), Index{0});
    std::iota(ri.begin(), ri.end(), Index{0});
    return CscMatrix(n, std::move(cp), std::move(ri), std::vector<double>(n, 1.0));
}

double CscMatrix::coeff(Index i, Index j) const {
    auto rows = col_rows(j);
    auto it = std::lower_bound(rows.begin(), rows.end(), i);
    if (it == rows.end() || *it != i) return 0.0;
    return values_[col_ptr_[j] + (it - rows.begin())];
}

void CscMatrix::check_invariants() const {
    if (n_ < 0) throw Error("negative dimension");
    if (static_cast<Index>(col_ptr_.size()) != n_ + 1) throw Error("col_ptr length must be n+1");
    if (col_ptr_[0] != 0) throw Error("col_ptr[0] must be 0");
    if (col_ptr_[n_] != static_cast<Index>(row_idx_.size())) throw Error("col_ptr[n] must equal nnz");
    if (row_idx_.size() != values_.size()) throw Error("row_idx and values lengths differ");
    for (Index j = 0; j < n_; ++j) {
        if (col_ptr_[j + 1] < col_ptr_[j]) throw Error("col_ptr must be nondecreasing");
        for (Index p = col_ptr_[j]; p < col_ptr_[j + 1]; ++p) {
            if (row_idx_[p] < 0 || row_idx_[p] >= n_)
                throw Error("row index out of range in column " + std::to_string(j));
            if (p > col_ptr_[j] && row_idx_[p] <= row_idx_[p - 1])
                throw Error("row indices not strictly increasing in column " + std::to_string(j));
        }
    }
}

std::vector<CscMatrix::Triplet> CscMatrix::triplets() const {
    std::vector<Triplet> out;
    out.reserve(row_idx_.size());
    for (Index j = 0; j < n_; ++j)
        for (Index p = col_ptr_[j]; p < col_ptr_[j + 1]; ++p) out.push_back({row_idx_[p], j, values_[p]});
    return out;
}

bool operator==(const CscMatrix& a, const CscMatrix& b) {
    return a.same_pattern(b) && a.values() == b.values();
}

Permutation::Permutation(std::vector<Index> perm) : perm_(std::move(perm)), inverse_(perm_.size(), kNone) {
    const Index n = size();
    for (Index i = 0; i < n; ++i) {
        Index k = perm_[i];
        if (k < 0 || k >= n || inverse_[k] != kNone) throw Error("not a permutation");
        inverse_[k] = i;
    }
}

Permutation Permutation::identity(Index n) {
    std::vector<Index> p(n);
    std::iota(p.begin(), p.end(), Index{0});
    return Permutation(std::move(p));
}

Permutation Permutation::from_order(std::span<const Index> order) {
    std::vector<Index> p(order.size(), kNone);
    for (std::size_t k = 0; k < order.size(); ++k) {
        Index i = order[k];
        if (i < 0 || i >= static_cast<Index>(order.size())) throw Error("not a permutation");
        p[i] = static_cast<Index>(k);
    }
    return Permutation(std::move(p));
}

CscMatrix permute(const CscMatrix& a, const Permutation& p, const Permutation& q) {
    if (p.size() != a.n() || q.size() != a.n()) throw Error("permutation length does not match matrix");
    auto entries = a.triplets();
    for (auto& t : entries) {
        t.row = p[t.row];
        t.col = q[t.col];
    }
    return CscMatrix::from_triplets(a.n(), entries);
}

CscMatrix symmetrize_pattern(const CscMatrix& a) {
    std::vector<CscMatrix::Triplet> entries;
    entries.reserve(2 * a.nnz() + a.n());
    for (Index j = 0; j < a.n(); ++j) {
        entries.push_back({j, j, 1.0});
        for (Index i : a.col_rows(j)) {
            if (i == j) continue;
            entries.push_back({i, j, 1.0});
            entries.push_back({j, i, 1.0});
        }
    }
    CscMatrix s = CscMatrix::from_triplets(a.n(), entries);
    std::fill(s.values().begin(), s.values().end(), 1.0);
    return s;
}

std::vector<double> multiply(const CscMatrix& a, std::span<const double> x) {
    if (static_cast<Index>(x.size()) != a.n()) throw Error("vector length does not match matrix");
    std::vector<double> y(a.n(), 0.0);
    for (Index j = 0; j < a.n(); ++j) {
        auto rows = a.col_rows(j);
        auto vals = a.col_values(j);
        for (std::size_t p = 0; p < rows.size(); ++p) y[rows[p]] += vals[p] * x[j];
    }
    return y;
}

double norm_inf(const CscMatrix& a) {
    std::vector<double> rowsum(a.n(), 0.0);
    for (Index j = 0; j < a.n(); ++j) {
        auto rows = a.col_rows(j);
        auto vals = a.col_values(j);
        for (std::size_t p = 0; p < rows.size(); ++p) rowsum[rows[p]] += std::abs(vals[p]);
    }
    return rowsum.empty() ? 0.0 : *std::max_element(rowsum.begin(), rowsum.end());
}

namespace {
double vec_norm_inf(std::span<const double> v) {
    double m = 0.0;
    for (double e : v) m = std::max(m, std::abs(e));
    return m;
}
}  // namespace

double residual_norm(const CscMatrix& a, std::span<const double> x, std::span<const double> b) {
    if (static_cast<Index>(x.size()) != a.n() || static_cast<Index>(b.size()) != a.n())
        throw Error("vector length does not match matrix");
    auto r = multiply(a, x);
    for (Index i = 0; i < a.n(); ++i) r[i] -= b[i];
    const double num = vec_norm_inf(r);
    if (num == 0.0) return 0.0;
    return num / (norm_inf(a) * vec_norm_inf(x) + vec_norm_inf(b));
}

}  // namespace ess
