// Symbolic analysis: fill-reducing ordering, elimination tree, fill pattern
// and frontal (supernode) detection.
#pragma once

#include <vector>

#include "ess/sparse.hpp"

namespace ess {

/// Column elimination tree; `parent[j]` is kNone for roots.
struct EliminationTree {
    std::vector<Index> parent;

    Index size() const { return static_cast<Index>(parent.size()); }
    std::vector<std::vector<Index>> children() const;
    Index height() const;
};

/// Row structure of each column of L, diagonal included, rows ascending.
struct FillPattern {
    std::vector<std::vector<Index>> cols;

    Index size() const { return static_cast<Index>(cols.size()); }
    Index nnz() const;
};

/// Disjoint groups of consecutive columns eliminated together.
struct FrontalPartition {
    std::vector<std::vector<Index>> frontals;
    std::vector<Index> frontal_of;

    Index count() const { return static_cast<Index>(frontals.size()); }
};

/// Minimum-degree ordering on the pattern of A + A^T.
///
/// Works on the explicit elimination graph; ties go to the smallest original
/// index, so the result is deterministic. Returned as a Permutation mapping
/// original index to elimination position.
Permutation min_degree_order(const CscMatrix& a);

/// Elimination tree of a structurally symmetric matrix (only entries above
/// the diagonal are read).
EliminationTree elimination_tree(const CscMatrix& a);

/// Exact structure of L, assuming no numerical cancellation. Throws when
/// `t` is not the elimination tree of `a`.
FillPattern symbolic_fill(const CscMatrix& a, const EliminationTree& t);

/// Number of entries of L not present in the lower triangle of `a`.
Index fill_count(const CscMatrix& a, const FillPattern& f);

/// Greedy relaxed supernode detection.
///
/// Column j+1 joins the frontal ending at j when parent[j] = j+1 and, with the
/// frontal stored densely over the union of its column structures, no member
/// column carries more than `relax` explicit zeros. With relax = 0 only
/// exactly nested columns merge.
FrontalPartition detect_frontals(const FillPattern& f, const EliminationTree& t, Index relax);

/// Union of the column structures of each frontal, ascending.
std::vector<std::vector<Index>> frontal_rows(const FrontalPartition& p, const FillPattern& f);

/// Parent frontal of each frontal (kNone for roots).
std::vector<Index> frontal_parents(const FrontalPartition& p, const EliminationTree& t);

enum class Ordering { MinDegree, Natural };

struct AnalyzeOptions {
    Ordering ordering = Ordering::MinDegree;
    Index relax = 4;
};

/// Complete symbolic analysis of one matrix.
struct Symbolic {
    Index n = 0;
    Permutation order;        ///< original index -> elimination position
    CscMatrix pattern;        ///< permuted symmetrized pattern
    EliminationTree etree;
    FillPattern fill;
    FrontalPartition frontals;
    std::vector<std::vector<Index>> rows;  ///< per-frontal dense row set
    std::vector<Index> parent;             ///< per-frontal parent
    Index block_analyses = 0;              ///< per-block analyses performed (block mode)
};

/// Finishes the analysis once the ordering is fixed.
Symbolic analyze_with_order(const CscMatrix& a, Permutation order, Index relax);
/// Partition can be supplied when it was derived elsewhere (block reuse).
Symbolic analyze_with_partition(const CscMatrix& a, Permutation order, FrontalPartition partition);

Symbolic analyze(const CscMatrix& a, const AnalyzeOptions& opts = {});

}  // namespace ess
