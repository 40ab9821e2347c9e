// Independent diagonal blocks and symbolic reuse across identical blocks.
//
// Dynamic-equipment equations form many small blocks that only talk to the
// network part of the system. Blocks with the same local pattern share one
// symbolic analysis.
#pragma once

#include <cstdint>
#include <vector>

#include "ess/sparse.hpp"
#include "ess/symbolic.hpp"

namespace ess {

struct BlockMap {
    /// Columns of each block, ascending. Generated matrices use contiguous ranges.
    std::vector<std::vector<Index>> blocks;
    /// Columns outside every block (network and coupling part).
    std::vector<Index> coupling;
};

struct ReusePlan {
    std::vector<Index> structure_of;          ///< block -> structure id
    std::vector<std::vector<Index>> groups;   ///< structure id -> member blocks; front is the representative
};

/// Connected components of the symmetrized pattern restricted to the leading
/// n - border_hint columns. The trailing columns become the coupling set.
BlockMap find_diagonal_blocks(const CscMatrix& a, Index border_hint = 0);

/// Translation-invariant digest of the block-local pattern.
std::uint64_t structure_hash(const CscMatrix& a, const std::vector<Index>& block);

/// Groups blocks by identical normalized local pattern. Hash buckets are
/// confirmed by exact comparison.
ReusePlan reuse_plan(const CscMatrix& a, const BlockMap& m);

/// Block-local submatrix (entries with both indices inside the block).
CscMatrix block_submatrix(const CscMatrix& a, const std::vector<Index>& block);

/// Symbolic analysis that orders blocks first and the coupling columns last.
///
/// Each block is ordered and split into frontals locally. With a plan, this is
/// done once per structure id and every member adopts its representative's
/// result; without one, every block is analyzed. `Symbolic::block_analyses`
/// counts the local analyses actually performed.
Symbolic analyze_blocks(const CscMatrix& a, const BlockMap& m, const ReusePlan* plan, Index relax = 4);

}  // namespace ess
