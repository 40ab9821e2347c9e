#include "ess/blocks.hpp"

#include <algorithm>
#include <map>
#include <numeric>

namespace ess {

namespace {

struct DisjointSets {
    std::vector<Index> up;
    explicit DisjointSets(Index n) : up(n) { std::iota(up.begin(), up.end(), Index{0}); }
    Index find(Index x) {
        while (up[x] != x) x = up[x] = up[up[x]];
        return x;
    }
    void join(Index a, Index b) {
        a = find(a);
        b = find(b);
        if (a != b) up[std::max(a, b)] = std::min(a, b);
    }
};

// Local (col, row) pattern of a block, columns in block order.
std::vector<std::vector<Index>> local_pattern(const CscMatrix& a, const std::vector<Index>& block) {
    std::vector<std::vector<Index>> cols(block.size());
    for (std::size_t k = 0; k < block.size(); ++k) {
        for (Index r : a.col_rows(block[k])) {
            auto it = std::lower_bound(block.begin(), block.end(), r);
            if (it != block.end() && *it == r) cols[k].push_back(it - block.begin());
        }
    }
    return cols;
}

}  // namespace

BlockMap find_diagonal_blocks(const CscMatrix& a, Index border_hint) {
    const Index n = a.n();
    if (border_hint < 0 || (n > 0 && border_hint >= n) || (n == 0 && border_hint > 0))
        throw Error("border_hint must lie in [0, n)");
    const Index m = n - border_hint;

    DisjointSets ds(m);
    for (Index j = 0; j < m; ++j)
        for (Index i : a.col_rows(j))
            if (i < m) ds.join(i, j);

    BlockMap map;
    std::vector<Index> block_of_root(m, kNone);
    for (Index j = 0; j < m; ++j) {
        Index r = ds.find(j);
        if (block_of_root[r] == kNone) {
            block_of_root[r] = static_cast<Index>(map.blocks.size());
            map.blocks.emplace_back();
        }
        map.blocks[block_of_root[r]].push_back(j);
    }
    for (Index j = m; j < n; ++j) map.coupling.push_back(j);
    return map;
}

std::uint64_t structure_hash(const CscMatrix& a, const std::vector<Index>& block) {
    for (Index c : block)
        if (c < 0 || c >= a.n()) throw Error("block column out of range");
    constexpr std::uint64_t kBase = 1099511628211ULL;
    std::uint64_t h = 14695981039346656037ULL;
    auto feed = [&](std::uint64_t v) { h = h * kBase + v + 1; };
    const auto cols = local_pattern(a, block);
    feed(block.size());
    for (std::size_t k = 0; k < cols.size(); ++k) {
        feed(cols[k].size());
        for (Index r : cols[k]) feed(static_cast<std::uint64_t>(r));
    }
    return h;
}

ReusePlan reuse_plan(const CscMatrix& a, const BlockMap& m) {
    ReusePlan plan;
    plan.structure_of.assign(m.blocks.size(), kNone);
    // hash -> structure ids sharing that hash
    std::map<std::uint64_t, std::vector<Index>> buckets;
    std::vector<std::vector<std::vector<Index>>> patterns;
    for (std::size_t b = 0; b < m.blocks.size(); ++b) {
        const auto h = structure_hash(a, m.blocks[b]);
        auto pat = local_pattern(a, m.blocks[b]);
        auto& bucket = buckets[h];
        Index id = kNone;
        for (Index cand : bucket)
            if (patterns[cand] == pat) {
                id = cand;
                break;
            }
        if (id == kNone) {
            id = static_cast<Index>(plan.groups.size());
            plan.groups.emplace_back();
            patterns.push_back(std::move(pat));
            bucket.push_back(id);
        }
        plan.structure_of[b] = id;
        plan.groups[id].push_back(static_cast<Index>(b));
    }
    return plan;
}

CscMatrix block_submatrix(const CscMatrix& a, const std::vector<Index>& block) {
    std::vector<CscMatrix::Triplet> entries;
    for (std::size_t k = 0; k < block.size(); ++k) {
        auto rows = a.col_rows(block[k]);
        auto vals = a.col_values(block[k]);
        for (std::size_t p = 0; p < rows.size(); ++p) {
            auto it = std::lower_bound(block.begin(), block.end(), rows[p]);
            if (it != block.end() && *it == rows[p])
                entries.push_back({it - block.begin(), static_cast<Index>(k), vals[p]});
        }
    }
    return CscMatrix::from_triplets(static_cast<Index>(block.size()), entries);
}

namespace {

struct LocalResult {
    Permutation order;
    FrontalPartition frontals;
};

LocalResult analyze_local(const CscMatrix& a, const std::vector<Index>& block, Index relax) {
    const CscMatrix local = block_submatrix(a, block);
    Permutation order = min_degree_order(local);
    const CscMatrix pattern = permute(symmetrize_pattern(local), order, order);
    const EliminationTree t = elimination_tree(pattern);
    const FillPattern f = symbolic_fill(pattern, t);
    return {std::move(order), detect_frontals(f, t, relax)};
}

}  // namespace

Symbolic analyze_blocks(const CscMatrix& a, const BlockMap& m, const ReusePlan* plan, Index relax) {
    const Index n = a.n();
    const CscMatrix sym = symmetrize_pattern(a);

    std::vector<Index> in_block(n, kNone);
    for (std::size_t b = 0; b < m.blocks.size(); ++b)
        for (Index c : m.blocks[b]) in_block[c] = static_cast<Index>(b);

    std::vector<Index> order;  // elimination position -> original column
    order.reserve(n);
    FrontalPartition partition;
    Index analyses = 0;

    std::vector<LocalResult> cache(plan ? plan->groups.size() : 0);
    std::vector<bool> cached(cache.size(), false);
    for (std::size_t b = 0; b < m.blocks.size(); ++b) {
        const auto& block = m.blocks[b];
        const LocalResult* local = nullptr;
        LocalResult fresh;
        if (plan) {
            const Index id = plan->structure_of[b];
            if (!cached[id]) {
                cache[id] = analyze_local(a, m.blocks[plan->groups[id].front()], relax);
                cached[id] = true;
                ++analyses;
            }
            local = &cache[id];
        } else {
            fresh = analyze_local(a, block, relax);
            ++analyses;
            local = &fresh;
        }
        const Index offset = static_cast<Index>(order.size());
        for (Index pos = 0; pos < local->order.size(); ++pos) order.push_back(block[local->order.inverse()[pos]]);
        for (const auto& fr : local->frontals.frontals) {
            std::vector<Index> cols;
            for (Index c : fr) cols.push_back(c + offset);
            partition.frontals.push_back(std::move(cols));
        }
    }
    const Index block_cols = static_cast<Index>(order.size());

    // Coupling columns are ordered on the graph left after eliminating every
    // block: original edges plus a clique over each block's coupling neighbours.
    std::vector<Index> coupling;
    for (Index j = 0; j < n; ++j)
        if (in_block[j] == kNone) coupling.push_back(j);
    std::vector<Index> local_of(n, kNone);
    for (std::size_t k = 0; k < coupling.size(); ++k) local_of[coupling[k]] = static_cast<Index>(k);

    std::vector<CscMatrix::Triplet> edges;
    for (Index j : coupling)
        for (Index i : sym.col_rows(j))
            if (local_of[i] != kNone) edges.push_back({local_of[i], local_of[j], 1.0});
    std::vector<Index> nbrs;
    for (const auto& block : m.blocks) {
        nbrs.clear();
        for (Index c : block)
            for (Index i : sym.col_rows(c))
                if (local_of[i] != kNone) nbrs.push_back(local_of[i]);
        std::sort(nbrs.begin(), nbrs.end());
        nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
        for (Index x : nbrs)
            for (Index y : nbrs) edges.push_back({x, y, 1.0});
    }
    const CscMatrix reduced = CscMatrix::from_triplets(static_cast<Index>(coupling.size()), edges);
    const Permutation coupling_order = min_degree_order(reduced);
    for (Index pos = 0; pos < coupling_order.size(); ++pos) order.push_back(coupling[coupling_order.inverse()[pos]]);

    const Permutation perm = Permutation::from_order(order);
    const CscMatrix pattern = permute(sym, perm, perm);
    const EliminationTree t = elimination_tree(pattern);
    const FillPattern f = symbolic_fill(pattern, t);

    // Trailing columns only reference rows at or below themselves, so the
    // coupling region is a self-contained suffix of the fill pattern.
    FillPattern tail;
    EliminationTree tail_tree;
    for (Index j = block_cols; j < n; ++j) {
        std::vector<Index> rows;
        for (Index r : f.cols[j]) rows.push_back(r - block_cols);
        tail.cols.push_back(std::move(rows));
        tail_tree.parent.push_back(t.parent[j] == kNone ? kNone : t.parent[j] - block_cols);
    }
    for (const auto& fr : detect_frontals(tail, tail_tree, relax).frontals) {
        std::vector<Index> cols;
        for (Index c : fr) cols.push_back(c + block_cols);
        partition.frontals.push_back(std::move(cols));
    }
    partition.frontal_of.assign(n, kNone);
    for (std::size_t k = 0; k < partition.frontals.size(); ++k)
        for (Index c : partition.frontals[k]) partition.frontal_of[c] = static_cast<Index>(k);

    Symbolic s = analyze_with_partition(a, perm, std::move(partition));
    s.block_analyses = analyses;
    return s;
}

}  // namespace ess
