#include "ess/symbolic.hpp"

#include <algorithm>
#include <set>
#include <utility>

namespace ess {

std::vector<std::vector<Index>> EliminationTree::children() const {
    std::vector<std::vector<Index>> ch(parent.size());
    for (Index j = 0; j < size(); ++j)
        if (parent[j] != kNone) ch[parent[j]].push_back(j);
    return ch;
}

Index EliminationTree::height() const {
    // parent[j] > j, so a reverse sweep sees every parent before its children.
    std::vector<Index> depth(parent.size(), 1);
    Index h = 0;
    for (Index j = size() - 1; j >= 0; --j) {
        if (parent[j] != kNone) depth[j] = depth[parent[j]] + 1;
        h = std::max(h, depth[j]);
    }
    return h;
}

Index FillPattern::nnz() const {
    Index s = 0;
    for (const auto& c : cols) s += static_cast<Index>(c.size());
    return s;
}

Permutation min_degree_order(const CscMatrix& a) {
    const Index n = a.n();
    const CscMatrix s = symmetrize_pattern(a);

    std::vector<std::vector<Index>> adj(n);
    for (Index j = 0; j < n; ++j)
        for (Index i : s.col_rows(j))
            if (i != j) adj[j].push_back(i);

    std::set<std::pair<Index, Index>> queue;  // (degree, index)
    for (Index j = 0; j < n; ++j) queue.emplace(static_cast<Index>(adj[j].size()), j);

    std::vector<Index> order;
    order.reserve(n);
    std::vector<Index> merged;
    while (!queue.empty()) {
        const Index v = queue.begin()->second;
        queue.erase(queue.begin());
        order.push_back(v);

        const std::vector<Index> nbrs = std::move(adj[v]);
        adj[v].clear();
        for (Index u : nbrs) {
            auto& au = adj[u];
            queue.erase({static_cast<Index>(au.size()), u});
            // adj[u] <- (adj[u] U nbrs) \ {u, v}
            merged.clear();
            std::set_union(au.begin(), au.end(), nbrs.begin(), nbrs.end(), std::back_inserter(merged));
            std::erase_if(merged, [&](Index w) { return w == u || w == v; });
            au.swap(merged);
            queue.emplace(static_cast<Index>(au.size()), u);
        }
    }
    return Permutation::from_order(order);
}

EliminationTree elimination_tree(const CscMatrix& a) {
    const Index n = a.n();
    EliminationTree t{std::vector<Index>(n, kNone)};
    std::vector<Index> ancestor(n, kNone);
    for (Index k = 0; k < n; ++k) {
        for (Index i : a.col_rows(k)) {
            if (i >= k) break;
            Index r = i;
            while (ancestor[r] != kNone && ancestor[r] != k) {
                Index next = ancestor[r];
                ancestor[r] = k;
                r = next;
            }
            if (ancestor[r] == kNone) {
                ancestor[r] = k;
                t.parent[r] = k;
            }
        }
    }
    return t;
}

FillPattern symbolic_fill(const CscMatrix& a, const EliminationTree& t) {
    const Index n = a.n();
    if (t.size() != n) throw Error("elimination tree size does not match matrix");
    const auto children = t.children();

    FillPattern f;
    f.cols.resize(n);
    std::vector<Index> mark(n, kNone);
    for (Index j = 0; j < n; ++j) {
        auto& col = f.cols[j];
        mark[j] = j;
        col.push_back(j);
        for (Index i : a.col_rows(j))
            if (i > j && mark[i] != j) {
                mark[i] = j;
                col.push_back(i);
            }
        for (Index c : children[j]) {
            if (c >= j) throw Error("elimination tree parent must follow its child");
            for (Index i : f.cols[c])
                if (i > j && mark[i] != j) {
                    mark[i] = j;
                    col.push_back(i);
                }
        }
        std::sort(col.begin(), col.end());
        const Index expected = col.size() > 1 ? col[1] : kNone;
        if (expected != t.parent[j])
            throw Error("elimination tree inconsistent with matrix at column " + std::to_string(j));
    }
    return f;
}

Index fill_count(const CscMatrix& a, const FillPattern& f) {
    Index lower = 0;
    for (Index j = 0; j < a.n(); ++j)
        for (Index i : a.col_rows(j))
            if (i > j) ++lower;
    return f.nnz() - f.size() - lower;
}

FrontalPartition detect_frontals(const FillPattern& f, const EliminationTree& t, Index relax) {
    if (relax < 0) throw Error("relax must be non-negative");
    const Index n = f.size();
    FrontalPartition p;
    p.frontal_of.assign(n, kNone);

    std::vector<Index> rows, merged;
    Index start = 0;
    auto close = [&](Index end) {  // [start, end)
        std::vector<Index> cols;
        for (Index c = start; c < end; ++c) {
            cols.push_back(c);
            p.frontal_of[c] = p.count();
        }
        p.frontals.push_back(std::move(cols));
    };

    for (Index j = 0; j < n; ++j) {
        if (j == start) {
            rows = f.cols[j];
            continue;
        }
        bool join = t.parent[j - 1] == j;
        if (join) {
            merged.clear();
            std::set_union(rows.begin(), rows.end(), f.cols[j].begin(), f.cols[j].end(),
                           std::back_inserter(merged));
            for (Index c = start; c <= j && join; ++c) {
                const auto below = merged.end() - std::lower_bound(merged.begin(), merged.end(), c);
                join = below - static_cast<Index>(f.cols[c].size()) <= relax;
            }
        }
        if (join) {
            rows.swap(merged);
        } else {
            close(j);
            start = j;
            rows = f.cols[j];
        }
    }
    if (n > 0) close(n);
    return p;
}

std::vector<std::vector<Index>> frontal_rows(const FrontalPartition& p, const FillPattern& f) {
    std::vector<std::vector<Index>> out(p.frontals.size());
    std::vector<Index> merged;
    for (std::size_t k = 0; k < p.frontals.size(); ++k) {
        auto& rows = out[k];
        for (Index c : p.frontals[k]) {
            merged.clear();
            std::set_union(rows.begin(), rows.end(), f.cols[c].begin(), f.cols[c].end(),
                           std::back_inserter(merged));
            rows.swap(merged);
        }
    }
    return out;
}

std::vector<Index> frontal_parents(const FrontalPartition& p, const EliminationTree& t) {
    std::vector<Index> parent(p.frontals.size(), kNone);
    for (std::size_t k = 0; k < p.frontals.size(); ++k) {
        const Index last = p.frontals[k].back();
        if (t.parent[last] != kNone) parent[k] = p.frontal_of[t.parent[last]];
    }
    return parent;
}

Symbolic analyze_with_partition(const CscMatrix& a, Permutation order, FrontalPartition partition) {
    Symbolic s;
    s.n = a.n();
    s.pattern = permute(symmetrize_pattern(a), order, order);
    s.order = std::move(order);
    s.etree = elimination_tree(s.pattern);
    s.fill = symbolic_fill(s.pattern, s.etree);
    s.frontals = std::move(partition);
    if (static_cast<Index>(s.frontals.frontal_of.size()) != s.n)
        throw Error("frontal partition does not cover the matrix");
    for (const auto& fr : s.frontals.frontals)
        for (std::size_t k = 0; k + 1 < fr.size(); ++k)
            if (fr[k + 1] != fr[k] + 1 || s.etree.parent[fr[k]] != fr[k + 1])
                throw Error("frontal columns must form a consecutive parent chain");
    s.rows = frontal_rows(s.frontals, s.fill);
    s.parent = frontal_parents(s.frontals, s.etree);
    return s;
}

Symbolic analyze_with_order(const CscMatrix& a, Permutation order, Index relax) {
    const CscMatrix pattern = permute(symmetrize_pattern(a), order, order);
    const EliminationTree t = elimination_tree(pattern);
    const FillPattern f = symbolic_fill(pattern, t);
    return analyze_with_partition(a, std::move(order), detect_frontals(f, t, relax));
}

Symbolic analyze(const CscMatrix& a, const AnalyzeOptions& opts) {
    Permutation order = opts.ordering == Ordering::Natural ? Permutation::identity(a.n())
                                                           : min_degree_order(a);
    return analyze_with_order(a, std::move(order), opts.relax);
}

}  // namespace ess
