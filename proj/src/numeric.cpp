#include "ess/numeric.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <mutex>
#include <optional>
#include <thread>

namespace ess {

namespace {

CscMatrix transpose(const CscMatrix& a) {
    auto t = a.triplets();
    for (auto& e : t) std::swap(e.row, e.col);
    return CscMatrix::from_triplets(a.n(), t);
}

struct Contribution {
    std::vector<Index> rows;
    std::vector<Index> cols;
    Eigen::MatrixXd block;
};

struct Workspace {
    std::vector<Index> row_pos;
    std::vector<Index> col_pos;
    explicit Workspace(Index n) : row_pos(n, kNone), col_pos(n, kNone) {}
};

// Assembles and factors frontals. Distinct frontals may run concurrently as
// long as every child finished before its parent starts: a contribution is
// written by its child's thread and read once by the parent's thread.
class FrontalEngine {
public:
    FrontalEngine(const CscMatrix& a, const Symbolic& s, double tol, KernelVariant variant)
        : s_(s), tol_(tol), variant_(variant) {
        if (a.n() != s.n) throw Error("matrix size does not match symbolic analysis");
        ap_ = permute(a, s.order, s.order);
        apt_ = transpose(ap_);
        fronts_.resize(s.frontals.count());
        contrib_.resize(s.frontals.count());
        children_.resize(s.frontals.count());
        for (Index f = 0; f < s.frontals.count(); ++f)
            if (s.parent[f] != kNone) children_[s.parent[f]].push_back(f);
    }

    Index frontal_count() const { return s_.frontals.count(); }

    // Returns the bytes of the assembled front.
    double factor_node(Index f, Workspace& ws) {
        const auto& own = s_.frontals.frontals[f];
        const Index first = own.front(), last = own.back();

        std::vector<Index> rows = s_.rows[f], cols = s_.rows[f], merged;
        for (Index c : children_[f]) {
            const auto& cb = *contrib_[c];
            merged.clear();
            std::set_union(rows.begin(), rows.end(), cb.rows.begin(), cb.rows.end(), std::back_inserter(merged));
            rows.swap(merged);
            merged.clear();
            std::set_union(cols.begin(), cols.end(), cb.cols.begin(), cb.cols.end(), std::back_inserter(merged));
            cols.swap(merged);
        }
        const Index m = static_cast<Index>(rows.size());
        if (static_cast<Index>(cols.size()) != m) throw Error("frontal row and column sets differ in size");

        FrontalMatrix<double> front;
        front.fully_summed = std::upper_bound(rows.begin(), rows.end(), last) - rows.begin();
        if (std::upper_bound(cols.begin(), cols.end(), last) - cols.begin() != front.fully_summed)
            throw Error("delayed rows and columns do not pair up");
        front.values = Eigen::MatrixXd::Zero(m, m);
        for (Index i = 0; i < m; ++i) {
            ws.row_pos[rows[i]] = i;
            ws.col_pos[cols[i]] = i;
        }

        for (Index j = first; j <= last; ++j) {
            auto r = ap_.col_rows(j);
            auto v = ap_.col_values(j);
            for (std::size_t p = 0; p < r.size(); ++p)
                if (r[p] >= first) front.values(ws.row_pos[r[p]], ws.col_pos[j]) += v[p];
            auto tc = apt_.col_rows(j);  // row j of the permuted matrix
            auto tv = apt_.col_values(j);
            for (std::size_t p = 0; p < tc.size(); ++p)
                if (tc[p] > last) front.values(ws.row_pos[j], ws.col_pos[tc[p]]) += tv[p];
        }
        double bytes = static_cast<double>(m) * static_cast<double>(m) * sizeof(double);
        for (Index c : children_[f]) {
            auto& cb = *contrib_[c];
            bytes += static_cast<double>(cb.block.size()) * sizeof(double);
            const Index cm = static_cast<Index>(cb.rows.size());
            for (Index jj = 0; jj < cm; ++jj) {
                const Index cj = ws.col_pos[cb.cols[jj]];
                for (Index ii = 0; ii < cm; ++ii) front.values(ws.row_pos[cb.rows[ii]], cj) += cb.block(ii, jj);
            }
            contrib_[c].reset();
        }
        for (Index i = 0; i < m; ++i) {
            ws.row_pos[rows[i]] = kNone;
            ws.col_pos[cols[i]] = kNone;
        }

        front.rows = std::move(rows);
        front.cols = std::move(cols);
        const Index piv = factor_frontal(front, tol_, variant_);
        if (piv < front.fully_summed && s_.parent[f] == kNone) {
            const Index col = s_.order.inverse()[front.cols[piv]];
            throw SingularMatrixError(col, "matrix is numerically singular at column " + std::to_string(col));
        }

        FrontFactor& ff = fronts_[f];
        ff.pivots = piv;
        ff.lower = front.values.leftCols(piv);
        ff.upper = front.values.topRows(piv);
        for (Index i = 0; i < piv; ++i)
            if (front.cols[i] < first) ++delayed_;
        if (s_.parent[f] != kNone) {
            auto cb = std::make_unique<Contribution>();
            cb->rows.assign(front.rows.begin() + piv, front.rows.end());
            cb->cols.assign(front.cols.begin() + piv, front.cols.end());
            cb->block = front.values.bottomRightCorner(m - piv, m - piv);
            contrib_[f] = std::move(cb);
        }
        ff.rows = std::move(front.rows);
        ff.cols = std::move(front.cols);

        // Children learn where their trailing rows and columns ended up.
        for (Index i = 0; i < m; ++i) {
            ws.row_pos[ff.rows[i]] = i;
            ws.col_pos[ff.cols[i]] = i;
        }
        for (Index c : children_[f]) {
            auto& cf = fronts_[c];
            cf.parent_rows.clear();
            cf.parent_cols.clear();
            for (std::size_t i = cf.pivots; i < cf.rows.size(); ++i) {
                cf.parent_rows.push_back(ws.row_pos[cf.rows[i]]);
                cf.parent_cols.push_back(ws.col_pos[cf.cols[i]]);
            }
        }
        for (Index i = 0; i < m; ++i) {
            ws.row_pos[ff.rows[i]] = kNone;
            ws.col_pos[ff.cols[i]] = kNone;
        }
        return bytes;
    }

    LUFactors finish(const CscMatrix& a, std::shared_ptr<const Symbolic> symbolic) {
        LUFactors lu;
        lu.n = s_.n;
        lu.pivot_tol = tol_;
        lu.variant = variant_;
        lu.delayed_pivots = delayed_.load();
        std::vector<Index> row_step(s_.n, kNone), col_step(s_.n, kNone);
        Index step = 0;
        for (const auto& ff : fronts_)
            for (Index i = 0; i < ff.pivots; ++i, ++step) {
                row_step[s_.order.inverse()[ff.rows[i]]] = step;
                col_step[s_.order.inverse()[ff.cols[i]]] = step;
            }
        if (step != s_.n) throw Error("factorization incomplete");
        lu.row_perm = Permutation(std::move(row_step));
        lu.col_perm = Permutation(std::move(col_step));
        lu.fronts = std::move(fronts_);
        lu.symbolic = std::move(symbolic);
        lu.pattern_col_ptr = a.col_ptr();
        lu.pattern_row_idx = a.row_idx();
        return lu;
    }

private:
    const Symbolic& s_;
    double tol_;
    KernelVariant variant_;
    CscMatrix ap_, apt_;
    std::vector<FrontFactor> fronts_;
    std::vector<std::unique_ptr<Contribution>> contrib_;
    std::vector<std::vector<Index>> children_;
    std::atomic<Index> delayed_{0};
};

// One worker thread per core; each receives whole tasks from the coordinator.
class ThreadBackend final : public ExecutionBackend {
public:
    ThreadBackend(FrontalEngine& engine, Index threads, Index n)
        : engine_(engine), jobs_(threads), start_(std::chrono::steady_clock::now()) {
        workers_.reserve(threads);
        for (Index core = 0; core < threads; ++core)
            workers_.emplace_back([this, core, n] { work(core, n); });
    }

    ~ThreadBackend() override {
        {
            std::lock_guard lock(mutex_);
            stop_ = true;
        }
        abort_ = true;
        work_cv_.notify_all();
        for (auto& w : workers_) w.join();
    }

    void start(Index task_id, const std::vector<Index>& nodes, Index core) override {
        {
            std::lock_guard lock(mutex_);
            jobs_[core] = Job{task_id, nodes};
        }
        work_cv_.notify_all();
    }

    Completion wait_next() override {
        std::unique_lock lock(mutex_);
        done_cv_.wait(lock, [this] { return !done_.empty(); });
        Completion c = done_.front();
        done_.pop_front();
        if (c.error) abort_ = true;
        return c;
    }

    double now() const override {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    struct Job {
        Index task_id;
        std::vector<Index> nodes;
    };

    void work(Index core, Index n) {
        Workspace ws(n);
        for (;;) {
            Job job;
            {
                std::unique_lock lock(mutex_);
                work_cv_.wait(lock, [&] { return stop_ || jobs_[core].has_value(); });
                if (stop_) return;
                job = std::move(*jobs_[core]);
                jobs_[core].reset();
            }
            Completion c;
            c.task_id = job.task_id;
            c.core = core;
            c.t_start = now();
            try {
                for (Index v : job.nodes) {
                    if (abort_) throw Error("factorization aborted");
                    if (v >= engine_.frontal_count()) continue;  // virtual root
                    c.peak_bytes = std::max(c.peak_bytes, engine_.factor_node(v, ws));
                }
            } catch (...) {
                c.error = std::current_exception();
            }
            c.t_end = now();
            {
                std::lock_guard lock(mutex_);
                done_.push_back(std::move(c));
            }
            done_cv_.notify_one();
        }
    }

    FrontalEngine& engine_;
    std::mutex mutex_;
    std::condition_variable work_cv_, done_cv_;
    std::vector<std::optional<Job>> jobs_;
    std::deque<Completion> done_;
    bool stop_ = false;
    std::atomic<bool> abort_{false};
    std::chrono::steady_clock::time_point start_;
    std::vector<std::thread> workers_;
};

// Fresh tree with the same structure and cut set, no progress.
TaskTree reset_progress(const TaskTree& t) {
    std::vector<Index> parent;
    std::vector<double> work;
    for (Index v = 0; v < t.frontal_count(); ++v) {
        Index p = t.parent(v);
        parent.push_back(t.has_virtual_root() && p == t.root() ? kNone : p);
        work.push_back(t.workload(v));
    }
    TaskTree fresh(std::move(parent), std::move(work));
    for (Index v : t.cut_edges()) fresh.set_cut(v, true);
    return fresh;
}

// Runs `fn(task)` for every task once all of its prerequisites have run.
void run_dag(Index threads, const std::vector<std::vector<Index>>& prereq, const std::function<void(Index)>& fn) {
    const Index count = static_cast<Index>(prereq.size());
    std::vector<std::vector<Index>> next(count);
    std::vector<Index> pending(count);
    for (Index t = 0; t < count; ++t) {
        pending[t] = static_cast<Index>(prereq[t].size());
        for (Index p : prereq[t]) next[p].push_back(t);
    }
    std::deque<Index> ready;
    for (Index t = 0; t < count; ++t)
        if (pending[t] == 0) ready.push_back(t);

    if (threads <= 1) {
        while (!ready.empty()) {
            const Index t = ready.front();
            ready.pop_front();
            fn(t);
            for (Index s : next[t])
                if (--pending[s] == 0) ready.push_back(s);
        }
        return;
    }

    std::mutex mutex;
    std::condition_variable cv;
    Index finished = 0;
    std::exception_ptr error;
    auto worker = [&] {
        std::unique_lock lock(mutex);
        for (;;) {
            cv.wait(lock, [&] { return !ready.empty() || finished == count || error; });
            if (finished == count || error) return;
            const Index t = ready.front();
            ready.pop_front();
            lock.unlock();
            try {
                fn(t);
            } catch (...) {
                lock.lock();
                error = std::current_exception();
                cv.notify_all();
                return;
            }
            lock.lock();
            ++finished;
            for (Index s : next[t])
                if (--pending[s] == 0) ready.push_back(s);
            cv.notify_all();
        }
    };
    std::vector<std::thread> pool;
    for (Index i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

class OwningBackend final : public ExecutionBackend {
public:
    OwningBackend(const CscMatrix& a, std::shared_ptr<const Symbolic> s, Index threads, double tol, KernelVariant v)
        : symbolic_(std::move(s)),
          engine_(a, *symbolic_, tol, v),
          backend_(engine_, threads, a.n()) {}

    void start(Index task_id, const std::vector<Index>& nodes, Index core) override {
        backend_.start(task_id, nodes, core);
    }
    Completion wait_next() override { return backend_.wait_next(); }
    double now() const override { return backend_.now(); }

private:
    std::shared_ptr<const Symbolic> symbolic_;
    FrontalEngine engine_;
    ThreadBackend backend_;
};

}  // namespace

std::unique_ptr<ExecutionBackend> make_numeric_backend(const CscMatrix& a, std::shared_ptr<const Symbolic> symbolic,
                                                       Index threads, double pivot_tol, KernelVariant variant) {
    if (!symbolic) throw Error("symbolic analysis required");
    if (threads < 1) throw Error("threads must be at least 1");
    return std::make_unique<OwningBackend>(a, std::move(symbolic), threads, pivot_tol, variant);
}

std::pair<LUFactors, ScheduleTrace> parallel_factor(const CscMatrix& a, std::shared_ptr<const Symbolic> symbolic,
                                                    const TaskTree& t0, SchedulePolicy& policy,
                                                    const FactorOptions& opts) {
    if (!symbolic) throw Error("symbolic analysis required");
    if (opts.threads < 1) throw Error("threads must be at least 1");
    if (t0.frontal_count() != symbolic->frontals.count()) throw Error("task tree does not match symbolic analysis");
    FrontalEngine engine(a, *symbolic, opts.pivot_tol, opts.variant);
    std::optional<ScheduleRun> run;
    {
        ThreadBackend backend(engine, opts.threads, a.n());
        run.emplace(t0, opts.threads, backend, node_costs(*symbolic, t0), opts.weights);
        run_schedule(*run, policy);
    }
    LUFactors lu = engine.finish(a, std::move(symbolic));
    lu.tasks = reset_progress(run->tree());
    return {std::move(lu), run->trace()};
}

LUFactors serial_factor(const CscMatrix& a, std::shared_ptr<const Symbolic> symbolic, double pivot_tol,
                        KernelVariant variant) {
    if (!symbolic) throw Error("symbolic analysis required");
    FrontalEngine engine(a, *symbolic, pivot_tol, variant);
    Workspace ws(a.n());
    for (Index f = 0; f < engine.frontal_count(); ++f) engine.factor_node(f, ws);
    LUFactors lu = engine.finish(a, symbolic);
    lu.tasks = build_task_tree(*symbolic);
    return lu;
}

LUFactors refactor_same_pattern(const LUFactors& lu, const CscMatrix& a2, Index threads) {
    if (a2.n() != lu.n) throw PatternMismatchError(0, "matrix dimension differs from the analyzed matrix");
    for (Index j = 0; j < a2.n(); ++j) {
        const bool same = a2.col_ptr()[j + 1] - a2.col_ptr()[j] == lu.pattern_col_ptr[j + 1] - lu.pattern_col_ptr[j] &&
                          std::equal(a2.col_rows(j).begin(), a2.col_rows(j).end(),
                                     lu.pattern_row_idx.begin() + lu.pattern_col_ptr[j]);
        if (!same) throw PatternMismatchError(j, "pattern differs from the analyzed matrix in column " + std::to_string(j));
    }
    SerialPolicy replay;  // the recorded cuts already define the tasks
    FactorOptions opts;
    opts.threads = threads;
    opts.pivot_tol = lu.pivot_tol;
    opts.variant = lu.variant;
    return parallel_factor(a2, lu.symbolic, reset_progress(lu.tasks), replay, opts).first;
}

std::vector<double> solve(const LUFactors& lu, std::span<const double> b, Index threads) {
    const Index n = lu.n;
    if (static_cast<Index>(b.size()) != n) throw Error("right-hand side length does not match matrix");
    const auto& order = lu.symbolic->order;
    const Index nf = static_cast<Index>(lu.fronts.size());

    std::vector<double> bp(n), xp(n, 0.0);
    for (Index i = 0; i < n; ++i) bp[order[i]] = b[i];

    std::vector<Eigen::VectorXd> z(nf), update(nf);
    std::vector<std::vector<Index>> children(nf);
    for (Index f = 0; f < nf; ++f)
        if (lu.symbolic->parent[f] != kNone) children[lu.symbolic->parent[f]].push_back(f);

    auto forward = [&](Index f) {
        const auto& ff = lu.fronts[f];
        const Index m = static_cast<Index>(ff.rows.size()), p = ff.pivots;
        Eigen::VectorXd v = Eigen::VectorXd::Zero(m);
        for (Index i = 0; i < p; ++i) v[i] = bp[ff.rows[i]];
        for (Index c : children[f]) {
            const auto& cf = lu.fronts[c];
            for (std::size_t i = 0; i < cf.parent_rows.size(); ++i) v[cf.parent_rows[i]] += update[c][i];
            update[c] = Eigen::VectorXd();
        }
        z[f] = ff.lower.topRows(p).triangularView<Eigen::UnitLower>().solve(v.head(p));
        update[f] = v.tail(m - p);
        if (m > p) update[f].noalias() -= ff.lower.bottomRows(m - p) * z[f];
    };
    auto backward = [&](Index f) {
        const auto& ff = lu.fronts[f];
        const Index m = static_cast<Index>(ff.cols.size()), p = ff.pivots;
        Eigen::VectorXd rhs = z[f];
        if (m > p) {
            Eigen::VectorXd xr(m - p);
            for (Index j = p; j < m; ++j) xr[j - p] = xp[ff.cols[j]];
            rhs.noalias() -= ff.upper.rightCols(m - p) * xr;
        }
        const Eigen::VectorXd x = ff.upper.leftCols(p).triangularView<Eigen::Upper>().solve(rhs);
        for (Index j = 0; j < p; ++j) xp[ff.cols[j]] = x[j];
    };

    if (threads <= 1) {
        for (Index f = 0; f < nf; ++f) forward(f);
        for (Index f = nf - 1; f >= 0; --f) backward(f);
    } else {
        const TaskTree& t = lu.tasks;
        const auto tops = t.task_tops();
        const auto top_of = t.task_top();
        std::vector<Index> index_of(t.size(), kNone);
        for (std::size_t k = 0; k < tops.size(); ++k) index_of[tops[k]] = static_cast<Index>(k);
        std::vector<std::vector<Index>> nodes(tops.size()), below(tops.size()), above(tops.size());
        for (Index v = 0; v < t.size(); ++v)
            if (v < nf) nodes[index_of[top_of[v]]].push_back(v);
        for (Index c : t.cut_edges()) {
            const Index child_task = index_of[c], parent_task = index_of[top_of[t.parent(c)]];
            below[parent_task].push_back(child_task);
            above[child_task].push_back(parent_task);
        }
        run_dag(threads, below, [&](Index k) {
            for (Index f : nodes[k]) forward(f);
        });
        run_dag(threads, above, [&](Index k) {
            for (auto it = nodes[k].rbegin(); it != nodes[k].rend(); ++it) backward(*it);
        });
    }

    std::vector<double> x(n);
    for (Index i = 0; i < n; ++i) x[i] = xp[order[i]];
    return x;
}

Eigen::MatrixXd LUFactors::dense_lower() const {
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
    std::vector<Index> step_of_row(n);
    for (Index i = 0; i < n; ++i) step_of_row[symbolic->order[i]] = row_perm[i];
    Index base = 0;
    for (const auto& ff : fronts) {
        for (Index j = 0; j < ff.pivots; ++j) {
            l(base + j, base + j) = 1.0;
            for (Index i = j + 1; i < static_cast<Index>(ff.rows.size()); ++i)
                l(step_of_row[ff.rows[i]], base + j) = ff.lower(i, j);
        }
        base += ff.pivots;
    }
    return l;
}

Eigen::MatrixXd LUFactors::dense_upper() const {
    Eigen::MatrixXd u = Eigen::MatrixXd::Zero(n, n);
    std::vector<Index> step_of_col(n);
    for (Index i = 0; i < n; ++i) step_of_col[symbolic->order[i]] = col_perm[i];
    Index base = 0;
    for (const auto& ff : fronts) {
        for (Index i = 0; i < ff.pivots; ++i)
            for (Index j = i; j < static_cast<Index>(ff.cols.size()); ++j)
                u(base + i, step_of_col[ff.cols[j]]) = ff.upper(i, j);
        base += ff.pivots;
    }
    return u;
}

}  // namespace ess
