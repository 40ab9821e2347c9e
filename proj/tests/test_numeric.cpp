#include <random>
#include <set>

#include "doctest.h"
#include "ess/frontal.hpp"
#include "ess/matgen.hpp"
#include "ess/numeric.hpp"
#include "ess/qlearn.hpp"
#include "oracles.hpp"

using namespace ess;

namespace {
std::vector<double> random_vec(Index n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

// P A Q^T from the factor's permutations.
Eigen::MatrixXd permuted(const CscMatrix& a, const LUFactors& lu) {
    return oracle::dense(permute(a, lu.row_perm, lu.col_perm));
}

double recomposition_error(const CscMatrix& a, const LUFactors& lu) {
    const Eigen::MatrixXd pa = permuted(a, lu);
    return (pa - lu.dense_lower() * lu.dense_upper()).cwiseAbs().maxCoeff() / pa.cwiseAbs().maxCoeff();
}

template <typename Scalar>
FrontalMatrix<Scalar> make_front(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& m, Index fs) {
    FrontalMatrix<Scalar> f;
    f.values = m;
    f.fully_summed = fs;
    for (Index i = 0; i < m.rows(); ++i) {
        f.rows.push_back(i);
        f.cols.push_back(i);
    }
    return f;
}
}  // namespace

TEST_CASE("frontal kernel: 1x1") {
    Eigen::MatrixXd m(1, 1);
    m << 2.0;
    auto f = make_front(m, 1);
    CHECK(factor_frontal(f) == 1);
    CHECK(f.values(0, 0) == 2.0);
}

TEST_CASE("frontal kernel: forced row swap") {
    Eigen::MatrixXd m(2, 2);
    m << 0, 1, 1, 0;
    auto f = make_front(m, 2);
    CHECK(factor_frontal(f, 0.1) == 2);
    CHECK(f.rows[0] == 1);
}

TEST_CASE("frontal kernel: random 8x8 recomposes") {
    for (auto variant : {KernelVariant::Unblocked, KernelVariant::Blocked}) {
        Eigen::MatrixXd m = Eigen::MatrixXd::Random(8, 8);
        auto f = make_front(m, 8);
        REQUIRE(factor_frontal(f, 1e-3, variant) == 8);
        Eigen::MatrixXd l = f.values.triangularView<Eigen::UnitLower>();
        Eigen::MatrixXd u = f.values.triangularView<Eigen::Upper>();
        Eigen::MatrixXd pm(8, 8);
        for (Index i = 0; i < 8; ++i)
            for (Index j = 0; j < 8; ++j) pm(i, j) = m(f.rows[i], f.cols[j]);
        CHECK((pm - l * u).cwiseAbs().maxCoeff() <= 1e-12 * m.cwiseAbs().maxCoeff());
    }
}

TEST_CASE("frontal kernel: partial front leaves the Schur complement") {
    Eigen::MatrixXd m = Eigen::MatrixXd::Random(6, 6) + 6 * Eigen::MatrixXd::Identity(6, 6);
    auto blocked = make_front(m, 3);
    auto plain = make_front(m, 3);
    CHECK(factor_frontal(blocked, 1e-3, KernelVariant::Blocked) == 3);
    CHECK(factor_frontal(plain, 1e-3, KernelVariant::Unblocked) == 3);
    CHECK((blocked.values - plain.values).cwiseAbs().maxCoeff() <= 1e-12);
    // Schur complement oracle
    Eigen::MatrixXd s = m.bottomRightCorner(3, 3) - m.bottomLeftCorner(3, 3) * m.topLeftCorner(3, 3).inverse() *
                                                         m.topRightCorner(3, 3);
    CHECK((blocked.values.bottomRightCorner(3, 3) - s).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("frontal kernel is templated on the scalar") {
    Eigen::MatrixXf m(2, 2);
    m << 4, 1, 2, 3;
    auto f = make_front(m, 2);
    CHECK(factor_frontal(f) == 2);
    CHECK(f.values(1, 1) == doctest::Approx(2.5f));
}

TEST_CASE("frontal kernel: zero column delays") {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(3, 3);
    m(1, 1) = 1.0;
    m(2, 2) = 1.0;
    m(2, 0) = 0.0;
    auto f = make_front(m, 2);
    CHECK(factor_frontal(f) == 1);  // column 0 is all zero
}

TEST_CASE("solve: trivial systems") {
    auto i3 = CscMatrix::identity(3);
    auto s = std::make_shared<const Symbolic>(analyze(i3));
    auto lu = serial_factor(i3, s);
    std::vector<double> b{1, 2, 3};
    CHECK(solve(lu, b) == b);

    auto d = CscMatrix::from_triplets(2, std::vector<CscMatrix::Triplet>{{0, 0, 2.0}, {1, 1, 4.0}});
    auto ld = serial_factor(d, std::make_shared<const Symbolic>(analyze(d)));
    auto x = solve(ld, std::vector<double>{2.0, 8.0});
    CHECK(x == std::vector<double>{1.0, 2.0});
    CHECK_THROWS_AS(solve(ld, std::vector<double>{1.0}), Error);
}

TEST_CASE("random 100x100 system") {
    std::mt19937_64 rng(77);
    auto a = oracle::random_system(100, 0.05, rng);
    auto s = std::make_shared<const Symbolic>(analyze(a));
    auto lu = serial_factor(a, s);
    auto b = random_vec(100, 1);
    auto x = solve(lu, b);
    CHECK(residual_norm(a, x, b) <= 1e-10);
    // dense oracle
    Eigen::VectorXd xd = oracle::dense(a).partialPivLu().solve(Eigen::Map<Eigen::VectorXd>(b.data(), 100));
    for (Index i = 0; i < 100; ++i) CHECK(x[i] == doctest::Approx(xd[i]).epsilon(1e-9));
}

TEST_CASE("L U recomposes P A Q^T on small matrices") {
    std::mt19937_64 rng(88);
    for (int trial = 0; trial < 10; ++trial) {
        auto a = oracle::random_system(20 + 3 * trial, 0.15, rng);
        auto lu = serial_factor(a, std::make_shared<const Symbolic>(analyze(a)));
        CHECK(recomposition_error(a, lu) <= 1e-10);
        Eigen::MatrixXd l = lu.dense_lower(), u = lu.dense_upper();
        CHECK(l.isApprox(Eigen::MatrixXd(l.triangularView<Eigen::UnitLower>())));
        CHECK(u.isApprox(Eigen::MatrixXd(u.triangularView<Eigen::Upper>())));
    }
}

TEST_CASE("pivot delays keep the factorization correct") {
    // zero diagonal forces delays
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> uni(0.5, 1.5);
    std::vector<CscMatrix::Triplet> t;
    const Index n = 30;
    for (Index i = 0; i < n; ++i) {
        if (i % 3 != 0) t.push_back({i, i, 4.0});
        const Index j = (i + 1) % n, k = (i + 7) % n;
        t.push_back({i, j, uni(rng)});
        t.push_back({j, i, uni(rng)});
        t.push_back({i, k, uni(rng)});
        t.push_back({k, i, uni(rng)});
    }
    auto a = CscMatrix::from_triplets(n, t);
    auto lu = serial_factor(a, std::make_shared<const Symbolic>(analyze(a, {Ordering::MinDegree, 0})));
    CHECK(lu.delayed_pivots > 0);
    auto b = random_vec(n, 3);
    CHECK(residual_norm(a, solve(lu, b), b) <= 1e-10);
    CHECK(recomposition_error(a, lu) <= 1e-10);
}

TEST_CASE("singular matrix reports a column") {
    std::vector<CscMatrix::Triplet> t{{0, 0, 1.0}, {0, 1, 1.0}, {1, 0, 1.0}, {1, 1, 1.0}, {2, 2, 3.0}};
    auto a = CscMatrix::from_triplets(3, t);
    auto s = std::make_shared<const Symbolic>(analyze(a));
    CHECK_THROWS_AS(serial_factor(a, s), SingularMatrixError);
    StaticPolicy pol;
    FactorOptions fo;
    fo.threads = 2;
    CHECK_THROWS_AS(parallel_factor(a, s, build_task_tree(*s), pol, fo), SingularMatrixError);
}

TEST_CASE("parallel factor equals the serial reference for any policy and thread count") {
    GenSpec spec;
    spec.templates = {{6, BlockPattern::Random, 0.5, 12, 0.5, 1.5}, {4, BlockPattern::Full, 1.0, 10, 0.5, 1.5}};
    spec.network_size = 30;
    spec.seed = 12;
    auto a = generate(spec).matrix;
    auto s = std::make_shared<const Symbolic>(analyze(a));
    auto ref = serial_factor(a, s);
    for (Index th : {1, 2, 4}) {
        for (auto* name : {"serial", "static"}) {
            std::unique_ptr<SchedulePolicy> pol;
            if (std::string(name) == "serial") pol = std::make_unique<SerialPolicy>();
            else pol = std::make_unique<StaticPolicy>();
            FactorOptions fo;
            fo.threads = th;
            auto [lu, trace] = parallel_factor(a, s, build_task_tree(*s), *pol, fo);
            REQUIRE(lu.fronts.size() == ref.fronts.size());
            for (std::size_t f = 0; f < ref.fronts.size(); ++f) {
                CHECK(lu.fronts[f].rows == ref.fronts[f].rows);
                CHECK(lu.fronts[f].lower == ref.fronts[f].lower);
                CHECK(lu.fronts[f].upper == ref.fronts[f].upper);
            }
            auto b = random_vec(a.n(), 4);
            auto x = solve(lu, b, th);
            CHECK(x == solve(ref, b));
            // per-core intervals do not overlap
            for (Index c = 0; c < th; ++c) {
                double last = -1.0;
                for (const auto& r : trace.rows)
                    if (r.core == c) {
                        CHECK(r.t_start_us >= last);
                        last = r.t_end_us;
                    }
            }
        }
    }
}

TEST_CASE("example: T1 split runs as two tasks on distinct cores") {
    auto ex = oracle::example11();
    auto s = std::make_shared<const Symbolic>(analyze_with_order(ex.a, ex.order, 0));
    Action first{ActionKind::Delete, {oracle::kEdgeB, oracle::kEdgeA}};
    std::sort(first.edges.begin(), first.edges.end());
    struct Fixed final : SchedulePolicy {
        Action a;
        bool done = false;
        Action choose(const ScheduleRun&) override {
            if (done) return Action::skip();
            done = true;
            return a;
        }
        std::string name() const override { return "fixed"; }
    } fixed;
    fixed.a = first;
    FactorOptions fo;
    fo.threads = 2;
    auto [lu, trace] = parallel_factor(ex.a, s, build_task_tree(*s), fixed, fo);
    REQUIRE(trace.rows.size() == 3);
    std::set<std::vector<Index>> tasks;
    std::set<Index> cores;
    for (const auto& r : trace.rows)
        if (r.frontals != std::vector<Index>{7}) {
            tasks.insert(r.frontals);
            cores.insert(r.core);
        }
    CHECK(tasks == std::set<std::vector<Index>>{{1, 3, 6}, {0, 2, 4, 5}});
    CHECK(cores.size() == 2);
    auto b = random_vec(11, 8);
    CHECK(residual_norm(ex.a, solve(lu, b), b) <= 1e-12);
}

TEST_CASE("refactor with the same pattern") {
    std::mt19937_64 rng(55);
    auto a = oracle::random_system(25, 0.15, rng);
    auto s = std::make_shared<const Symbolic>(analyze(a));
    StaticPolicy pol;
    FactorOptions fo;
    fo.threads = 2;
    auto [lu, trace] = parallel_factor(a, s, build_task_tree(*s), pol, fo);

    auto same = refactor_same_pattern(lu, a, 2);
    for (std::size_t f = 0; f < lu.fronts.size(); ++f) {
        CHECK(same.fronts[f].lower == lu.fronts[f].lower);
        CHECK(same.fronts[f].upper == lu.fronts[f].upper);
    }
    CHECK(same.tasks.cut_edges() == lu.tasks.cut_edges());

    auto t2 = a.triplets();
    for (auto& e : t2) e.value *= 2.0;
    auto a2 = CscMatrix::from_triplets(a.n(), t2);
    auto doubled = refactor_same_pattern(lu, a2);
    CHECK(doubled.row_perm == lu.row_perm);
    CHECK((doubled.dense_upper() - 2.0 * lu.dense_upper()).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((doubled.dense_lower() - lu.dense_lower()).cwiseAbs().maxCoeff() <= 1e-12);

    auto t3 = a.triplets();
    Index col = kNone;
    for (Index j = 0; j < a.n() && col == kNone; ++j)
        for (Index i = 0; i < a.n(); ++i)
            if (a.coeff(i, j) == 0.0) {
                t3.push_back({i, j, 1.0});
                col = j;
                break;
            }
    auto a3 = CscMatrix::from_triplets(a.n(), t3);
    try {
        refactor_same_pattern(lu, a3);
        FAIL("expected a pattern mismatch");
    } catch (const PatternMismatchError& e) {
        CHECK(e.column() == col);
    }
}

TEST_CASE("worker failure surfaces as an error") {
    std::mt19937_64 rng(66);
    auto a = oracle::random_system(40, 0.1, rng);
    auto s = std::make_shared<const Symbolic>(analyze(a));
    // make the last pivot singular: zero row and column of the last eliminated index
    const Index last = s->order.inverse()[a.n() - 1];
    auto t = a.triplets();
    for (auto& e : t)
        if (e.row == last || e.col == last) e.value = 0.0;
    auto z = CscMatrix::from_triplets(a.n(), t);
    for (Index th : {1, 3}) {
        StaticPolicy pol;
        FactorOptions fo;
        fo.threads = th;
        CHECK_THROWS_AS(parallel_factor(z, s, build_task_tree(*s), pol, fo), SingularMatrixError);
    }
}
