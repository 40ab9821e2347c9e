#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "ess/mmio.hpp"
#include "ess/sparse.hpp"

namespace fs = std::filesystem;

namespace {
int run(const std::string& args) {
    const int rc = std::system((std::string(ESS_CLI) + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}
}  // namespace

TEST_CASE("cli round trip") {
    const fs::path dir = fs::temp_directory_path() / "ess_cli_test";
    fs::remove_all(dir);
    fs::create_directories(dir / "corpus");
    {
        std::ofstream s(dir / "spec.json");
        s << R"({"seed": 4, "network_size": 30,
                 "templates": [{"size": 4, "pattern": "random", "density": 0.5, "count": 30},
                               {"size": 3, "pattern": "full", "count": 20}]})";
    }
    const std::string d = dir.string();
    REQUIRE(run("gen --templates " + d + "/spec.json --out " + d + "/corpus/a.mtx --blockmap " + d + "/blocks.json") == 0);
    REQUIRE(run("gen --templates " + d + "/spec.json --out " + d + "/corpus/b.mtx --seed 5") == 0);
    CHECK(slurp(dir / "corpus/a.mtx") != slurp(dir / "corpus/b.mtx"));
    CHECK(fs::exists(dir / "blocks.json"));

    CHECK(run("analyze " + d + "/corpus/a.mtx --json " + d + "/an.json --blocks") == 0);
    CHECK(fs::exists(dir / "an.json"));

    REQUIRE(run("train --corpus " + d + "/corpus --episodes 10 --threads 2 --out " + d + "/q.json") == 0);
    CHECK(slurp(dir / "q.json").find("ess-q1") != std::string::npos);

    CHECK(run("factor " + d + "/corpus/a.mtx --threads 2 --qtable " + d + "/q.json --trace " + d + "/t.csv") == 0);
    CHECK(slurp(dir / "t.csv").rfind("task_id,frontals,core,t_start_us,t_end_us,peak_bytes", 0) == 0);
    // table trained for 2 cores
    CHECK(run("factor " + d + "/corpus/a.mtx --threads 4 --qtable " + d + "/q.json") == 1);

    auto a = ess::load_matrix_market(dir / "corpus/a.mtx");
    std::vector<double> b(a.n(), 1.0);
    ess::save_vector(b, dir / "b.mtx");
    REQUIRE(run("solve " + d + "/corpus/a.mtx --rhs " + d + "/b.mtx --out " + d + "/x.mtx --threads 2 --policy static") == 0);
    auto x = ess::load_vector(dir / "x.mtx");
    CHECK(ess::residual_norm(a, x, b) <= 1e-10);

    CHECK(run("bench --corpus " + d + "/corpus --threads 1,2 --repeats 3 --out " + d + "/bench.csv") == 0);
    CHECK(fs::exists(dir / "bench.csv"));

    // singular input
    {
        std::ofstream s(dir / "sing.mtx");
        s << "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n2 1 1.0\n";
    }
    CHECK(run("factor " + d + "/sing.mtx") == 2);
    CHECK(run("factor " + d + "/missing.mtx") != 0);
    CHECK(run("nonsense") != 0);
    fs::remove_all(dir);
}
