#include "ess/matgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"

namespace ess {

using nlohmann::json;

namespace {

BlockPattern pattern_from_string(const std::string& s) {
    if (s == "full") return BlockPattern::Full;
    if (s == "tridiag") return BlockPattern::Tridiag;
    if (s == "arrow") return BlockPattern::Arrow;
    if (s == "random") return BlockPattern::Random;
    throw Error("unknown block pattern: " + s);
}

void validate(const GenSpec& s) {
    for (const auto& t : s.templates) {
        if (t.size < 1) throw Error("block size must be at least 1");
        if (t.count < 0) throw Error("block count must be non-negative");
        if (!(t.density > 0.0 && t.density <= 1.0)) throw Error("density must lie in (0, 1]");
        if (!(t.value_min > 0.0 && t.value_min <= t.value_max)) throw Error("value range must satisfy 0 < min <= max");
    }
    if (s.network_size < 0) throw Error("network size must be non-negative");
    if (!(s.coupling_density >= 0.0 && s.coupling_density <= 1.0)) throw Error("coupling density must lie in [0, 1]");
    if (s.coupling_density > 0.0 && s.network_size == 0) throw Error("coupling requested without a network part");
    if (!(s.chords >= 0.0)) throw Error("chords must be non-negative");
}

// Local symmetric off-diagonal pattern (i < j pairs) of a template.
std::vector<std::pair<Index, Index>> template_pairs(const BlockTemplate& t, std::mt19937_64& rng) {
    std::vector<std::pair<Index, Index>> p;
    const Index m = t.size;
    switch (t.pattern) {
        case BlockPattern::Full:
            for (Index j = 0; j < m; ++j)
                for (Index i = 0; i < j; ++i) p.emplace_back(i, j);
            break;
        case BlockPattern::Tridiag:
            for (Index i = 0; i + 1 < m; ++i) p.emplace_back(i, i + 1);
            break;
        case BlockPattern::Arrow:
            for (Index i = 0; i + 1 < m; ++i) p.emplace_back(i, m - 1);
            break;
        case BlockPattern::Random: {
            // a path keeps the block connected
            std::uniform_real_distribution<double> u(0.0, 1.0);
            for (Index j = 0; j < m; ++j)
                for (Index i = 0; i < j; ++i)
                    if (i + 1 == j || u(rng) < t.density) p.emplace_back(i, j);
            break;
        }
    }
    return p;
}

}  // namespace

GenSpec parse_gen_spec(const std::string& text) {
    GenSpec s;
    try {
        const json j = json::parse(text);
        s.seed = j.value("seed", std::uint64_t{1});
        s.network_size = j.value("network_size", Index{0});
        s.coupling_density = j.value("coupling_density", 0.0);
        s.chords = j.value("chords", 0.1);
        if (j.contains("ratio")) {
            const auto r = j.at("ratio").get<std::vector<double>>();
            if (r.size() != 2) throw Error("ratio must be [lo, hi]");
            s.ratio = {r[0], r[1]};
        }
        for (const auto& tj : j.at("templates")) {
            BlockTemplate t;
            t.size = tj.value("size", Index{1});
            t.pattern = pattern_from_string(tj.value("pattern", std::string("full")));
            t.density = tj.value("density", 1.0);
            t.count = tj.value("count", Index{1});
            if (tj.contains("value_range")) {
                const auto r = tj.at("value_range").get<std::vector<double>>();
                if (r.size() != 2) throw Error("value_range must be [min, max]");
                t.value_min = r[0];
                t.value_max = r[1];
            }
            s.templates.push_back(t);
        }
    } catch (const json::exception& e) {
        throw Error(std::string("bad generator spec: ") + e.what());
    }
    validate(s);
    return s;
}

GenSpec load_gen_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_gen_spec(ss.str());
}

Generated generate(const GenSpec& spec) {
    validate(spec);
    std::mt19937_64 rng(spec.seed);

    std::vector<std::vector<std::pair<Index, Index>>> pairs;
    for (const auto& t : spec.templates) pairs.push_back(template_pairs(t, rng));

    std::vector<Index> kinds;
    for (std::size_t t = 0; t < spec.templates.size(); ++t)
        kinds.insert(kinds.end(), spec.templates[t].count, static_cast<Index>(t));
    for (std::size_t i = kinds.size(); i > 1; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i - 1);
        std::swap(kinds[i - 1], kinds[pick(rng)]);
    }

    Index block_dim = 0;
    for (Index k : kinds) block_dim += spec.templates[k].size;
    const Index nn = spec.network_size;
    const Index n = block_dim + nn;
    if (n == 0) throw Error("spec produces an empty matrix");
    if (spec.ratio.second > 0.0) {
        const double r = nn > 0 ? static_cast<double>(block_dim) / static_cast<double>(nn) : HUGE_VAL;
        if (r < spec.ratio.first || r > spec.ratio.second)
            throw Error("block part is " + std::to_string(r) + " times the network part, outside the requested ratio");
    }

    std::vector<std::pair<Index, Index>> edges;  // symmetric off-diagonal pairs
    std::vector<double> lo, hi;                  // value range per edge
    auto add = [&](Index i, Index j, double a, double b) {
        edges.emplace_back(i, j);
        lo.push_back(a);
        hi.push_back(b);
    };

    Generated g;
    Index at = 0;
    for (Index k : kinds) {
        const auto& t = spec.templates[k];
        std::vector<Index> cols(t.size);
        for (Index c = 0; c < t.size; ++c) cols[c] = at + c;
        for (auto [i, j] : pairs[k]) add(at + i, at + j, t.value_min, t.value_max);
        g.blocks.blocks.push_back(std::move(cols));
        at += t.size;
    }

    if (nn > 0) {
        const Index w = static_cast<Index>(std::ceil(std::sqrt(static_cast<double>(nn))));
        std::set<std::pair<Index, Index>> net;
        for (Index v = 0; v < nn; ++v) {
            if ((v % w) + 1 < w && v + 1 < nn) net.emplace(v, v + 1);
            if (v + w < nn) net.emplace(v, v + w);
        }
        const Index chords = static_cast<Index>(std::llround(spec.chords * static_cast<double>(nn)));
        std::uniform_int_distribution<Index> bus(0, nn - 1);
        for (Index c = 0, tries = 0; c < chords && nn > 1 && tries < 100 * chords; ++tries) {
            Index a = bus(rng), b = bus(rng);
            if (a == b) continue;
            if (a > b) std::swap(a, b);
            if (net.emplace(a, b).second) ++c;
        }
        for (auto [a, b] : net) add(block_dim + a, block_dim + b, 0.5, 1.5);

        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (const auto& cols : g.blocks.blocks) {
            std::uniform_int_distribution<std::size_t> pick(0, cols.size() - 1);
            const std::size_t first = pick(rng);
            for (std::size_t c = 0; c < cols.size(); ++c)
                if (c == first || u(rng) < spec.coupling_density) add(cols[c], block_dim + bus(rng), 0.5, 1.5);
        }
    }
    for (Index v = block_dim; v < n; ++v) g.blocks.coupling.push_back(v);

    std::vector<CscMatrix::Triplet> trip;
    std::vector<double> rowsum(n, 0.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t e = 0; e < edges.size(); ++e) {
        auto [i, j] = edges[e];
        for (int side = 0; side < 2; ++side) {
            double v = lo[e] + (hi[e] - lo[e]) * u(rng);
            if (u(rng) < 0.5) v = -v;
            const Index r = side ? j : i, c = side ? i : j;
            trip.push_back({r, c, v});
            rowsum[r] += std::abs(v);
        }
    }
    for (Index i = 0; i < n; ++i) trip.push_back({i, i, rowsum[i] > 0.0 ? 2.0 * rowsum[i] : 1.0});
    g.matrix = CscMatrix::from_triplets(n, trip);
    return g;
}

std::string blockmap_json(const BlockMap& m) {
    json j;
    j["blocks"] = m.blocks;
    j["coupling"] = m.coupling;
    return j.dump() + "\n";
}

CscMatrix rerandomize_values(const CscMatrix& a, std::uint64_t seed, double lo, double hi) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto t = a.triplets();
    std::vector<double> rowsum(a.n(), 0.0);
    for (auto& e : t) {
        if (e.row == e.col) continue;
        e.value = (lo + (hi - lo) * u(rng)) * (u(rng) < 0.5 ? -1.0 : 1.0);
        rowsum[e.row] += std::abs(e.value);
    }
    for (auto& e : t)
        if (e.row == e.col) e.value = rowsum[e.row] > 0.0 ? 2.0 * rowsum[e.row] : 1.0;
    return CscMatrix::from_triplets(a.n(), t);
}

}  // namespace ess
