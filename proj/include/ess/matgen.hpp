// Synthetic power-system style matrices: many small equipment blocks, a
// sparse network part, and one coupling link per block.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "ess/blocks.hpp"
#include "ess/sparse.hpp"

namespace ess {

enum class BlockPattern { Full, Tridiag, Arrow, Random };

struct BlockTemplate {
    Index size = 1;
    BlockPattern pattern = BlockPattern::Full;
    double density = 1.0;  ///< off-diagonal fill for Random
    Index count = 1;
    double value_min = 0.5;  ///< off-diagonal magnitudes drawn from [value_min, value_max]
    double value_max = 1.5;
};

struct GenSpec {
    std::vector<BlockTemplate> templates;
    Index network_size = 0;
    /// Extra block columns linked to the network, as a fraction; every block
    /// gets at least one link.
    double coupling_density = 0.0;
    /// Random chords added to the network grid, per bus.
    double chords = 0.1;
    std::uint64_t seed = 1;
    /// When set, block dimension / network_size must lie in [lo, hi].
    std::pair<double, double> ratio{0.0, 0.0};
};

/// Reads the JSON spec format:
/// {"seed":1, "network_size":100, "coupling_density":0.0, "chords":0.1,
///  "ratio":[3,5],
///  "templates":[{"size":4, "pattern":"full|tridiag|arrow|random",
///                "density":0.5, "count":50, "value_range":[0.5,1.5]}]}
GenSpec parse_gen_spec(const std::string& json_text);
GenSpec load_gen_spec(const std::filesystem::path& path);

struct Generated {
    CscMatrix matrix;
    BlockMap blocks;  ///< ground truth
};

/// Blocks come first in a seed-dependent interleaving of templates, the
/// network last. Every diagonal is twice its row's off-diagonal magnitude
/// sum, so the matrix is strictly diagonally dominant by rows.
Generated generate(const GenSpec& spec);

std::string blockmap_json(const BlockMap& m);

/// Same pattern, values drawn again from `seed`; diagonal dominance kept.
CscMatrix rerandomize_values(const CscMatrix& a, std::uint64_t seed, double lo = 0.5, double hi = 1.5);

}  // namespace ess
