#pragma once

// Synthetic moving-sprite sequences in the style of Moving MNIST: small
// binary glyphs placed at random positions inside a square patch, each
// moving with a random direction and speed and reflecting off the walls.

#include "ardbn/numeric.hpp"
#include "ardbn/sequence.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace ardbn {

/// Row-major binary bitmap.
struct Glyph {
    Index rows = 0;
    Index cols = 0;
    std::vector<std::uint8_t> bits;

    bool at(Index r, Index c) const { return bits[static_cast<std::size_t>(r * cols + c)] != 0; }
};

/// Ten 5x5 digit-like glyphs.
const std::vector<Glyph>& builtin_glyphs();

/// Parses an ASCII PBM (P1) bitmap.
Glyph parse_pbm(const std::string& text);
Glyph read_pbm(const std::filesystem::path& path);

struct SpriteSequenceConfig {
    Index patch = 16;
    Index n_frames = 20;
    Index n_sprites = 1;
    std::vector<Glyph> sprite_set = builtin_glyphs();
    double speed_min = 1.0;
    double speed_max = 2.0;
    std::uint64_t seed = 0;
    bool bounce = true;

    /// Throws ConfigError describing the first violated invariant.
    void validate() const;
};

/// Continuous trajectory of one sprite: top-left corner per frame.
struct SpriteTrack {
    Index glyph = 0;
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> vx; ///< velocity applied after frame t
    std::vector<double> vy;
};

/// Trajectories of every sprite of sequence `index`. Each sequence draws
/// from its own engine seeded with seed ^ index.
std::vector<SpriteTrack> simulate_tracks(const SpriteSequenceConfig& cfg, std::uint64_t index);

/// Rasterizes tracks into a patch^2 x n_frames matrix; overlapping sprites
/// combine by per-pixel max. Pixels outside the patch are dropped.
Eigen::MatrixXd render_tracks(const SpriteSequenceConfig& cfg, const std::vector<SpriteTrack>& tracks);

SequenceBatch generate_dataset(const SpriteSequenceConfig& cfg, Index n);

/// Seeded shuffle then split into disjoint (train, test).
std::pair<SequenceBatch, SequenceBatch> split(const SequenceBatch& batch, Index n_train, Index n_test,
                                              std::uint64_t seed);

/// Permutation used by `split`, exposed for audits.
std::vector<Index> split_permutation(Index n, std::uint64_t seed);

} // namespace ardbn
