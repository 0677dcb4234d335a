#include "ardbn/dataio.hpp"

#include "ardbn/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace ardbn {

namespace {

Glyph glyph_from_rows(const std::array<const char*, 5>& rows)
{
    Glyph g;
    g.rows = 5;
    g.cols = 5;
    for (const char* row : rows)
        for (int c = 0; c < 5; ++c)
            g.bits.push_back(row[c] == '#' ? 1 : 0);
    return g;
}

} // namespace

const std::vector<Glyph>& builtin_glyphs()
{
    static const std::vector<Glyph> glyphs = {
        glyph_from_rows({".###.", "#...#", "#...#", "#...#", ".###."}),
        glyph_from_rows({"..#..", ".##..", "..#..", "..#..", ".###."}),
        glyph_from_rows({"####.", "....#", ".###.", "#....", "#####"}),
        glyph_from_rows({"####.", "....#", ".###.", "....#", "####."}),
        glyph_from_rows({"#..#.", "#..#.", "#####", "...#.", "...#."}),
        glyph_from_rows({"#####", "#....", "####.", "....#", "####."}),
        glyph_from_rows({".###.", "#....", "####.", "#...#", ".###."}),
        glyph_from_rows({"#####", "...#.", "..#..", ".#...", ".#..."}),
        glyph_from_rows({".###.", "#...#", ".###.", "#...#", ".###."}),
        glyph_from_rows({".###.", "#...#", ".####", "....#", ".###."}),
    };
    return glyphs;
}

Glyph parse_pbm(const std::string& text)
{
    // Strip comments, then tokenize on whitespace.
    std::string cleaned;
    std::istringstream lines(text);
    for (std::string line; std::getline(lines, line);) {
        const auto hash = line.find('#');
        cleaned += line.substr(0, hash);
        cleaned += '\n';
    }
    std::istringstream in(cleaned);
    std::string magic;
    in >> magic;
    if (magic != "P1")
        throw ConfigError("PBM: expected magic P1, found '" + magic + "'");
    Index cols = 0, rows = 0;
    if (!(in >> cols >> rows) || cols <= 0 || rows <= 0)
        throw ConfigError("PBM: invalid width/height");
    Glyph g;
    g.rows = rows;
    g.cols = cols;
    g.bits.reserve(static_cast<std::size_t>(rows * cols));
    char ch = 0;
    while (static_cast<Index>(g.bits.size()) < rows * cols && in.get(ch)) {
        if (ch == '0' || ch == '1')
            g.bits.push_back(ch == '1' ? 1 : 0);
        else if (!std::isspace(static_cast<unsigned char>(ch)))
            throw ConfigError(std::string("PBM: unexpected character '") + ch + "'");
    }
    if (static_cast<Index>(g.bits.size()) != rows * cols)
        throw ConfigError("PBM: pixel data truncated");
    return g;
}

Glyph read_pbm(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open glyph file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_pbm(ss.str());
}

void SpriteSequenceConfig::validate() const
{
    if (patch < 1)
        throw ConfigError("patch must be >= 1");
    if (n_frames < 1)
        throw ConfigError("n_frames must be >= 1");
    if (n_sprites < 1)
        throw ConfigError("n_sprites must be >= 1");
    if (sprite_set.empty())
        throw ConfigError("sprite set is empty");
    for (const auto& g : sprite_set) {
        if (g.rows >= patch || g.cols >= patch)
            throw ConfigError("sprite of size " + std::to_string(g.rows) + "x" + std::to_string(g.cols)
                              + " does not fit strictly inside a " + std::to_string(patch) + "x"
                              + std::to_string(patch) + " patch");
        if (static_cast<Index>(g.bits.size()) != g.rows * g.cols)
            throw ConfigError("sprite bitmap has inconsistent size");
    }
    if (!(speed_min >= 0.0) || !(speed_max >= speed_min) || !std::isfinite(speed_max))
        throw ConfigError("speed range must satisfy 0 <= speed_min <= speed_max");
}

namespace {

/// Reflects a coordinate back into [0, limit], flipping the velocity on
/// every bounce. Only the sign of the velocity changes.
void reflect(double& pos, double& vel, double limit)
{
    while (pos < 0.0 || pos > limit) {
        if (pos < 0.0)
            pos = -pos;
        else
            pos = 2.0 * limit - pos;
        vel = -vel;
        if (limit == 0.0) {
            pos = 0.0;
            break;
        }
    }
}

} // namespace

std::vector<SpriteTrack> simulate_tracks(const SpriteSequenceConfig& cfg, std::uint64_t index)
{
    cfg.validate();
    Rng rng(cfg.seed ^ index);
    std::vector<SpriteTrack> tracks;
    tracks.reserve(static_cast<std::size_t>(cfg.n_sprites));
    const auto T = static_cast<std::size_t>(cfg.n_frames);
    for (Index s = 0; s < cfg.n_sprites; ++s) {
        SpriteTrack tr;
        tr.glyph = static_cast<Index>(uniform_index(rng, cfg.sprite_set.size()));
        const Glyph& g = cfg.sprite_set[static_cast<std::size_t>(tr.glyph)];
        const double lim_x = static_cast<double>(cfg.patch - g.cols);
        const double lim_y = static_cast<double>(cfg.patch - g.rows);
        double x = uniform01(rng) * lim_x;
        double y = uniform01(rng) * lim_y;
        const double angle = 2.0 * std::numbers::pi * uniform01(rng);
        const double speed = cfg.speed_min + (cfg.speed_max - cfg.speed_min) * uniform01(rng);
        double vx = speed * std::cos(angle);
        double vy = speed * std::sin(angle);
        tr.x.reserve(T);
        tr.y.reserve(T);
        for (std::size_t t = 0; t < T; ++t) {
            tr.x.push_back(x);
            tr.y.push_back(y);
            x += vx;
            y += vy;
            if (cfg.bounce) {
                reflect(x, vx, lim_x);
                reflect(y, vy, lim_y);
            }
            tr.vx.push_back(vx);
            tr.vy.push_back(vy);
        }
        tracks.push_back(std::move(tr));
    }
    return tracks;
}

Eigen::MatrixXd render_tracks(const SpriteSequenceConfig& cfg, const std::vector<SpriteTrack>& tracks)
{
    const Index P = cfg.patch;
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(P * P, cfg.n_frames);
    for (const auto& tr : tracks) {
        const Glyph& g = cfg.sprite_set.at(static_cast<std::size_t>(tr.glyph));
        for (Index t = 0; t < cfg.n_frames; ++t) {
            const auto top = static_cast<Index>(std::lround(tr.y[static_cast<std::size_t>(t)]));
            const auto left = static_cast<Index>(std::lround(tr.x[static_cast<std::size_t>(t)]));
            for (Index r = 0; r < g.rows; ++r) {
                for (Index c = 0; c < g.cols; ++c) {
                    const Index pr = top + r, pc = left + c;
                    if (!g.at(r, c) || pr < 0 || pr >= P || pc < 0 || pc >= P)
                        continue;
                    out(pr * P + pc, t) = 1.0; // max of {0,1} values
                }
            }
        }
    }
    return out;
}

SequenceBatch generate_dataset(const SpriteSequenceConfig& cfg, Index n)
{
    cfg.validate();
    detail::require(n >= 1, "generate_dataset: n must be >= 1");
    SequenceBatch batch(n, cfg.n_frames, cfg.patch * cfg.patch);
    for (Index i = 0; i < n; ++i)
        batch.sequence(i) = render_tracks(cfg, simulate_tracks(cfg, static_cast<std::uint64_t>(i)));
    return batch;
}

std::vector<Index> split_permutation(Index n, std::uint64_t seed)
{
    std::vector<Index> perm(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i)
        perm[static_cast<std::size_t>(i)] = i;
    Rng rng(seed);
    for (std::size_t i = perm.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(uniform_index(rng, i));
        std::swap(perm[i - 1], perm[j]);
    }
    return perm;
}

std::pair<SequenceBatch, SequenceBatch> split(const SequenceBatch& batch, Index n_train, Index n_test,
                                              std::uint64_t seed)
{
    detail::require(n_train >= 0 && n_test >= 0 && n_train + n_test <= batch.n,
                    "split: n_train + n_test exceeds the batch size " + std::to_string(batch.n));
    const auto perm = split_permutation(batch.n, seed);
    const std::vector<Index> train_idx(perm.begin(), perm.begin() + n_train);
    const std::vector<Index> test_idx(perm.begin() + n_train, perm.begin() + n_train + n_test);
    return {batch.select(train_idx), batch.select(test_idx)};
}

} // namespace ardbn
