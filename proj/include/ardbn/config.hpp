#pragma once

// Flat key = value configuration shared by the CLI commands. Blank lines
// and text after '#' are ignored. Keys:
//
//   data geometry   patch, n_frames, n_sprites, speed_min, speed_max,
//                   bounce, data_seed, glyph_files (';'-separated PBM paths)
//   training        lr, epochs_per_layer, cd_k, batch_size, seed,
//                   clip_norm, init_std, initial_hidden, n_context,
//                   activation (tanh|sigmoid)
//   adaptation      gamma, theta_gen, theta_ann, theta_wd_layer,
//                   theta_energy_layer, min_steps_before_gen, max_hidden,
//                   max_layers, noise_scale
//   evaluation      n_prime, n_pred, k_gen, threshold
//
// Optional keys accept the value `auto` for their documented default.

#include "ardbn/dataio.hpp"
#include "ardbn/dbn.hpp"
#include "ardbn/structural.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace ardbn {

struct RunConfig {
    SpriteSequenceConfig data;
    std::vector<std::string> glyph_files;
    TrainConfig train;
    AdaptationConfig adapt;
    Index n_prime = 10;
    Index n_pred = 10;
    int k_gen = 1;
    double threshold = 0.5;
};

/// Parses config text on top of the defaults. Glyph files are recorded
/// but not loaded. Throws ConfigError on unknown keys or bad values.
RunConfig parse_config(const std::string& text);

/// Reads a config file and loads its glyph files relative to the file.
RunConfig load_config(const std::filesystem::path& path);

/// Sets one key; throws ConfigError.
void apply_config_key(RunConfig& cfg, const std::string& key, const std::string& value);

/// Canonical text form (every key, fixed order, round-trip exact doubles).
std::string to_config_text(const RunConfig& cfg);

/// Only the training and adaptation keys, as stored in checkpoints.
std::string training_config_text(const TrainConfig& train, const AdaptationConfig& adapt);

/// %.17g formatting: parses back to the same double.
std::string format_double(double v);

} // namespace ardbn
