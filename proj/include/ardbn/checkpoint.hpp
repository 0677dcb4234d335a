#pragma once

// Versioned model checkpoints.
//
//   bytes 0..7   "ARDBNCKP"
//   bytes 8..11  little-endian uint32 header length H
//   next H bytes ASCII header, one `key = value` per line: format_version,
//                the training/adaptation config snapshot, seed, depth,
//                `layer = <n_visible> <n_hidden> <n_context> <activation>`
//                per layer, `events = <count>` then one
//                `event = <kind> <layer> <step> <epoch> <neuron> <wd_c> <wd_W> <energy>`
//                per adaptation event
//   then per layer, nine blocks in the order b, c, W, u0, u_bias, W_uv,
//   W_uh, W_vu, W_uu: a little-endian uint64 element count followed by that
//   many little-endian IEEE-754 doubles, matrices in row-major order.

#include "ardbn/dbn.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

namespace ardbn {

inline constexpr int kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::vector<std::uint8_t> serialize_checkpoint(const DbnModel& model);
DbnModel deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const DbnModel& model, const std::filesystem::path& path);
DbnModel load_checkpoint(const std::filesystem::path& path);

/// One JSON object per event, newline-terminated.
std::string events_to_jsonl(const std::vector<AdaptationEvent>& events);

} // namespace ardbn
