#pragma once

// NPY v1.0 container I/O.
//
// Layout: magic "\x93NUMPY", version bytes (1, 0), little-endian uint16
// header length, then an ASCII dict
//   {'descr': '|u1', 'fortran_order': False, 'shape': (20, 3, 64, 64), }
// padded with spaces and terminated by '\n' so the preamble length is a
// multiple of 64, followed by the C-order payload.
//
// Sequence batches are stored in the canonical Moving MNIST layout
// (T, n, side, side) when the frame is square, (T, n, dim) otherwise.

#include "ardbn/sequence.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ardbn {

enum class NpyErrorKind { Io, BadMagic, UnsupportedVersion, MalformedHeader, UnsupportedDtype, FortranOrder, ShapeMismatch };

class NpyError : public std::runtime_error {
public:
    NpyError(NpyErrorKind kind, const std::string& what)
        : std::runtime_error(what)
        , kind_(kind)
    {
    }

    NpyErrorKind kind() const { return kind_; }

private:
    NpyErrorKind kind_;
};

enum class NpyDtype { U8, F64 };

struct NpyArray {
    NpyDtype dtype = NpyDtype::U8;
    std::vector<std::size_t> shape;
    std::vector<std::uint8_t> payload; ///< raw little-endian C-order bytes

    std::size_t element_count() const;
    std::size_t item_size() const { return dtype == NpyDtype::U8 ? 1 : 8; }
};

/// The padded header dict including the trailing newline.
std::string npy_header(NpyDtype dtype, const std::vector<std::size_t>& shape);

std::vector<std::uint8_t> serialize_npy(const NpyArray& array);
NpyArray parse_npy(std::span<const std::uint8_t> bytes);

NpyArray npy_from_batch(const SequenceBatch& batch, NpyDtype dtype = NpyDtype::U8);
SequenceBatch batch_from_npy(const NpyArray& array);

void write_npy(const SequenceBatch& batch, const std::filesystem::path& path, NpyDtype dtype = NpyDtype::U8);
SequenceBatch read_npy(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

} // namespace ardbn
