#include "ardbn/npy.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace ardbn {

namespace {

constexpr std::uint8_t kMagic[6] = {0x93, 'N', 'U', 'M', 'P', 'Y'};
constexpr std::size_t kAlign = 64;
constexpr std::size_t kFixedPrefix = 10; // magic + version + header length

[[noreturn]] void fail(NpyErrorKind kind, const std::string& what)
{
    throw NpyError(kind, "npy: " + what);
}

std::string descr_of(NpyDtype d)
{
    return d == NpyDtype::U8 ? "|u1" : "<f8";
}

void skip_spaces(const std::string& s, std::size_t& pos)
{
    while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t'))
        ++pos;
}

/// Position right after `'key':` in the header dict.
std::size_t find_value(const std::string& header, const std::string& key)
{
    const std::string quoted[2] = {"'" + key + "'", "\"" + key + "\""};
    for (const auto& q : quoted) {
        auto pos = header.find(q);
        if (pos == std::string::npos)
            continue;
        pos += q.size();
        skip_spaces(header, pos);
        if (pos >= header.size() || header[pos] != ':')
            fail(NpyErrorKind::MalformedHeader, "missing ':' after key " + key);
        ++pos;
        skip_spaces(header, pos);
        return pos;
    }
    fail(NpyErrorKind::MalformedHeader, "header lacks key '" + key + "'");
}

struct Header {
    NpyDtype dtype;
    std::vector<std::size_t> shape;
};

Header parse_header(const std::string& header)
{
    Header h{};
    {
        auto pos = find_value(header, "descr");
        if (pos >= header.size() || (header[pos] != '\'' && header[pos] != '"'))
            fail(NpyErrorKind::MalformedHeader, "descr is not a string");
        const char quote = header[pos];
        const auto end = header.find(quote, pos + 1);
        if (end == std::string::npos)
            fail(NpyErrorKind::MalformedHeader, "unterminated descr");
        const std::string descr = header.substr(pos + 1, end - pos - 1);
        if (descr == "|u1" || descr == "u1" || descr == "<u1")
            h.dtype = NpyDtype::U8;
        else if (descr == "<f8")
            h.dtype = NpyDtype::F64;
        else
            fail(NpyErrorKind::UnsupportedDtype, "unsupported dtype '" + descr + "' (expected |u1 or <f8)");
    }
    {
        const auto pos = find_value(header, "fortran_order");
        if (header.compare(pos, 4, "True") == 0)
            fail(NpyErrorKind::FortranOrder, "fortran_order=True is not supported");
        if (header.compare(pos, 5, "False") != 0)
            fail(NpyErrorKind::MalformedHeader, "fortran_order is neither True nor False");
    }
    {
        auto pos = find_value(header, "shape");
        if (pos >= header.size() || header[pos] != '(')
            fail(NpyErrorKind::MalformedHeader, "shape is not a tuple");
        const auto end = header.find(')', pos);
        if (end == std::string::npos)
            fail(NpyErrorKind::MalformedHeader, "unterminated shape tuple");
        const std::string body = header.substr(pos + 1, end - pos - 1);
        std::size_t i = 0;
        while (i < body.size()) {
            while (i < body.size() && (body[i] == ' ' || body[i] == ','))
                ++i;
            if (i >= body.size())
                break;
            if (!std::isdigit(static_cast<unsigned char>(body[i])))
                fail(NpyErrorKind::MalformedHeader, "non-integer entry in shape");
            std::size_t v = 0;
            while (i < body.size() && std::isdigit(static_cast<unsigned char>(body[i])))
                v = v * 10 + static_cast<std::size_t>(body[i++] - '0');
            h.shape.push_back(v);
        }
    }
    return h;
}

std::uint64_t load_le64(const std::uint8_t* p)
{
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i)
        v = (v << 8) | p[i];
    return v;
}

void store_le64(std::uint8_t* p, std::uint64_t v)
{
    for (int i = 0; i < 8; ++i)
        p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

} // namespace

std::size_t NpyArray::element_count() const
{
    std::size_t n = 1;
    for (auto d : shape)
        n *= d;
    return n;
}

std::string npy_header(NpyDtype dtype, const std::vector<std::size_t>& shape)
{
    std::string dict = "{'descr': '" + descr_of(dtype) + "', 'fortran_order': False, 'shape': (";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        dict += std::to_string(shape[i]);
        if (shape.size() == 1 || i + 1 < shape.size())
            dict += ",";
        if (i + 1 < shape.size())
            dict += " ";
    }
    dict += "), }";
    const std::size_t unpadded = kFixedPrefix + dict.size() + 1;
    const std::size_t padding = (kAlign - unpadded % kAlign) % kAlign;
    dict.append(padding, ' ');
    dict += '\n';
    return dict;
}

std::vector<std::uint8_t> serialize_npy(const NpyArray& array)
{
    if (array.payload.size() != array.element_count() * array.item_size())
        fail(NpyErrorKind::ShapeMismatch, "payload size does not match shape");
    const std::string header = npy_header(array.dtype, array.shape);
    if (header.size() > 0xFFFF)
        fail(NpyErrorKind::MalformedHeader, "header too long for format version 1.0");
    std::vector<std::uint8_t> out(kFixedPrefix + header.size() + array.payload.size());
    auto it = std::copy(std::begin(kMagic), std::end(kMagic), out.begin());
    *it++ = 1;
    *it++ = 0;
    *it++ = static_cast<std::uint8_t>(header.size() & 0xFF);
    *it++ = static_cast<std::uint8_t>(header.size() >> 8);
    it = std::copy(header.begin(), header.end(), it);
    std::copy(array.payload.begin(), array.payload.end(), it);
    return out;
}

NpyArray parse_npy(std::span<const std::uint8_t> bytes)
{
    if (bytes.size() < 6 || std::memcmp(bytes.data(), kMagic, 6) != 0)
        fail(NpyErrorKind::BadMagic, "bad magic string (not an NPY file)");
    if (bytes.size() < kFixedPrefix)
        fail(NpyErrorKind::MalformedHeader, "file ends inside the preamble");
    if (bytes[6] != 1 || bytes[7] != 0)
        fail(NpyErrorKind::UnsupportedVersion, "unsupported format version " + std::to_string(bytes[6]) + "."
                                                   + std::to_string(bytes[7]) + " (only 1.0)");
    const std::size_t header_len = static_cast<std::size_t>(bytes[8]) | (static_cast<std::size_t>(bytes[9]) << 8);
    if (bytes.size() < kFixedPrefix + header_len)
        fail(NpyErrorKind::MalformedHeader, "file ends inside the header");
    const std::string header(reinterpret_cast<const char*>(bytes.data() + kFixedPrefix), header_len);
    const Header h = parse_header(header);

    NpyArray arr;
    arr.dtype = h.dtype;
    arr.shape = h.shape;
    const std::size_t expected = arr.element_count() * arr.item_size();
    const std::size_t available = bytes.size() - kFixedPrefix - header_len;
    if (available != expected)
        fail(NpyErrorKind::ShapeMismatch, "payload has " + std::to_string(available) + " bytes but the header shape needs "
                                              + std::to_string(expected));
    arr.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(kFixedPrefix + header_len), bytes.end());
    return arr;
}

NpyArray npy_from_batch(const SequenceBatch& batch, NpyDtype dtype)
{
    detail::require(batch.consistent(), "npy_from_batch: inconsistent batch");
    NpyArray arr;
    arr.dtype = dtype;
    const auto side = static_cast<Index>(std::llround(std::sqrt(static_cast<double>(batch.dim))));
    const auto T = static_cast<std::size_t>(batch.T), n = static_cast<std::size_t>(batch.n);
    if (side * side == batch.dim && batch.dim > 0)
        arr.shape = {T, n, static_cast<std::size_t>(side), static_cast<std::size_t>(side)};
    else
        arr.shape = {T, n, static_cast<std::size_t>(batch.dim)};
    arr.payload.resize(arr.element_count() * arr.item_size());
    std::size_t offset = 0;
    for (Index t = 0; t < batch.T; ++t) {
        for (Index i = 0; i < batch.n; ++i) {
            const auto f = batch.frame(i, t);
            for (Index p = 0; p < batch.dim; ++p) {
                const double v = f(p);
                if (dtype == NpyDtype::U8) {
                    detail::require(v >= 0.0 && v <= 1.0, "npy_from_batch: pixel outside [0,1]");
                    arr.payload[offset++] = static_cast<std::uint8_t>(std::lround(v * 255.0));
                } else {
                    store_le64(arr.payload.data() + offset, std::bit_cast<std::uint64_t>(v));
                    offset += 8;
                }
            }
        }
    }
    return arr;
}

SequenceBatch batch_from_npy(const NpyArray& arr)
{
    if (arr.shape.size() != 3 && arr.shape.size() != 4)
        fail(NpyErrorKind::ShapeMismatch, "expected a (T, n, side, side) or (T, n, dim) array, got rank "
                                              + std::to_string(arr.shape.size()));
    if (arr.payload.size() != arr.element_count() * arr.item_size())
        fail(NpyErrorKind::ShapeMismatch, "payload size does not match shape");
    const auto T = static_cast<Index>(arr.shape[0]);
    const auto n = static_cast<Index>(arr.shape[1]);
    const auto dim = static_cast<Index>(arr.shape.size() == 4 ? arr.shape[2] * arr.shape[3] : arr.shape[2]);
    SequenceBatch batch(n, T, dim);
    std::size_t offset = 0;
    for (Index t = 0; t < T; ++t) {
        for (Index i = 0; i < n; ++i) {
            auto f = batch.frame(i, t);
            for (Index p = 0; p < dim; ++p) {
                if (arr.dtype == NpyDtype::U8) {
                    f(p) = static_cast<double>(arr.payload[offset++]) / 255.0;
                } else {
                    f(p) = std::bit_cast<double>(load_le64(arr.payload.data() + offset));
                    offset += 8;
                }
            }
        }
    }
    return batch;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail(NpyErrorKind::Io, "cannot open " + path.string());
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        fail(NpyErrorKind::Io, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        fail(NpyErrorKind::Io, "write failed for " + path.string());
}

void write_npy(const SequenceBatch& batch, const std::filesystem::path& path, NpyDtype dtype)
{
    const auto bytes = serialize_npy(npy_from_batch(batch, dtype));
    write_file_bytes(path, bytes);
}

SequenceBatch read_npy(const std::filesystem::path& path)
{
    const auto bytes = read_file_bytes(path);
    return batch_from_npy(parse_npy(bytes));
}

} // namespace ardbn
