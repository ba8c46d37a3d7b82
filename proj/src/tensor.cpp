#include "scod/tensor.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace scod {

namespace {

constexpr std::uint8_t kMagic[4] = {0x53, 0x43, 0x54, 0x31};  // "SCT1"
constexpr std::uint8_t kDtypeF32 = 0x01;

static_assert(std::endian::native == std::endian::little,
              "SCT1 reader assumes a little-endian host");

std::uint64_t checked_element_count(const std::vector<std::uint64_t>& dims, std::size_t offset) {
    std::uint64_t n = 1;
    for (std::uint64_t d : dims) {
        if (d == 0) throw DataError("bad_dims", "zero-sized dimension", offset);
        if (n > std::numeric_limits<std::uint64_t>::max() / d)
            throw DataError("dim_overflow", "dimension product overflows u64", offset);
        n *= d;
    }
    if (n > std::numeric_limits<std::uint64_t>::max() / 4)
        throw DataError("dim_overflow", "payload byte count overflows u64", offset);
    return n;
}

void check_finite(std::span<const float> values, std::size_t payload_offset) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i]))
            throw DataError("nonfinite", "non-finite value in payload", payload_offset + 4 * i);
    }
}

struct ByteReader {
    std::span<const std::uint8_t> bytes;
    std::size_t pos = 0;

    void read(void* dst, std::size_t n, const char* what) {
        if (bytes.size() - pos < n)
            throw DataError("truncated", std::string("truncated while reading ") + what, pos);
        std::memcpy(dst, bytes.data() + pos, n);
        pos += n;
    }
};

TensorF32 decode_impl(std::span<const std::uint8_t> bytes, bool allow_nonfinite) {
    ByteReader r{bytes};

    std::uint8_t magic[4];
    r.read(magic, 4, "magic");
    if (std::memcmp(magic, kMagic, 4) != 0) throw DataError("bad_magic", "not an SCT1 file", 0);

    std::uint8_t dtype = 0, rank = 0, pad[2] = {0, 0};
    r.read(&dtype, 1, "dtype");
    if (dtype != kDtypeF32) throw DataError("bad_dtype", "unsupported dtype code", 4);
    r.read(&rank, 1, "rank");
    if (rank < 1 || rank > kTensorMaxRank) throw DataError("bad_rank", "rank outside [1,4]", 5);
    r.read(pad, 2, "padding");
    if (pad[0] != 0 || pad[1] != 0) throw DataError("bad_padding", "nonzero padding bytes", 6);

    std::vector<std::uint64_t> dims(rank);
    for (std::uint8_t i = 0; i < rank; ++i) r.read(&dims[i], 8, "dims");

    const std::uint64_t count = checked_element_count(dims, kTensorHeaderBytes);
    if (count * 4 > bytes.size() - r.pos)
        throw DataError("truncated", "declared payload larger than file", r.pos);

    std::vector<float> data(count);
    if (count > 0) r.read(data.data(), count * 4, "payload");
    if (r.pos != bytes.size())
        throw DataError("trailing_bytes", "unexpected bytes after payload", r.pos);

    if (!allow_nonfinite) check_finite(data, kTensorHeaderBytes + 8 * rank);

    TensorF32 t;
    t.dims = std::move(dims);
    t.data = std::move(data);
    return t;
}

}  // namespace

TensorF32::TensorF32(std::vector<std::uint64_t> d, std::vector<float> values)
    : dims(std::move(d)), data(std::move(values)) {
    if (dims.empty() || dims.size() > kTensorMaxRank)
        throw DataError("bad_rank", "rank outside [1,4]");
    const std::uint64_t n = checked_element_count(dims, DataError::npos);
    if (n != data.size()) throw DataError("bad_dims", "payload length does not match dims");
}

void DatasetBundle::validate() const {
    if (logits.rank() != 2) throw DataError("bad_dims", name + ": logits must be rank 2");
    if (features.rank() != 2) throw DataError("bad_dims", name + ": features must be rank 2");
    if (logits.rows() != features.rows())
        throw DataError("bad_dims", name + ": logits and features disagree on sample count");
    if (labels && labels->labels.size() != logits.rows())
        throw DataError("bad_dims", name + ": label count does not match sample count");
    if (labels) {
        for (std::int64_t y : labels->labels) {
            if (y < 0 || static_cast<std::uint64_t>(y) >= num_classes())
                throw DataError("bad_label", name + ": label outside [0, K)");
        }
    }
}

std::size_t tensor_file_size(const TensorF32& t) {
    return kTensorHeaderBytes + 8 * t.rank() + 4 * t.data.size();
}

std::vector<std::uint8_t> encode_tensor(const TensorF32& t) {
    if (t.dims.empty() || t.dims.size() > kTensorMaxRank)
        throw DataError("bad_rank", "rank outside [1,4]");
    std::vector<std::uint8_t> out;
    out.reserve(tensor_file_size(t));
    out.insert(out.end(), kMagic, kMagic + 4);
    out.push_back(kDtypeF32);
    out.push_back(static_cast<std::uint8_t>(t.rank()));
    out.push_back(0);
    out.push_back(0);
    for (std::uint64_t d : t.dims) {
        const auto* p = reinterpret_cast<const std::uint8_t*>(&d);
        out.insert(out.end(), p, p + 8);
    }
    const auto* p = reinterpret_cast<const std::uint8_t*>(t.data.data());
    out.insert(out.end(), p, p + 4 * t.data.size());
    return out;
}

TensorF32 decode_tensor(std::span<const std::uint8_t> bytes, bool allow_nonfinite) {
    return decode_impl(bytes, allow_nonfinite);
}

TensorF32 load_tensor(const std::filesystem::path& path, bool allow_nonfinite) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("io", "cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    if (in.bad()) throw DataError("io", "read failure on " + path.string());
    try {
        return decode_impl(bytes, allow_nonfinite);
    } catch (const DataError& e) {
        throw DataError(e.code(), path.string() + ": " + e.what(), DataError::npos);
    }
}

void save_tensor(const TensorF32& t, const std::filesystem::path& path) {
    const std::vector<std::uint8_t> bytes = encode_tensor(t);
    // Temp + rename: concurrent writers never expose a partial file.
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("io", "cannot open " + tmp.string() + " for writing");
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
        if (!out) throw DataError("io", "write failure on " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

TensorF32 load_csv_matrix(const std::filesystem::path& path,
                          std::optional<std::uint64_t> expected_cols) {
    std::ifstream in(path);
    if (!in) throw DataError("io", "cannot open " + path.string());

    std::vector<float> values;
    std::uint64_t cols = expected_cols.value_or(0);
    std::uint64_t rows = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() && in.peek() == std::char_traits<char>::eof()) break;
        std::uint64_t col = 0;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = line.find(',', start);
            const std::string cell =
                line.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
            try {
                std::size_t used = 0;
                const float v = std::stof(cell, &used);
                while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used])))
                    ++used;
                if (used != cell.size()) throw std::invalid_argument(cell);
                values.push_back(v);
            } catch (const std::exception&) {
                throw DataError("bad_cell", "non-numeric cell at row " + std::to_string(rows) +
                                                ", col " + std::to_string(col));
            }
            ++col;
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (rows == 0 && !expected_cols) cols = col;
        if (col != cols)
            throw DataError("ragged_row", "row " + std::to_string(rows) + " has " +
                                              std::to_string(col) + " cells, expected " +
                                              std::to_string(cols));
        ++rows;
    }
    if (rows == 0) throw DataError("bad_dims", path.string() + ": empty CSV");
    return TensorF32({rows, cols}, std::move(values));
}

LabelVec load_labels(const std::filesystem::path& path, std::uint64_t num_classes) {
    const TensorF32 t = load_tensor(path);
    if (t.rank() != 1) throw DataError("bad_dims", path.string() + ": labels must be rank 1");
    LabelVec out;
    out.labels.reserve(t.data.size());
    for (float v : t.data) {
        const double r = std::round(static_cast<double>(v));
        if (r != static_cast<double>(v) || r < 0 || r >= static_cast<double>(num_classes))
            throw DataError("bad_label", path.string() + ": label values must be integers in [0, K)");
        out.labels.push_back(static_cast<std::int64_t>(r));
    }
    return out;
}

void save_labels(const LabelVec& labels, const std::filesystem::path& path) {
    std::vector<float> data(labels.labels.begin(), labels.labels.end());
    save_tensor(TensorF32({labels.labels.size()}, std::move(data)), path);
}

}  // namespace scod
