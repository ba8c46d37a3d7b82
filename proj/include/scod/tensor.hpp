#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scod/error.hpp"

namespace scod {

// Dense row-major float32 array, rank 1..4. Values are stored as float32 on
// disk; all score arithmetic downstream runs in double.
struct TensorF32 {
    std::vector<std::uint64_t> dims;
    std::vector<float> data;

    TensorF32() = default;
    TensorF32(std::vector<std::uint64_t> d, std::vector<float> values);

    std::size_t rank() const { return dims.size(); }
    std::uint64_t rows() const { return dims.at(0); }
    std::uint64_t cols() const { return dims.at(1); }

    // Row view for rank-2 tensors.
    std::span<const float> row(std::uint64_t i) const {
        return {data.data() + i * dims[1], static_cast<std::size_t>(dims[1])};
    }

    bool operator==(const TensorF32&) const = default;
};

struct LabelVec {
    std::vector<std::int64_t> labels;

    bool operator==(const LabelVec&) const = default;
};

// One dataset as consumed by the pipeline: logits are N x K, features N x L,
// labels present only for ID splits.
struct DatasetBundle {
    std::string name;
    TensorF32 logits;
    TensorF32 features;
    std::optional<LabelVec> labels;

    std::uint64_t size() const { return logits.rows(); }
    std::uint64_t num_classes() const { return logits.cols(); }
    std::uint64_t feature_dim() const { return features.cols(); }

    void validate() const;
};

// "SCT1" container: magic, dtype byte (0x01 = f32 LE), rank byte, 2 pad
// bytes, u64-LE dims, then the row-major payload. No trailing bytes.
inline constexpr std::size_t kTensorHeaderBytes = 8;
inline constexpr std::size_t kTensorMaxRank = 4;

std::size_t tensor_file_size(const TensorF32& t);

TensorF32 load_tensor(const std::filesystem::path& path, bool allow_nonfinite = false);
void save_tensor(const TensorF32& t, const std::filesystem::path& path);

// In-memory codec used for the base64-embedded blobs in stats files.
std::vector<std::uint8_t> encode_tensor(const TensorF32& t);
TensorF32 decode_tensor(std::span<const std::uint8_t> bytes, bool allow_nonfinite = false);

TensorF32 load_csv_matrix(const std::filesystem::path& path,
                          std::optional<std::uint64_t> expected_cols = std::nullopt);

// Labels ride in rank-1 SCT1 tensors; every value must be integral and in [0, K).
LabelVec load_labels(const std::filesystem::path& path, std::uint64_t num_classes);
void save_labels(const LabelVec& labels, const std::filesystem::path& path);

}  // namespace scod
