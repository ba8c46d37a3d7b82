#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "scod/scores.hpp"
#include "scod/tensor.hpp"

namespace scod {

// Principal subspace of the centered ID-train features. Columns of basis are
// orthonormal eigenvectors of the covariance (divisor N), ordered by
// descending eigenvalue, sign-fixed so each column's largest-magnitude entry
// is positive.
struct SubspaceBasis {
    Eigen::VectorXd mean;         // L
    Eigen::MatrixXd basis;        // L x d
    Eigen::VectorXd eigenvalues;  // full spectrum, length L, descending
    std::uint64_t d = 0;
};

// Class-conditional Gaussians with tied covariance; precision is the ridge-
// regularized inverse.
struct ClassGaussians {
    Eigen::MatrixXd means;      // K x L
    Eigen::MatrixXd precision;  // L x L, symmetric positive-definite
    double ridge = 0.0;         // lambda actually applied (relative)

    // Derived terms for the quadratic form, rebuilt after fit/load.
    Eigen::MatrixXd precision_means;  // L x K, precision * mean_k columns
    Eigen::VectorXd mean_quad;        // K, mean_k' * precision * mean_k
    void finalize();
};

struct S2Stats {
    double mean = 0.0;
    double stddev = 0.0;  // unbiased, N-1 denominator
    ScoreId score;
};

// Everything fitted on ID-train data that scores depend on.
struct IdStats {
    std::uint64_t num_classes = 0;
    std::uint64_t feature_dim = 0;
    std::optional<SubspaceBasis> subspace;
    std::optional<ClassGaussians> gaussians;
    std::map<std::string, S2Stats> s2_stats;  // keyed by score name
    std::optional<double> vim_c;

    const S2Stats& s2_for(const ScoreId& id) const;
};

// d defaults to the dimensionality rule (1000 if L > 1500 else 512), clamped
// to min(rule, N-2, L-1). An explicit d outside the feasible range is an
// error rather than clamped.
std::uint64_t default_subspace_dim(std::uint64_t feature_dim);

SubspaceBasis fit_subspace(const TensorF32& train_features,
                           std::optional<std::uint64_t> d = std::nullopt);

ClassGaussians fit_class_gaussians(const TensorF32& train_features, const LabelVec& labels,
                                   std::uint64_t num_classes, double ridge_lambda = 1e-6);

S2Stats fit_s2_stats(const ScoreVec& train_s2);

double fit_vim_scale(const TensorF32& train_logits, const TensorF32& train_features,
                     const SubspaceBasis& subspace);

// JSON container, matrix payloads as base64 SCT1 blobs (so persisted values
// are float32; a second round trip is byte-identical).
void save_stats(const IdStats& stats, const std::filesystem::path& path);
IdStats load_stats(const std::filesystem::path& path);

std::string stats_to_json(const IdStats& stats);
IdStats stats_from_json(const std::string& text);

}  // namespace scod
