#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "scod/metrics.hpp"
#include "scod/rng.hpp"
#include "scod/tensor.hpp"

namespace scod {

// Controllable benchmark: ID samples get a class-aligned feature/logit margin
// plus unit noise; OOD samples reuse the ID feature form around a random
// pseudo-class, shrunk by ood_feature_scale and given an ood_residual_boost
// spike on one dimension outside the signal subspace. Logit margins for OOD
// are halved so softmax scores carry real but imperfect OOD signal.
struct SynthConfig {
    std::uint64_t num_classes = 10;      // K
    std::uint64_t feature_dim = 64;      // L
    std::uint64_t signal_dim = 10;       // class-mean subspace dimension
    std::uint64_t n_train = 4000;
    std::uint64_t n_id_test = 2000;
    std::uint64_t n_ood = 2000;          // per OOD set
    std::uint64_t num_ood_sets = 2;
    double logit_noise = 1.0;            // sigma_v
    double class_margin = 4.0;           // m
    double ood_feature_scale = 0.6;      // gamma in (0, 1]
    double ood_residual_boost = 8.0;     // rho >= 0
    std::uint64_t seed = 0;

    void validate() const;
};

struct SynthBenchmark {
    DatasetBundle train;
    DatasetBundle id_test;
    std::vector<DatasetBundle> ood;
};

SynthBenchmark gen_benchmark(const SynthConfig& cfg);

struct NoiseConfig {
    std::uint64_t count = 16;
    std::uint32_t min_width = 2;
    std::uint32_t max_width = 256;
    std::uint32_t out_size = 256;
    std::uint64_t seed = 0;

    void validate() const;
};

// Square RGB images whose pixels are N(0.5, sigma^2) draws with sigma itself
// a squared unit normal per image, clipped to [0,1], Lanczos-3 resampled to
// out_size, and written as binary PPM (P6).
std::vector<std::filesystem::path> gen_noise_images(const NoiseConfig& cfg,
                                                    const std::filesystem::path& out_dir);

// Pieces exposed for tests: raw rendering at a forced sigma, and the
// resampler itself.
std::vector<double> render_noise_pixels(std::uint32_t width, double sigma, CounterRng& rng);
std::vector<double> lanczos3_resample(std::span<const double> pixels, std::uint32_t width,
                                      std::uint32_t out_size);
std::vector<std::uint8_t> encode_ppm(std::span<const double> pixels, std::uint32_t size);

// Brute-force oracles used by tests; deliberately O(n^2)-style direct
// recomputation, independent of the fast metric paths.
double oracle_auroc(std::span<const double> pos, std::span<const double> neg);

struct OraclePoint {
    double threshold = 0.0;
    double x = 0.0;
    double risk = 0.0;
};

struct OracleCurves {
    std::vector<OraclePoint> risk_recall;
    std::vector<OraclePoint> risk_coverage;
    double aurr = 0.0;
    double aurc = 0.0;
};

OracleCurves oracle_selective_curves(std::span<const EvalRecord> records, const RiskConfig& cfg);
double oracle_risk_at_recall(std::span<const EvalRecord> records, const RiskConfig& cfg,
                             double level);
double oracle_fpr_at_tpr(std::span<const double> pos, std::span<const double> neg, double level);

}  // namespace scod
