#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "scod/idstats.hpp"
#include "scod/metrics.hpp"
#include "scod/scores.hpp"
#include "scod/synthetic.hpp"

namespace scod {

struct DatasetPaths {
    std::filesystem::path logits;
    std::filesystem::path features;
    std::optional<std::filesystem::path> labels;
};

struct ScoreSpec {
    ScoreId id;
    std::optional<double> a_override;  // SIRC only
    std::optional<double> b_override;
};

// Experiment description: datasets, score list, metric grid, groupings.
struct ExperimentConfig {
    std::uint64_t seed = 0;
    std::filesystem::path output_dir = "out";
    DatasetPaths id_train;
    DatasetPaths id_test;
    std::map<std::string, DatasetPaths> ood;
    std::vector<ScoreSpec> scores;
    std::vector<double> alphas{0.5};
    std::vector<double> betas{0.5};
    double tpr_level = 0.95;
    std::map<std::string, std::vector<std::string>> groupings;
    std::optional<std::uint64_t> subspace_dim;
    double ridge_lambda = 1e-6;

    void validate() const;

    static ExperimentConfig from_json_text(const std::string& text,
                                           const std::filesystem::path& base_dir);
    static ExperimentConfig load(const std::filesystem::path& path);
    std::string to_json_text() const;
};

struct PipelineOptions {
    unsigned threads = 1;
    bool allow_nonfinite = false;
    bool full_precision = false;
    bool sample_mode = false;
    std::optional<std::uint64_t> seed_override;
    std::optional<std::filesystem::path> out_override;
    bool dump_curves = false;

    std::filesystem::path resolve_out(const ExperimentConfig& cfg) const {
        return out_override.value_or(cfg.output_dir);
    }
    std::uint64_t resolve_seed(const ExperimentConfig& cfg) const {
        return seed_override.value_or(cfg.seed);
    }
};

// fit -> stats.json; score -> per (dataset x score) SCT1 vectors plus group
// files and a manifest; eval -> AUROC/FPR tables; sweep -> (alpha, beta) grid.
std::filesystem::path cmd_fit(const ExperimentConfig& cfg, const PipelineOptions& opt);
std::filesystem::path cmd_score(const ExperimentConfig& cfg, const PipelineOptions& opt);
std::filesystem::path cmd_eval(const ExperimentConfig& cfg, const PipelineOptions& opt);
std::filesystem::path cmd_sweep(const ExperimentConfig& cfg, const PipelineOptions& opt);

// Generates the synthetic benchmark tensors plus a ready-to-run experiment
// config referencing them.
std::filesystem::path cmd_synth(const SynthConfig& cfg, const std::filesystem::path& out_dir);

std::filesystem::path cmd_noise_gen(const NoiseConfig& cfg, const std::filesystem::path& out_dir);

// Score-plane dump for one SIRC pair: per-sample (s1, s2, group) triples and
// decision contours for the sigmoid, linear, and product combiners.
std::filesystem::path cmd_plotdata(const ExperimentConfig& cfg, const PipelineOptions& opt,
                                   std::optional<ScoreId> pair = std::nullopt,
                                   std::optional<double> linear_c = std::nullopt);

// Atomic text/binary writes (temp file + rename).
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

std::string format_value(double v, bool full_precision);

}  // namespace scod
