#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "scod/tensor.hpp"

namespace scod {

struct IdStats;

enum class ScoreKind {
    Msp,
    NegEntropy,
    Doctor,
    MaxLogit,
    Energy,
    L1Norm,
    NegResidual,
    Mahalanobis,
    Gradnorm,
    Vim,
    Sirc,
};

std::string_view score_kind_name(ScoreKind k);
ScoreKind parse_score_kind(std::string_view name);

// Identity of a score column. SIRC carries its component pair; everything
// else is just the kind.
struct ScoreId {
    ScoreKind kind = ScoreKind::Msp;
    ScoreKind s1 = ScoreKind::Msp;     // SIRC only
    ScoreKind s2 = ScoreKind::L1Norm;  // SIRC only

    static ScoreId simple(ScoreKind k) { return {k, ScoreKind::Msp, ScoreKind::L1Norm}; }
    static ScoreId sirc(ScoreKind s1, ScoreKind s2) { return {ScoreKind::Sirc, s1, s2}; }

    // "msp", "energy", ..., "sirc-msp-l1_norm". Round-trips through parse().
    std::string name() const;
    static ScoreId parse(std::string_view name);

    bool operator==(const ScoreId&) const = default;
};

// Which fitted statistics a score needs.
bool score_needs_subspace(const ScoreId& id);
bool score_needs_gaussians(const ScoreId& id);
bool score_needs_vim_scale(const ScoreId& id);

struct ScoreVec {
    ScoreId id;
    std::vector<double> values;
};

enum class GroupKind { IdCorrect, IdWrong, Ood };

struct SampleGroup {
    GroupKind kind = GroupKind::IdCorrect;
    std::string dataset;  // set for OOD groups only

    bool operator==(const SampleGroup&) const = default;
};

// Row-level scores. Logits and features arrive as float rows; all arithmetic
// is double.
std::vector<double> softmax(std::span<const float> logits);
std::size_t classify(std::span<const float> logits);

double msp(std::span<const double> probs);
double neg_entropy(std::span<const double> probs);
double doctor(std::span<const double> probs);
double max_logit(std::span<const float> logits);
double energy(std::span<const float> logits);
double l1_norm(std::span<const float> features);
double neg_residual(std::span<const float> features, const IdStats& stats);
double mahalanobis(std::span<const float> features, const IdStats& stats);
double gradnorm(std::span<const double> probs, std::span<const float> features);
double vim(std::span<const float> logits, std::span<const float> features, const IdStats& stats);

// Applies one non-SIRC score to every row. Output order matches input order
// for any thread count. SIRC columns are produced by sirc_score_dataset.
ScoreVec score_dataset(const DatasetBundle& bundle, const ScoreId& id,
                       const IdStats* stats = nullptr, unsigned threads = 1);

// ID samples become IdCorrect/IdWrong by argmax against the label; OOD
// bundles map every sample to Ood(bundle.name).
std::vector<SampleGroup> label_groups(const DatasetBundle& bundle, bool is_ood);

}  // namespace scod
