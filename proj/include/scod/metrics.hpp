#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "scod/scores.hpp"

namespace scod {

struct EvalRecord {
    double score = 0.0;
    GroupKind group = GroupKind::IdCorrect;
};

// Deployment mixture: alpha is the ID proportion, beta the relative cost of
// an accepted misclassification versus an accepted OOD sample.
struct RiskConfig {
    double alpha = 0.5;
    double beta = 0.5;

    void validate() const;
};

struct CurvePoint {
    double threshold = 0.0;
    double x = 0.0;  // recall or coverage
    double risk = 0.0;
};

struct Curve {
    std::vector<CurvePoint> points;
    double area = 0.0;
};

// 0 for ID-correct, beta for ID-wrong, 1-beta for OOD.
double sample_loss(GroupKind group, double beta);

// Weighted mean loss over records with score >= threshold. ID records carry
// weight alpha/N_ID, OOD records (1-alpha)/N_OOD. Throws undefined_risk when
// the accepted weight is zero.
double selective_risk(std::span<const EvalRecord> records, const RiskConfig& cfg,
                      double threshold);

// Mann-Whitney AUROC with tie midranks: P(pos > neg) + 0.5 P(pos == neg).
double auroc(std::span<const double> pos, std::span<const double> neg);

// FPR at the largest threshold whose TPR (fraction of pos with score >= t)
// reaches the level.
double fpr_at_tpr(std::span<const double> pos, std::span<const double> neg, double level = 0.95);

// Risk against recall of ID-correct, thresholds at every distinct score.
// Points with zero accepted weight are skipped, so the curve starts at the
// first threshold whose acceptance set carries weight; the area is the
// trapezoid over the emitted points.
Curve risk_recall_curve(std::span<const EvalRecord> records, const RiskConfig& cfg);

// Risk at the largest threshold whose ID-correct recall reaches the level
// (the most conservative acceptance, mirroring fpr_at_tpr).
double risk_at_recall(std::span<const EvalRecord> records, const RiskConfig& cfg,
                      double level = 0.95);

struct CoverageCurves {
    Curve curve;
    Curve oracle;  // risk-coverage under perfect ordering (loss ascending)
};

// Risk against the weighted fraction of all records accepted.
CoverageCurves risk_coverage_curve(std::span<const EvalRecord> records, const RiskConfig& cfg);

// One grid cell of the sweep report.
struct SweepCell {
    std::string grouping;
    double alpha = 0.0;
    double beta = 0.0;
    double aurr = 0.0;
    double risk_at_level = 0.0;
    double aurc = 0.0;
    double aurc_oracle = 0.0;
};

struct SweepRequest {
    std::vector<EvalRecord> id_records;  // ID test set, IdCorrect/IdWrong
    std::map<std::string, std::vector<EvalRecord>> ood_records;
    std::vector<double> alphas;
    std::vector<double> betas;
    std::map<std::string, std::vector<std::string>> groupings;
    double recall_level = 0.95;

    // Sampling-mode alpha realization (instead of analytic reweighting).
    bool sample_mode = false;
    std::uint64_t sample_seed = 0;
};

// For each grouping and each (alpha, beta) in the grid's cross product,
// pools the grouping's OOD records with the ID records and evaluates AURR,
// risk at the recall level, and AURC.
std::vector<SweepCell> sweep(const SweepRequest& req);

}  // namespace scod
