#pragma once

#include "scod/idstats.hpp"
#include "scod/scores.hpp"

namespace scod {

// Parameters of the sigmoid gate combining a bounded softmax score S1 with a
// class-agnostic score S2. a centers the sigmoid below the ID distribution of
// S2, b matches its sensitivity to the ID spread.
struct SircParams {
    double s1_max = 1.0;
    double a = 0.0;
    double b = 1.0;
    ScoreId s1_id;
    ScoreId s2_id;
};

// Analytic upper bound of the supported S1 scores; unbounded scores are
// rejected.
double sirc_s1_bound(ScoreKind s1);

// a = mean - 3*std, b = 1/std from the ID-train statistics of S2.
SircParams make_sirc_params(ScoreKind s1, const S2Stats& s2_stats);

// Log-domain combination: a strictly increasing transform of the product
// form, so every rank-based metric sees the same ordering while large
// sigmoid arguments cannot overflow.
double sirc_combine(double s1, double s2, const SircParams& p);

// Product form, kept for plotting decision contours. Overflows for very
// negative b*(s2-a); use sirc_combine for scoring.
double sirc_combine_direct(double s1, double s2, const SircParams& p);

ScoreVec sirc_score_dataset(const ScoreVec& s1, const ScoreVec& s2, const SircParams& p,
                            unsigned threads = 1);

}  // namespace scod
