#include "scod/sirc.hpp"

#include <cmath>

#include "scod/parallel.hpp"

namespace scod {

namespace {

constexpr double kEps = 1e-12;        // floor inside the log; handles s1 == s1_max
constexpr double kBoundSlack = 1e-12;

double softplus(double x) {
    if (x > 0.0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

}  // namespace

double sirc_s1_bound(ScoreKind s1) {
    switch (s1) {
        case ScoreKind::Msp: return 1.0;        // probabilities
        case ScoreKind::NegEntropy: return 0.0; // entropy >= 0
        case ScoreKind::Doctor: return 1.0;     // ||pi||_2 <= ||pi||_1 = 1
        default:
            throw ConfigError("unsupported_s1",
                              "SIRC requires a bounded softmax S1 (msp, neg_entropy, doctor), got " +
                                  std::string(score_kind_name(s1)));
    }
}

SircParams make_sirc_params(ScoreKind s1, const S2Stats& s2_stats) {
    if (!(s2_stats.stddev > 0.0))
        throw NumericalError("degenerate_std", "S2 statistics have non-positive std");
    SircParams p;
    p.s1_max = sirc_s1_bound(s1);
    p.a = s2_stats.mean - 3.0 * s2_stats.stddev;
    p.b = 1.0 / s2_stats.stddev;
    p.s1_id = ScoreId::simple(s1);
    p.s2_id = s2_stats.score;
    return p;
}

double sirc_combine(double s1, double s2, const SircParams& p) {
    if (!std::isfinite(s1) || !std::isfinite(s2))
        throw NumericalError("nonfinite", "SIRC inputs must be finite");
    if (s1 > p.s1_max + kBoundSlack)
        throw NumericalError("s1_bound", "S1 exceeds its declared bound");
    const double gap = std::max(p.s1_max - s1, 0.0);
    return -(std::log(gap + kEps) + softplus(-p.b * (s2 - p.a)));
}

double sirc_combine_direct(double s1, double s2, const SircParams& p) {
    if (!std::isfinite(s1) || !std::isfinite(s2))
        throw NumericalError("nonfinite", "SIRC inputs must be finite");
    return -(p.s1_max - s1) * (1.0 + std::exp(-p.b * (s2 - p.a)));
}

ScoreVec sirc_score_dataset(const ScoreVec& s1, const ScoreVec& s2, const SircParams& p,
                            unsigned threads) {
    if (s1.values.size() != s2.values.size())
        throw DataError("bad_dims", "S1 and S2 score vectors differ in length");
    if (s1.id != p.s1_id || s2.id != p.s2_id)
        throw ConfigError("score_mismatch", "SIRC parameters were fitted for different scores");

    ScoreVec out{ScoreId::sirc(s1.id.kind, s2.id.kind), std::vector<double>(s1.values.size())};
    parallel_for(out.values.size(), threads, [&](std::size_t i) {
        out.values[i] = sirc_combine(s1.values[i], s2.values[i], p);
    });
    return out;
}

}  // namespace scod
