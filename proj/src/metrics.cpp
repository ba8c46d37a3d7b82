#include "scod/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "scod/rng.hpp"

namespace scod {

namespace {

struct PairWeights {
    double id_w = 0.0;
    double ood_w = 0.0;
};

PairWeights record_weights(std::span<const EvalRecord> records, double alpha) {
    std::size_t n_id = 0, n_ood = 0;
    for (const auto& r : records) (r.group == GroupKind::Ood ? n_ood : n_id)++;
    PairWeights w;
    if (n_id > 0) w.id_w = alpha / static_cast<double>(n_id);
    if (n_ood > 0) w.ood_w = (1.0 - alpha) / static_cast<double>(n_ood);
    return w;
}

// Cumulative acceptance state at every distinct threshold, descending. Tied
// scores enter the acceptance set together.
struct ThresholdTable {
    std::vector<double> thresholds;
    std::vector<double> cum_w;
    std::vector<double> cum_wloss;
    std::vector<std::uint64_t> cum_correct;
    std::uint64_t n_correct = 0;
    double total_w = 0.0;
};

ThresholdTable build_table(std::span<const EvalRecord> records, const RiskConfig& cfg) {
    cfg.validate();
    if (records.empty()) throw DataError("empty", "no records to evaluate");
    for (const auto& r : records) {
        if (!std::isfinite(r.score)) throw NumericalError("nonfinite", "record score is not finite");
    }
    const PairWeights w = record_weights(records, cfg.alpha);

    std::vector<std::size_t> order(records.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (records[a].score != records[b].score) return records[a].score > records[b].score;
        return static_cast<int>(records[a].group) < static_cast<int>(records[b].group);
    });

    ThresholdTable t;
    double acc_w = 0.0, acc_wl = 0.0;
    std::uint64_t acc_c = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double s = records[order[i]].score;
        for (; i < order.size() && records[order[i]].score == s; ++i) {
            const EvalRecord& r = records[order[i]];
            const double rw = r.group == GroupKind::Ood ? w.ood_w : w.id_w;
            acc_w += rw;
            acc_wl += rw * sample_loss(r.group, cfg.beta);
            if (r.group == GroupKind::IdCorrect) ++acc_c;
        }
        t.thresholds.push_back(s);
        t.cum_w.push_back(acc_w);
        t.cum_wloss.push_back(acc_wl);
        t.cum_correct.push_back(acc_c);
    }
    for (const auto& r : records) {
        if (r.group == GroupKind::IdCorrect) ++t.n_correct;
    }
    t.total_w = acc_w;
    return t;
}

double trapezoid_area(const std::vector<CurvePoint>& points) {
    double area = 0.0;
    for (std::size_t i = 1; i < points.size(); ++i)
        area += (points[i].x - points[i - 1].x) * 0.5 * (points[i].risk + points[i - 1].risk);
    return area;
}

Curve coverage_curve_from(const ThresholdTable& t) {
    Curve c;
    for (std::size_t i = 0; i < t.thresholds.size(); ++i) {
        if (t.cum_w[i] <= 0.0) continue;
        c.points.push_back({t.thresholds[i], t.cum_w[i] / t.total_w, t.cum_wloss[i] / t.cum_w[i]});
    }
    c.area = trapezoid_area(c.points);
    return c;
}

// Deterministic partial Fisher-Yates draw of k records.
std::vector<EvalRecord> sample_without_replacement(std::vector<EvalRecord> pool, std::uint64_t k,
                                                   CounterRng& rng) {
    for (std::uint64_t i = 0; i < k; ++i) {
        const std::uint64_t j = i + rng.next_below(pool.size() - i);
        std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    return pool;
}

}  // namespace

void RiskConfig::validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0) || !(beta >= 0.0 && beta <= 1.0))
        throw ConfigError("bad_risk_config", "alpha and beta must lie in [0, 1]");
}

double sample_loss(GroupKind group, double beta) {
    switch (group) {
        case GroupKind::IdCorrect: return 0.0;
        case GroupKind::IdWrong: return beta;
        case GroupKind::Ood: return 1.0 - beta;
    }
    return 0.0;
}

double selective_risk(std::span<const EvalRecord> records, const RiskConfig& cfg,
                      double threshold) {
    cfg.validate();
    const PairWeights w = record_weights(records, cfg.alpha);
    double acc_w = 0.0, acc_wl = 0.0;
    for (const auto& r : records) {
        if (!std::isfinite(r.score)) throw NumericalError("nonfinite", "record score is not finite");
        if (r.score < threshold) continue;
        const double rw = r.group == GroupKind::Ood ? w.ood_w : w.id_w;
        acc_w += rw;
        acc_wl += rw * sample_loss(r.group, cfg.beta);
    }
    if (acc_w <= 0.0)
        throw NumericalError("undefined_risk", "acceptance set carries no weight");
    return acc_wl / acc_w;
}

double auroc(std::span<const double> pos, std::span<const double> neg) {
    if (pos.empty() || neg.empty()) throw DataError("empty_class", "AUROC needs both classes");
    std::vector<std::pair<double, bool>> all;
    all.reserve(pos.size() + neg.size());
    for (double s : pos) all.emplace_back(s, true);
    for (double s : neg) all.emplace_back(s, false);
    std::sort(all.begin(), all.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    // Midranks make the rank-sum equal to wins + half ties.
    double pos_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < all.size()) {
        std::size_t j = i;
        while (j < all.size() && all[j].first == all[i].first) ++j;
        const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
        for (std::size_t k = i; k < j; ++k) {
            if (all[k].second) pos_rank_sum += midrank;
        }
        i = j;
    }
    const double n_pos = static_cast<double>(pos.size());
    const double n_neg = static_cast<double>(neg.size());
    const double u = pos_rank_sum - n_pos * (n_pos + 1.0) / 2.0;
    return u / (n_pos * n_neg);
}

double fpr_at_tpr(std::span<const double> pos, std::span<const double> neg, double level) {
    if (pos.empty() || neg.empty()) throw DataError("empty_class", "FPR@TPR needs both classes");
    if (!(level > 0.0 && level <= 1.0))
        throw ConfigError("bad_level", "TPR level must lie in (0, 1]");
    std::vector<double> sorted(pos.begin(), pos.end());
    std::sort(sorted.begin(), sorted.end(), std::greater<>());

    // Largest threshold whose TPR reaches the level: the c-th largest positive
    // score with c the smallest count satisfying c/n >= level.
    const double n_pos = static_cast<double>(sorted.size());
    std::size_t c = 1;
    while (static_cast<double>(c) / n_pos < level) ++c;
    const double threshold = sorted[c - 1];

    std::size_t fp = 0;
    for (double s : neg) {
        if (s >= threshold) ++fp;
    }
    return static_cast<double>(fp) / static_cast<double>(neg.size());
}

Curve risk_recall_curve(std::span<const EvalRecord> records, const RiskConfig& cfg) {
    const ThresholdTable t = build_table(records, cfg);
    if (t.n_correct == 0) throw DataError("empty_class", "risk-recall needs ID-correct records");
    Curve c;
    for (std::size_t i = 0; i < t.thresholds.size(); ++i) {
        if (t.cum_w[i] <= 0.0) continue;  // risk undefined; curve starts past here
        const double recall =
            static_cast<double>(t.cum_correct[i]) / static_cast<double>(t.n_correct);
        c.points.push_back({t.thresholds[i], recall, t.cum_wloss[i] / t.cum_w[i]});
    }
    c.area = trapezoid_area(c.points);
    return c;
}

double risk_at_recall(std::span<const EvalRecord> records, const RiskConfig& cfg, double level) {
    if (!(level > 0.0 && level <= 1.0))
        throw ConfigError("bad_level", "recall level must lie in (0, 1]");
    const ThresholdTable t = build_table(records, cfg);
    if (t.n_correct == 0) throw DataError("empty_class", "risk-at-recall needs ID-correct records");
    for (std::size_t i = 0; i < t.thresholds.size(); ++i) {
        const double recall =
            static_cast<double>(t.cum_correct[i]) / static_cast<double>(t.n_correct);
        if (recall >= level) {
            if (t.cum_w[i] <= 0.0)
                throw NumericalError("undefined_risk", "acceptance set carries no weight");
            return t.cum_wloss[i] / t.cum_w[i];
        }
    }
    throw NumericalError("undefined_risk", "recall level never reached");
}

CoverageCurves risk_coverage_curve(std::span<const EvalRecord> records, const RiskConfig& cfg) {
    const ThresholdTable t = build_table(records, cfg);
    if (!(t.total_w > 0.0))
        throw NumericalError("undefined_risk", "records carry no total weight");
    CoverageCurves out;
    out.curve = coverage_curve_from(t);

    // Oracle ordering: accept by ascending loss, ties entering together.
    std::vector<EvalRecord> oracle(records.begin(), records.end());
    for (auto& r : oracle) r.score = -sample_loss(r.group, cfg.beta);
    out.oracle = coverage_curve_from(build_table(oracle, cfg));
    return out;
}

std::vector<SweepCell> sweep(const SweepRequest& req) {
    if (req.alphas.empty() || req.betas.empty())
        throw ConfigError("bad_grid", "sweep needs at least one alpha and one beta");
    std::vector<SweepCell> cells;
    std::uint64_t cell_index = 0;
    for (const auto& [grouping, datasets] : req.groupings) {
        std::vector<EvalRecord> pooled = req.id_records;
        std::size_t n_ood = 0;
        for (const std::string& name : datasets) {
            auto it = req.ood_records.find(name);
            if (it == req.ood_records.end())
                throw ConfigError("bad_grouping",
                                  "grouping " + grouping + " references unknown dataset " + name);
            pooled.insert(pooled.end(), it->second.begin(), it->second.end());
            n_ood += it->second.size();
        }
        for (double alpha : req.alphas) {
            for (double beta : req.betas) {
                RiskConfig cfg{alpha, beta};
                cfg.validate();
                std::span<const EvalRecord> records = pooled;
                std::vector<EvalRecord> sampled;
                if (req.sample_mode) {
                    // Physical mixture: floor(alpha * T) ID records out of the
                    // largest feasible total T, the rest OOD, uniform weights.
                    const double n_id = static_cast<double>(pooled.size() - n_ood);
                    double t_max = std::numeric_limits<double>::infinity();
                    if (alpha > 0.0) t_max = std::floor(n_id / alpha);
                    if (alpha < 1.0)
                        t_max = std::min(t_max,
                                         std::floor(static_cast<double>(n_ood) / (1.0 - alpha)));
                    const auto total = static_cast<std::uint64_t>(t_max);
                    if (total == 0)
                        throw DataError("empty", "sampling mode produced an empty mixture");
                    const auto take_id = static_cast<std::uint64_t>(
                        std::floor(alpha * static_cast<double>(total)));
                    const std::uint64_t take_ood = total - take_id;

                    std::vector<EvalRecord> id_pool, ood_pool;
                    for (const auto& r : pooled)
                        (r.group == GroupKind::Ood ? ood_pool : id_pool).push_back(r);
                    CounterRng rng(req.sample_seed, 0x73616d70ULL + cell_index);
                    sampled = sample_without_replacement(std::move(id_pool), take_id, rng);
                    auto ood_sampled =
                        sample_without_replacement(std::move(ood_pool), take_ood, rng);
                    sampled.insert(sampled.end(), ood_sampled.begin(), ood_sampled.end());
                    records = sampled;
                    cfg.alpha = static_cast<double>(take_id) / static_cast<double>(total);
                }
                SweepCell cell;
                cell.grouping = grouping;
                cell.alpha = alpha;
                cell.beta = beta;
                cell.aurr = risk_recall_curve(records, cfg).area;
                cell.risk_at_level = risk_at_recall(records, cfg, req.recall_level);
                const CoverageCurves cc = risk_coverage_curve(records, cfg);
                cell.aurc = cc.curve.area;
                cell.aurc_oracle = cc.oracle.area;
                cells.push_back(std::move(cell));
                ++cell_index;
            }
        }
    }
    return cells;
}

}  // namespace scod
