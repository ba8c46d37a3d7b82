#include <doctest.h>

#include <cmath>

#include "scod/metrics.hpp"
#include "scod/rng.hpp"
#include "scod/synthetic.hpp"

using namespace scod;

namespace {

std::vector<EvalRecord> random_records(CounterRng& rng, std::size_t n_correct,
                                       std::size_t n_wrong, std::size_t n_ood,
                                       bool force_ties = true) {
    std::vector<EvalRecord> records;
    auto push = [&](std::size_t count, GroupKind g, double offset) {
        for (std::size_t i = 0; i < count; ++i) {
            double s = offset + rng.next_normal();
            if (force_ties && rng.next_below(4) == 0) s = offset + std::round(s);
            records.push_back({s, g});
        }
    };
    push(n_correct, GroupKind::IdCorrect, 1.0);
    push(n_wrong, GroupKind::IdWrong, 0.0);
    push(n_ood, GroupKind::Ood, -0.5);
    return records;
}

std::vector<double> scores_of(const std::vector<EvalRecord>& records, GroupKind g) {
    std::vector<double> out;
    for (const auto& r : records)
        if (r.group == g) out.push_back(r.score);
    return out;
}

}  // namespace

TEST_CASE("sample_loss covers the three groups") {
    CHECK(sample_loss(GroupKind::IdCorrect, 0.7) == 0.0);
    CHECK(sample_loss(GroupKind::IdWrong, 0.7) == doctest::Approx(0.7));
    CHECK(sample_loss(GroupKind::Ood, 0.5) == doctest::Approx(0.5));
    CHECK(sample_loss(GroupKind::IdWrong, 0.0) == 0.0);
    CHECK(sample_loss(GroupKind::Ood, 1.0) == 0.0);
}

TEST_CASE("selective risk: equal-weight arithmetic example") {
    // 3 ID (2 correct, 1 wrong) and 1 OOD accepted; alpha = 3/4 makes every
    // record weigh the same.
    const std::vector<EvalRecord> records = {{1.0, GroupKind::IdCorrect},
                                             {1.0, GroupKind::IdCorrect},
                                             {1.0, GroupKind::IdWrong},
                                             {1.0, GroupKind::Ood}};
    const double risk = selective_risk(records, {0.75, 0.5}, 0.5);
    CHECK(risk == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("selective risk: alpha = 1 ignores OOD scores") {
    std::vector<EvalRecord> records = {{2.0, GroupKind::IdCorrect},
                                       {1.0, GroupKind::IdWrong},
                                       {5.0, GroupKind::Ood},
                                       {-5.0, GroupKind::Ood}};
    const double risk = selective_risk(records, {1.0, 0.5}, 0.0);
    records[2].score = -100.0;
    records[3].score = 100.0;
    CHECK(selective_risk(records, {1.0, 0.5}, 0.0) == risk);
    CHECK(risk == doctest::Approx(0.25));  // (0 + 0.5)/2
}

TEST_CASE("selective risk matches a direct-sum oracle") {
    CounterRng rng(41, 1);
    for (int round = 0; round < 30; ++round) {
        const auto records = random_records(rng, 30, 20, 25);
        const RiskConfig cfg{0.3 + 0.4 * rng.next_unit(), rng.next_unit()};
        const double t = rng.next_normal();

        const std::size_t n_id = 50, n_ood = 25;
        double acc_w = 0.0, acc_wl = 0.0;
        for (const auto& r : records) {
            if (r.score < t) continue;
            const double w =
                r.group == GroupKind::Ood ? (1.0 - cfg.alpha) / n_ood : cfg.alpha / n_id;
            acc_w += w;
            acc_wl += w * sample_loss(r.group, cfg.beta);
        }
        if (acc_w == 0.0) continue;
        CHECK(selective_risk(records, cfg, t) ==
              doctest::Approx(acc_wl / acc_w).epsilon(1e-12));
    }
    CHECK_THROWS_AS(
        selective_risk(std::vector<EvalRecord>{{0.0, GroupKind::IdCorrect}}, {0.5, 0.5}, 10.0),
        NumericalError);
}

TEST_CASE("auroc basics") {
    CHECK(auroc(std::vector<double>{2, 3}, std::vector<double>{0, 1}) == 1.0);
    CHECK(auroc(std::vector<double>{7, 7, 7}, std::vector<double>{7, 7}) == 0.5);
    CHECK_THROWS_AS(auroc(std::vector<double>{}, std::vector<double>{1.0}), DataError);
}

TEST_CASE("auroc matches the pairwise oracle with duplicates") {
    CounterRng rng(42, 1);
    for (int round = 0; round < 20; ++round) {
        std::vector<double> pos(200), neg(200);
        for (auto& v : pos) v = std::round(4.0 * rng.next_normal()) / 2.0;
        for (auto& v : neg) v = std::round(4.0 * rng.next_normal() - 1.0) / 2.0;
        const double fast = auroc(pos, neg);
        const double slow = oracle_auroc(pos, neg);
        CHECK(std::abs(fast - slow) <= 1e-12);
        CHECK(std::abs(auroc(pos, neg) + auroc(neg, pos) - 1.0) <= 1e-12);
    }
}

TEST_CASE("fpr at tpr") {
    CHECK(fpr_at_tpr(std::vector<double>{5, 6, 7}, std::vector<double>{1, 2, 3}) == 0.0);

    // Identical distributions: with n pos == n neg and every value distinct
    // on each side, the sorted oracle fixes the exact value.
    CounterRng rng(43, 1);
    std::vector<double> pos(40), neg(40);
    for (std::size_t i = 0; i < 40; ++i) {
        pos[i] = static_cast<double>(i);
        neg[i] = static_cast<double>(i);
    }
    const double fpr = fpr_at_tpr(pos, neg, 0.95);
    CHECK(fpr == doctest::Approx(oracle_fpr_at_tpr(pos, neg, 0.95)).epsilon(1e-12));
    CHECK(fpr == doctest::Approx(0.95));  // same threshold admits 38 of 40

    // 20 positives at level 0.95: the threshold admits exactly 19.
    std::vector<double> p20(20);
    for (std::size_t i = 0; i < 20; ++i) p20[i] = static_cast<double>(i);
    const double t_star = 1.0;  // 19 of [0..19] are >= 1
    std::size_t admitted = 0;
    for (double v : p20)
        if (v >= t_star) ++admitted;
    CHECK(admitted == 19);
    std::vector<double> n20(20, 0.5);
    CHECK(fpr_at_tpr(p20, n20, 0.95) == 0.0);             // t* = 1 > 0.5
    CHECK(oracle_fpr_at_tpr(p20, n20, 0.95) == 0.0);
    n20.assign(20, 1.0);
    CHECK(fpr_at_tpr(p20, n20, 0.95) == 1.0);             // ties at t* accepted

    for (int round = 0; round < 20; ++round) {
        std::vector<double> rp(50), rn(60);
        for (auto& v : rp) v = std::round(3.0 * rng.next_normal());
        for (auto& v : rn) v = std::round(3.0 * rng.next_normal());
        CHECK(fpr_at_tpr(rp, rn, 0.95) ==
              doctest::Approx(oracle_fpr_at_tpr(rp, rn, 0.95)).epsilon(1e-12));
    }
}

TEST_CASE("risk-recall curve endpoints and two-point example") {
    // Perfect separation: every ID-correct above everything else.
    std::vector<EvalRecord> perfect;
    for (int i = 0; i < 10; ++i) perfect.push_back({10.0 + i, GroupKind::IdCorrect});
    for (int i = 0; i < 5; ++i) perfect.push_back({static_cast<double>(i), GroupKind::IdWrong});
    for (int i = 0; i < 5; ++i) perfect.push_back({-1.0 - i, GroupKind::Ood});
    CHECK(risk_recall_curve(perfect, {0.5, 0.5}).area == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(risk_at_recall(perfect, {0.5, 0.5}, 0.95) == doctest::Approx(0.0));

    // Two records: one ID-wrong above one ID-correct, beta = 1.
    const std::vector<EvalRecord> two = {{2.0, GroupKind::IdWrong}, {1.0, GroupKind::IdCorrect}};
    const Curve c = risk_recall_curve(two, {1.0, 1.0});
    REQUIRE(c.points.size() == 2);
    CHECK(c.points[0].x == 0.0);
    CHECK(c.points[0].risk == doctest::Approx(1.0));
    CHECK(c.points[1].x == 1.0);
    CHECK(c.points[1].risk == doctest::Approx(0.5));
    CHECK(c.area == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("risk at full recall equals the total-population risk when the floor is ID-correct") {
    std::vector<EvalRecord> records = {{0.0, GroupKind::IdCorrect},  // global minimum
                                       {1.0, GroupKind::IdWrong},
                                       {2.0, GroupKind::IdCorrect},
                                       {3.0, GroupKind::Ood}};
    const RiskConfig cfg{0.5, 0.25};
    const double full = risk_at_recall(records, cfg, 1.0);
    // alpha * err_id * beta + (1-alpha) * (1-beta), total weight 1
    const double expected = 0.5 * (1.0 / 3.0) * 0.25 + 0.5 * 0.75;
    CHECK(full == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("curves and risk@level match the exhaustive oracle") {
    CounterRng rng(44, 1);
    for (int round = 0; round < 25; ++round) {
        const auto records = random_records(rng, 40, 25, 35);
        const RiskConfig cfg{0.25 + 0.5 * rng.next_unit(), rng.next_unit()};
        const OracleCurves oracle = oracle_selective_curves(records, cfg);

        const Curve rr = risk_recall_curve(records, cfg);
        CHECK(std::abs(rr.area - oracle.aurr) <= 1e-12);
        REQUIRE(rr.points.size() == oracle.risk_recall.size());
        for (std::size_t i = 0; i < rr.points.size(); ++i) {
            CHECK(rr.points[i].x == doctest::Approx(oracle.risk_recall[i].x).epsilon(1e-12));
            CHECK(rr.points[i].risk ==
                  doctest::Approx(oracle.risk_recall[i].risk).epsilon(1e-12));
        }

        const CoverageCurves cc = risk_coverage_curve(records, cfg);
        CHECK(std::abs(cc.curve.area - oracle.aurc) <= 1e-12);
        CHECK(cc.curve.area >= cc.oracle.area - 1e-12);
        CHECK(rr.area >= 0.0);
        CHECK(cc.curve.area >= 0.0);

        CHECK(std::abs(risk_at_recall(records, cfg, 0.95) -
                       oracle_risk_at_recall(records, cfg, 0.95)) <= 1e-12);
    }
}

TEST_CASE("risk-coverage oracle ordering gives the closed-form area") {
    // 2 ID-correct, 1 ID-wrong, 1 OOD in oracle order, alpha=0.75 so all
    // records carry weight 1/4; beta = 0.5.
    const std::vector<EvalRecord> records = {{4.0, GroupKind::IdCorrect},
                                             {3.0, GroupKind::IdCorrect},
                                             {2.0, GroupKind::IdWrong},
                                             {1.0, GroupKind::Ood}};
    const RiskConfig cfg{0.75, 0.5};
    const CoverageCurves cc = risk_coverage_curve(records, cfg);
    // Points: (1/4, 0) (2/4, 0) (3/4, 1/6) (1, 1/4); trapezoids sum:
    const double expected = 0.25 * (0.0) + 0.25 * 0.5 * (0.0 + 1.0 / 6.0) +
                            0.25 * 0.5 * (1.0 / 6.0 + 0.25);
    CHECK(cc.curve.area == doctest::Approx(expected).epsilon(1e-12));
    // The oracle groups by distinct loss; with beta = 0.5 the ID-wrong and
    // OOD records tie, so its curve is (0.5, 0) -> (1, 0.25).
    CHECK(cc.oracle.area == doctest::Approx(0.0625).epsilon(1e-12));
    CHECK(cc.curve.points.back().x == doctest::Approx(1.0));
    CHECK(cc.curve.points.back().risk ==
          doctest::Approx(selective_risk(records, cfg, -100.0)).epsilon(1e-12));
}

TEST_CASE("metrics are invariant under strictly increasing transforms") {
    CounterRng rng(45, 1);
    const auto records = random_records(rng, 50, 30, 40);
    const RiskConfig cfg{0.4, 0.6};

    const auto pos = scores_of(records, GroupKind::IdCorrect);
    const auto neg = scores_of(records, GroupKind::IdWrong);
    const double base_auroc = auroc(pos, neg);
    const double base_fpr = fpr_at_tpr(pos, neg, 0.95);
    const double base_aurr = risk_recall_curve(records, cfg).area;
    const double base_r95 = risk_at_recall(records, cfg, 0.95);
    const double base_aurc = risk_coverage_curve(records, cfg).curve.area;

    const std::vector<std::pair<const char*, double (*)(double)>> transforms = {
        {"exp", [](double x) { return std::exp(x); }},
        {"affine", [](double x) { return 3.0 * x + 7.0; }},
        {"cube", [](double x) { return x * x * x; }},
    };
    for (const auto& [name, f] : transforms) {
        CAPTURE(name);
        auto mapped = records;
        for (auto& r : mapped) r.score = f(r.score);
        auto mpos = pos, mneg = neg;
        for (auto& v : mpos) v = f(v);
        for (auto& v : mneg) v = f(v);
        CHECK(std::abs(auroc(mpos, mneg) - base_auroc) <= 1e-12);
        CHECK(std::abs(fpr_at_tpr(mpos, mneg, 0.95) - base_fpr) <= 1e-12);
        CHECK(std::abs(risk_recall_curve(mapped, cfg).area - base_aurr) <= 1e-12);
        CHECK(std::abs(risk_at_recall(mapped, cfg, 0.95) - base_r95) <= 1e-12);
        CHECK(std::abs(risk_coverage_curve(mapped, cfg).curve.area - base_aurc) <= 1e-12);
    }
}

TEST_CASE("equal-size pooled computation matches alpha = 0.5 weighting") {
    CounterRng rng(46, 1);
    auto records = random_records(rng, 30, 20, 50, false);  // N_ID == N_OOD == 50
    const RiskConfig weighted{0.5, 0.5};
    // With equal counts, alpha=0.5 weights are uniform; risk equals the
    // unweighted mean loss of the accepted set.
    const double t = 0.2;
    double acc = 0.0;
    std::size_t n_acc = 0;
    for (const auto& r : records) {
        if (r.score < t) continue;
        acc += sample_loss(r.group, 0.5);
        ++n_acc;
    }
    REQUIRE(n_acc > 0);
    CHECK(selective_risk(records, weighted, t) ==
          doctest::Approx(acc / static_cast<double>(n_acc)).epsilon(1e-12));
}

TEST_CASE("sweep grid runs every cell and matches single-point calls") {
    CounterRng rng(47, 1);
    SweepRequest req;
    for (int i = 0; i < 40; ++i)
        req.id_records.push_back(
            {1.0 + rng.next_normal(), i % 4 == 0 ? GroupKind::IdWrong : GroupKind::IdCorrect});
    std::vector<EvalRecord> far, near;
    for (int i = 0; i < 30; ++i) far.push_back({-1.0 + rng.next_normal(), GroupKind::Ood});
    for (int i = 0; i < 20; ++i) near.push_back({0.5 + rng.next_normal(), GroupKind::Ood});
    req.ood_records["far"] = far;
    req.ood_records["near"] = near;
    req.alphas = {0.25, 0.5, 0.75};
    req.betas = {0.2, 0.5, 0.8};
    req.groupings = {{"all", {"far", "near"}}, {"far_only", {"far"}}};

    const auto cells = sweep(req);
    REQUIRE(cells.size() == 2 * 3 * 3);

    for (const auto& cell : cells) {
        std::vector<EvalRecord> pooled = req.id_records;
        for (const std::string& name : req.groupings.at(cell.grouping)) {
            const auto& more = req.ood_records.at(name);
            pooled.insert(pooled.end(), more.begin(), more.end());
        }
        const RiskConfig cfg{cell.alpha, cell.beta};
        CHECK(cell.aurr ==
              doctest::Approx(risk_recall_curve(pooled, cfg).area).epsilon(1e-12));
        CHECK(cell.risk_at_level ==
              doctest::Approx(risk_at_recall(pooled, cfg, 0.95)).epsilon(1e-12));
        CHECK(cell.aurc ==
              doctest::Approx(risk_coverage_curve(pooled, cfg).curve.area).epsilon(1e-12));
    }
}

TEST_CASE("sweep with alpha = 1 is identical across groupings") {
    CounterRng rng(48, 1);
    SweepRequest req;
    for (int i = 0; i < 30; ++i)
        req.id_records.push_back(
            {rng.next_normal(), i % 3 == 0 ? GroupKind::IdWrong : GroupKind::IdCorrect});
    std::vector<EvalRecord> a, b;
    for (int i = 0; i < 25; ++i) a.push_back({rng.next_normal(), GroupKind::Ood});
    for (int i = 0; i < 15; ++i) b.push_back({rng.next_normal(), GroupKind::Ood});
    req.ood_records["a"] = a;
    req.ood_records["b"] = b;
    req.alphas = {1.0};
    req.betas = {0.5};
    req.groupings = {{"both", {"a", "b"}}, {"only_a", {"a"}}};

    const auto cells = sweep(req);
    REQUIRE(cells.size() == 2);
    CHECK(cells[0].aurr == cells[1].aurr);
    CHECK(cells[0].risk_at_level == cells[1].risk_at_level);
    CHECK(cells[0].aurc == cells[1].aurc);
}

TEST_CASE("sampling mode draws a deterministic physical mixture") {
    CounterRng rng(49, 1);
    SweepRequest req;
    for (int i = 0; i < 100; ++i)
        req.id_records.push_back(
            {1.0 + rng.next_normal(), i % 5 == 0 ? GroupKind::IdWrong : GroupKind::IdCorrect});
    std::vector<EvalRecord> ood;
    for (int i = 0; i < 100; ++i) ood.push_back({rng.next_normal(), GroupKind::Ood});
    req.ood_records["o"] = ood;
    req.alphas = {0.3};
    req.betas = {0.5};
    req.groupings = {{"all", {"o"}}};
    req.sample_mode = true;
    req.sample_seed = 9;

    const auto once = sweep(req);
    const auto twice = sweep(req);
    REQUIRE(once.size() == 1);
    CHECK(once[0].aurr == twice[0].aurr);
    CHECK(once[0].aurc == twice[0].aurc);
    req.sample_seed = 10;
    const auto other = sweep(req);
    CHECK(once[0].aurr != other[0].aurr);  // different draw
}

TEST_CASE("config validation") {
    const RiskConfig bad_alpha{-0.1, 0.5};
    const RiskConfig bad_beta{0.5, 1.5};
    CHECK_THROWS_AS(bad_alpha.validate(), ConfigError);
    CHECK_THROWS_AS(bad_beta.validate(), ConfigError);
    CHECK_THROWS_AS(fpr_at_tpr(std::vector<double>{1.0}, std::vector<double>{0.0}, 0.0),
                    ConfigError);
    CHECK_THROWS_AS(
        risk_at_recall(std::vector<EvalRecord>{{1.0, GroupKind::IdCorrect}}, {0.5, 0.5}, 1.5),
        ConfigError);
}
