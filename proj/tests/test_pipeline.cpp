#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "scod/pipeline.hpp"

using namespace scod;

namespace {

std::filesystem::path fresh_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "scod_pipeline_tests" / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

SynthConfig small_synth() {
    SynthConfig cfg;
    cfg.n_train = 400;
    cfg.n_id_test = 250;
    cfg.n_ood = 200;
    return cfg;
}

}  // namespace

TEST_CASE("config parsing validates and resolves paths") {
    const auto dir = fresh_dir("config");
    const std::string text = R"({
      "version": 1,
      "seed": 3,
      "output_dir": "results",
      "id_train": {"logits": "a.sct", "features": "b.sct", "labels": "c.sct"},
      "id_test": {"logits": "d.sct", "features": "e.sct", "labels": "f.sct"},
      "ood": {"near": {"logits": "g.sct", "features": "h.sct"}},
      "scores": ["msp", {"s1": "msp", "s2": "l1_norm", "a": -2.0, "b": 4.0}],
      "grid": {"alphas": [0.25, 0.5], "betas": [0.5], "tpr_level": 0.9},
      "groupings": {"all": ["near"]}
    })";
    const ExperimentConfig cfg = ExperimentConfig::from_json_text(text, dir);
    CHECK(cfg.seed == 3);
    CHECK(cfg.output_dir == dir / "results");
    CHECK(cfg.id_train.logits == dir / "a.sct");
    CHECK(cfg.scores.size() == 2);
    CHECK(cfg.scores[1].id.name() == "sirc-msp-l1_norm");
    CHECK(cfg.scores[1].a_override == -2.0);
    CHECK(cfg.tpr_level == 0.9);

    CHECK_THROWS_AS(ExperimentConfig::from_json_text("{}", dir), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json_text("not json", dir), ConfigError);

    std::string dup = text;
    const auto pos = dup.find("d.sct");
    dup.replace(pos, 5, "a.sct");
    CHECK_THROWS_WITH_AS(ExperimentConfig::from_json_text(dup, dir),
                         doctest::Contains("repeats"), ConfigError);

    std::string bad_group = text;
    const auto gpos = bad_group.find("[\"near\"]");
    bad_group.replace(gpos, 8, "[\"far\"]");
    CHECK_THROWS_WITH_AS(ExperimentConfig::from_json_text(bad_group, dir),
                         doctest::Contains("unknown OOD set"), ConfigError);
}

TEST_CASE("synth writes a runnable experiment") {
    const auto dir = fresh_dir("synth");
    const auto config_path = cmd_synth(small_synth(), dir);
    CHECK(std::filesystem::exists(dir / "id_train.logits.sct"));
    CHECK(std::filesystem::exists(dir / "ood1.features.sct"));
    CHECK(std::filesystem::exists(dir / "manifest.json"));

    const ExperimentConfig cfg = ExperimentConfig::load(config_path);
    CHECK(cfg.ood.size() == 2);
    CHECK(cfg.groupings.at("all").size() == 2);
    CHECK(cfg.subspace_dim == small_synth().signal_dim);
}

TEST_CASE("full pipeline produces reports and is reproducible") {
    const auto dir = fresh_dir("full");
    const auto config_path = cmd_synth(small_synth(), dir);
    const ExperimentConfig cfg = ExperimentConfig::load(config_path);

    PipelineOptions opt;
    opt.threads = 2;
    cmd_fit(cfg, opt);
    cmd_score(cfg, opt);
    cmd_eval(cfg, opt);
    cmd_sweep(cfg, opt);

    const auto out = cfg.output_dir;
    REQUIRE(std::filesystem::exists(out / "eval.csv"));
    REQUIRE(std::filesystem::exists(out / "sweep.csv"));
    const std::string eval_first = slurp(out / "eval.csv");
    const std::string sweep_first = slurp(out / "sweep.csv");
    const std::string stats_first = slurp(out / "stats.json");

    // Second run, different thread count, same bytes.
    PipelineOptions opt2;
    opt2.threads = 5;
    cmd_fit(cfg, opt2);
    cmd_score(cfg, opt2);
    cmd_eval(cfg, opt2);
    cmd_sweep(cfg, opt2);
    CHECK(slurp(out / "eval.csv") == eval_first);
    CHECK(slurp(out / "sweep.csv") == sweep_first);
    CHECK(slurp(out / "stats.json") == stats_first);

    // The eval table carries one row per negative class plus the OOD mean.
    const std::string header = eval_first.substr(0, eval_first.find('\n'));
    CHECK(header == "score,negative,auroc,fpr95");
    CHECK(eval_first.find("msp,ood_mean,") != std::string::npos);
    CHECK(eval_first.find("sirc-msp-l1_norm,id_wrong,") != std::string::npos);
}

TEST_CASE("sweep can dump curves and honors full precision") {
    const auto dir = fresh_dir("curves");
    SynthConfig synth = small_synth();
    synth.n_id_test = 120;
    synth.n_ood = 100;
    const auto config_path = cmd_synth(synth, dir);
    ExperimentConfig cfg = ExperimentConfig::load(config_path);
    cfg.scores = {{ScoreId::simple(ScoreKind::Msp), std::nullopt, std::nullopt}};
    cfg.alphas = {0.5};
    cfg.betas = {0.5};

    PipelineOptions opt;
    opt.dump_curves = true;
    opt.full_precision = true;
    cmd_fit(cfg, opt);
    cmd_score(cfg, opt);
    cmd_sweep(cfg, opt);
    CHECK(std::filesystem::exists(cfg.output_dir / "curves" / "msp.all.a0.5.b0.5.rr.csv"));
    CHECK(std::filesystem::exists(cfg.output_dir / "curves" / "msp.all.a0.5.b0.5.rc.csv"));
    const std::string sweep_csv = slurp(cfg.output_dir / "sweep.csv");
    CHECK(sweep_csv.find('.') != std::string::npos);
}

TEST_CASE("plotdata emits samples and contours") {
    const auto dir = fresh_dir("plot");
    SynthConfig synth = small_synth();
    synth.n_id_test = 150;
    synth.n_ood = 120;
    const auto config_path = cmd_synth(synth, dir);
    const ExperimentConfig cfg = ExperimentConfig::load(config_path);

    PipelineOptions opt;
    cmd_fit(cfg, opt);
    cmd_plotdata(cfg, opt, ScoreId::sirc(ScoreKind::Msp, ScoreKind::L1Norm));
    const std::string samples = slurp(cfg.output_dir / "plot_samples.csv");
    CHECK(samples.rfind("dataset,group,s1,s2", 0) == 0);
    CHECK(samples.find("id_correct") != std::string::npos);
    CHECK(samples.find("ood") != std::string::npos);
    const std::string contours = slurp(cfg.output_dir / "plot_contours.csv");
    CHECK(contours.find("sirc,") != std::string::npos);
    CHECK(contours.find("linear,") != std::string::npos);
    CHECK(contours.find("product,") != std::string::npos);
}

TEST_CASE("missing stats surface as data errors") {
    const auto dir = fresh_dir("missing");
    const auto config_path = cmd_synth(small_synth(), dir);
    const ExperimentConfig cfg = ExperimentConfig::load(config_path);
    PipelineOptions opt;
    CHECK_THROWS_AS(cmd_score(cfg, opt), DataError);  // no stats.json yet
}
