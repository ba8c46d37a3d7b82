#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>

#include "scod/pipeline.hpp"

namespace {

struct GlobalArgs {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    unsigned threads = 1;
    bool full_precision = false;
    bool allow_nonfinite = false;
    bool sample_mode = false;
};

scod::PipelineOptions make_options(const GlobalArgs& g) {
    scod::PipelineOptions opt;
    opt.threads = g.threads;
    opt.full_precision = g.full_precision;
    opt.allow_nonfinite = g.allow_nonfinite;
    opt.sample_mode = g.sample_mode;
    opt.seed_override = g.seed;
    if (!g.out_dir.empty()) opt.out_override = g.out_dir;
    return opt;
}

scod::ExperimentConfig load_config(const GlobalArgs& g) {
    if (g.config_path.empty())
        throw scod::ConfigError("bad_config", "this command needs --config <path>");
    return scod::ExperimentConfig::load(g.config_path);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Selective-classification-with-OOD scoring and evaluation pipeline"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand

    GlobalArgs g;
    app.add_option("--config", g.config_path, "Experiment config JSON");
    app.add_option("--out", g.out_dir, "Output directory (overrides config)");
    app.add_option("--seed", g.seed, "Seed override");
    app.add_option("--threads", g.threads, "Worker threads for row-wise scoring");
    app.add_flag("--full-precision", g.full_precision, "17-significant-digit CSV values");
    app.add_flag("--allow-nonfinite", g.allow_nonfinite, "Tolerate NaN/Inf in tensor files");
    app.add_flag("--sample", g.sample_mode, "Realize alpha by subsampling instead of reweighting");

    auto* fit = app.add_subcommand("fit", "Fit ID-train statistics into stats.json");
    auto* score = app.add_subcommand("score", "Score every configured dataset");
    auto* eval = app.add_subcommand("eval", "AUROC / FPR tables per score and negative class");
    auto* sweep = app.add_subcommand("sweep", "Risk metrics over the (alpha, beta) grid");
    bool dump_curves = false;
    sweep->add_flag("--curves", dump_curves, "Also dump risk-recall/risk-coverage curves");

    auto* synth = app.add_subcommand("synth", "Generate the synthetic benchmark");
    scod::SynthConfig synth_cfg;
    synth->add_option("--classes", synth_cfg.num_classes, "K");
    synth->add_option("--feature-dim", synth_cfg.feature_dim, "L");
    synth->add_option("--signal-dim", synth_cfg.signal_dim, "Class-mean subspace dimension");
    synth->add_option("--n-train", synth_cfg.n_train, "ID train samples");
    synth->add_option("--n-id-test", synth_cfg.n_id_test, "ID test samples");
    synth->add_option("--n-ood", synth_cfg.n_ood, "Samples per OOD set");
    synth->add_option("--ood-sets", synth_cfg.num_ood_sets, "Number of OOD sets");
    synth->add_option("--logit-noise", synth_cfg.logit_noise, "Logit noise sigma");
    synth->add_option("--class-margin", synth_cfg.class_margin, "Class margin m");
    synth->add_option("--ood-scale", synth_cfg.ood_feature_scale, "OOD feature shrink (0,1]");
    synth->add_option("--ood-boost", synth_cfg.ood_residual_boost, "OOD off-subspace spike");

    auto* noise = app.add_subcommand("noise-gen", "Generate noise PPM images");
    scod::NoiseConfig noise_cfg;
    noise->add_option("--count", noise_cfg.count, "Number of images");
    noise->add_option("--min-width", noise_cfg.min_width, "Minimum sampled width");
    noise->add_option("--max-width", noise_cfg.max_width, "Maximum sampled width");
    noise->add_option("--out-size", noise_cfg.out_size, "Output resolution");

    auto* plot = app.add_subcommand("plotdata", "Score-plane samples and decision contours");
    std::string pair_name;
    double linear_c = 0.0;
    bool linear_c_set = false;
    plot->add_option("--pair", pair_name, "SIRC score to plot, e.g. sirc-msp-l1_norm");
    plot->add_option("--linear-c", linear_c, "Coefficient for the linear combiner")
        ->each([&](const std::string&) { linear_c_set = true; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        const scod::PipelineOptions opt = make_options(g);
        if (fit->parsed()) {
            std::cout << scod::cmd_fit(load_config(g), opt).string() << "\n";
        } else if (score->parsed()) {
            std::cout << scod::cmd_score(load_config(g), opt).string() << "\n";
        } else if (eval->parsed()) {
            std::cout << scod::cmd_eval(load_config(g), opt).string() << "\n";
        } else if (sweep->parsed()) {
            scod::PipelineOptions sweep_opt = opt;
            sweep_opt.dump_curves = dump_curves;
            std::cout << scod::cmd_sweep(load_config(g), sweep_opt).string() << "\n";
        } else if (synth->parsed()) {
            if (g.seed) synth_cfg.seed = *g.seed;
            if (g.out_dir.empty())
                throw scod::ConfigError("bad_config", "synth needs --out <dir>");
            std::cout << scod::cmd_synth(synth_cfg, g.out_dir).string() << "\n";
        } else if (noise->parsed()) {
            if (g.seed) noise_cfg.seed = *g.seed;
            if (g.out_dir.empty())
                throw scod::ConfigError("bad_config", "noise-gen needs --out <dir>");
            std::cout << scod::cmd_noise_gen(noise_cfg, g.out_dir).string() << "\n";
        } else if (plot->parsed()) {
            std::optional<scod::ScoreId> pair;
            if (!pair_name.empty()) pair = scod::ScoreId::parse(pair_name);
            std::optional<double> c;
            if (linear_c_set) c = linear_c;
            std::cout << scod::cmd_plotdata(load_config(g), opt, pair, c).string() << "\n";
        }
    } catch (const scod::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(e.error_class());
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
