#include "scod/pipeline.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>

#include "scod/sirc.hpp"

namespace scod {

namespace {

using nlohmann::json;

json parse_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("io", "cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("bad_json", path.string() + ": " + e.what());
    }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

DatasetPaths parse_dataset_paths(const json& j, const std::filesystem::path& base,
                                 const std::string& what) {
    if (!j.is_object() || !j.contains("logits") || !j.contains("features"))
        throw ConfigError("bad_config", what + " needs logits and features paths");
    DatasetPaths p;
    p.logits = resolve(base, j["logits"].get<std::string>());
    p.features = resolve(base, j["features"].get<std::string>());
    if (j.contains("labels")) p.labels = resolve(base, j["labels"].get<std::string>());
    return p;
}

ScoreSpec parse_score_spec(const json& j) {
    ScoreSpec spec;
    if (j.is_string()) {
        spec.id = ScoreId::parse(j.get<std::string>());
        return spec;
    }
    if (!j.is_object())
        throw ConfigError("bad_config", "score entries must be names or {s1, s2} objects");
    if (j.contains("s1") || j.contains("s2")) {
        if (!j.contains("s1") || !j.contains("s2"))
            throw ConfigError("bad_config", "SIRC score objects need both s1 and s2");
        spec.id = ScoreId::sirc(parse_score_kind(j["s1"].get<std::string>()),
                                parse_score_kind(j["s2"].get<std::string>()));
        if (j.contains("a")) spec.a_override = j["a"].get<double>();
        if (j.contains("b")) spec.b_override = j["b"].get<double>();
        if (spec.b_override && !(*spec.b_override > 0.0))
            throw ConfigError("bad_config", "SIRC b override must be positive");
        return spec;
    }
    if (j.contains("score")) {
        spec.id = ScoreId::parse(j["score"].get<std::string>());
        return spec;
    }
    throw ConfigError("bad_config", "unrecognized score entry");
}

DatasetBundle load_bundle(const std::string& name, const DatasetPaths& paths, bool want_labels,
                          bool allow_nonfinite) {
    DatasetBundle b;
    b.name = name;
    b.logits = load_tensor(paths.logits, allow_nonfinite);
    b.features = load_tensor(paths.features, allow_nonfinite);
    if (want_labels) {
        if (!paths.labels) throw ConfigError("bad_config", name + ": ID split needs labels");
        b.labels = load_labels(*paths.labels, b.logits.cols());
    }
    b.validate();
    return b;
}

std::string group_code_name(GroupKind g) {
    switch (g) {
        case GroupKind::IdCorrect: return "id_correct";
        case GroupKind::IdWrong: return "id_wrong";
        case GroupKind::Ood: return "ood";
    }
    return "?";
}

TensorF32 groups_to_tensor(const std::vector<SampleGroup>& groups) {
    std::vector<float> codes(groups.size());
    for (std::size_t i = 0; i < groups.size(); ++i)
        codes[i] = static_cast<float>(static_cast<int>(groups[i].kind));
    return TensorF32({groups.size()}, std::move(codes));
}

std::vector<GroupKind> tensor_to_groups(const TensorF32& t) {
    std::vector<GroupKind> out(t.data.size());
    for (std::size_t i = 0; i < t.data.size(); ++i) {
        const int code = static_cast<int>(t.data[i]);
        if (code < 0 || code > 2 || static_cast<float>(code) != t.data[i])
            throw DataError("bad_label", "group file holds an invalid code");
        out[i] = static_cast<GroupKind>(code);
    }
    return out;
}

// Scores required to exist before SIRC columns can be assembled.
std::set<std::string> base_score_names(const std::vector<ScoreSpec>& specs) {
    std::set<std::string> names;
    for (const auto& s : specs) {
        if (s.id.kind == ScoreKind::Sirc) {
            names.insert(ScoreId::simple(s.id.s1).name());
            names.insert(ScoreId::simple(s.id.s2).name());
        } else {
            names.insert(s.id.name());
        }
    }
    return names;
}

SircParams sirc_params_for(const ScoreSpec& spec, const IdStats& stats) {
    SircParams p = make_sirc_params(spec.id.s1, stats.s2_for(ScoreId::simple(spec.id.s2)));
    if (spec.a_override) p.a = *spec.a_override;
    if (spec.b_override) p.b = *spec.b_override;
    return p;
}

struct LoadedScores {
    // dataset -> groups; dataset -> score name -> values
    std::map<std::string, std::vector<GroupKind>> groups;
    std::map<std::string, std::map<std::string, std::vector<double>>> values;
    std::vector<std::string> ood_names;
    double tpr_level = 0.95;
};

LoadedScores load_score_outputs(const ExperimentConfig& cfg, const std::filesystem::path& out) {
    const json manifest = parse_json_file(out / "score_manifest.json");
    if (!manifest.contains("version") || manifest["version"] != 1)
        throw DataError("schema", "score manifest version mismatch");
    LoadedScores loaded;
    loaded.tpr_level = cfg.tpr_level;
    for (const auto& [name, entry] : manifest.at("datasets").items()) {
        const TensorF32 g = load_tensor(out / entry.at("groups").get<std::string>());
        loaded.groups[name] = tensor_to_groups(g);
        for (const auto& [score, rel] : entry.at("scores").items()) {
            const TensorF32 t = load_tensor(out / rel.get<std::string>());
            loaded.values[name][score].assign(t.data.begin(), t.data.end());
        }
        if (entry.at("is_ood").get<bool>()) loaded.ood_names.push_back(name);
    }
    std::sort(loaded.ood_names.begin(), loaded.ood_names.end());
    return loaded;
}

std::vector<EvalRecord> make_records(const std::vector<double>& scores,
                                     const std::vector<GroupKind>& groups) {
    if (scores.size() != groups.size())
        throw DataError("bad_dims", "score and group lengths disagree");
    std::vector<EvalRecord> out(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) out[i] = {scores[i], groups[i]};
    return out;
}

std::string trimmed_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

}  // namespace

std::string format_value(double v, bool full_precision) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), full_precision ? "%.17g" : "%.6f", v);
    return buf;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
    std::filesystem::create_directories(path.parent_path());
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("io", "cannot open " + tmp.string() + " for writing");
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) throw DataError("io", "write failure on " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

void ExperimentConfig::validate() const {
    if (scores.empty()) throw ConfigError("bad_config", "need at least one score");
    for (double a : alphas)
        if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("bad_config", "alphas must lie in [0,1]");
    for (double b : betas)
        if (!(b >= 0.0 && b <= 1.0)) throw ConfigError("bad_config", "betas must lie in [0,1]");
    if (alphas.empty() || betas.empty())
        throw ConfigError("bad_config", "grid needs at least one alpha and one beta");
    if (!(tpr_level > 0.0 && tpr_level <= 1.0))
        throw ConfigError("bad_config", "tpr_level must lie in (0,1]");

    std::set<std::string> seen;
    auto check_distinct = [&seen](const std::filesystem::path& p, const char* what) {
        if (!seen.insert(p.string()).second)
            throw ConfigError("bad_config", std::string(what) + " path repeats: " + p.string());
    };
    check_distinct(id_train.logits, "logits");
    check_distinct(id_train.features, "features");
    check_distinct(id_test.logits, "logits");
    check_distinct(id_test.features, "features");
    for (const auto& [name, p] : ood) {
        check_distinct(p.logits, "logits");
        check_distinct(p.features, "features");
        if (p.labels) throw ConfigError("bad_config", "OOD set " + name + " must not carry labels");
    }
    for (const auto& [gname, members] : groupings) {
        for (const auto& m : members) {
            if (!ood.contains(m))
                throw ConfigError("bad_config",
                                  "grouping " + gname + " references unknown OOD set " + m);
        }
    }
    if (!(ridge_lambda >= 0.0)) throw ConfigError("bad_config", "ridge_lambda must be >= 0");
}

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text,
                                                  const std::filesystem::path& base_dir) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError("bad_json", std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.contains("version") || j["version"] != 1)
        throw ConfigError("bad_config", "config schema version mismatch (expected 1)");

    ExperimentConfig cfg;
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("output_dir"))
        cfg.output_dir = resolve(base_dir, j["output_dir"].get<std::string>());
    if (!j.contains("id_train") || !j.contains("id_test"))
        throw ConfigError("bad_config", "config needs id_train and id_test");
    cfg.id_train = parse_dataset_paths(j["id_train"], base_dir, "id_train");
    cfg.id_test = parse_dataset_paths(j["id_test"], base_dir, "id_test");
    if (j.contains("ood")) {
        for (const auto& [name, entry] : j["ood"].items())
            cfg.ood.emplace(name, parse_dataset_paths(entry, base_dir, "ood set " + name));
    }
    if (!j.contains("scores")) throw ConfigError("bad_config", "config needs a score list");
    for (const auto& entry : j["scores"]) cfg.scores.push_back(parse_score_spec(entry));
    if (j.contains("grid")) {
        const json& g = j["grid"];
        if (g.contains("alphas")) cfg.alphas = g["alphas"].get<std::vector<double>>();
        if (g.contains("betas")) cfg.betas = g["betas"].get<std::vector<double>>();
        if (g.contains("tpr_level")) cfg.tpr_level = g["tpr_level"].get<double>();
    }
    if (j.contains("groupings")) {
        for (const auto& [name, members] : j["groupings"].items())
            cfg.groupings.emplace(name, members.get<std::vector<std::string>>());
    }
    if (cfg.groupings.empty() && !cfg.ood.empty()) {
        std::vector<std::string> all;
        for (const auto& [name, _] : cfg.ood) all.push_back(name);
        cfg.groupings.emplace("all", std::move(all));
    }
    if (j.contains("subspace_dim")) cfg.subspace_dim = j["subspace_dim"].get<std::uint64_t>();
    if (j.contains("ridge_lambda")) cfg.ridge_lambda = j["ridge_lambda"].get<double>();
    cfg.validate();
    return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("io", "cannot open config " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_json_text(text, std::filesystem::absolute(path).parent_path());
}

std::string ExperimentConfig::to_json_text() const {
    json j;
    j["version"] = 1;
    j["seed"] = seed;
    j["output_dir"] = output_dir.string();
    auto dataset_json = [](const DatasetPaths& p) {
        json d;
        d["logits"] = p.logits.string();
        d["features"] = p.features.string();
        if (p.labels) d["labels"] = p.labels->string();
        return d;
    };
    j["id_train"] = dataset_json(id_train);
    j["id_test"] = dataset_json(id_test);
    json ood_json = json::object();
    for (const auto& [name, p] : ood) ood_json[name] = dataset_json(p);
    j["ood"] = ood_json;
    json score_json = json::array();
    for (const auto& s : scores) {
        if (s.id.kind == ScoreKind::Sirc && (s.a_override || s.b_override)) {
            json o;
            o["s1"] = std::string(score_kind_name(s.id.s1));
            o["s2"] = std::string(score_kind_name(s.id.s2));
            if (s.a_override) o["a"] = *s.a_override;
            if (s.b_override) o["b"] = *s.b_override;
            score_json.push_back(o);
        } else {
            score_json.push_back(s.id.name());
        }
    }
    j["scores"] = score_json;
    j["grid"] = {{"alphas", alphas}, {"betas", betas}, {"tpr_level", tpr_level}};
    json grouping_json = json::object();
    for (const auto& [name, members] : groupings) grouping_json[name] = members;
    j["groupings"] = grouping_json;
    if (subspace_dim) j["subspace_dim"] = *subspace_dim;
    j["ridge_lambda"] = ridge_lambda;
    return j.dump(2) + "\n";
}

std::filesystem::path cmd_fit(const ExperimentConfig& cfg, const PipelineOptions& opt) {
    cfg.validate();
    const std::filesystem::path out = opt.resolve_out(cfg);
    const DatasetBundle train = load_bundle("id_train", cfg.id_train, true, opt.allow_nonfinite);

    bool want_subspace = false, want_gaussians = false, want_vim = false;
    std::set<std::string> sirc_s2;
    for (const auto& spec : cfg.scores) {
        want_subspace |= score_needs_subspace(spec.id);
        want_gaussians |= score_needs_gaussians(spec.id);
        want_vim |= score_needs_vim_scale(spec.id);
        if (spec.id.kind == ScoreKind::Sirc)
            sirc_s2.insert(ScoreId::simple(spec.id.s2).name());
    }

    IdStats stats;
    stats.num_classes = train.num_classes();
    stats.feature_dim = train.feature_dim();
    if (want_subspace) {
        stats.subspace = fit_subspace(train.features, cfg.subspace_dim);
        if (!cfg.subspace_dim) {
            const std::uint64_t rule = default_subspace_dim(train.feature_dim());
            std::cerr << "fit: subspace d=" << stats.subspace->d << " (rule " << rule
                      << (stats.subspace->d != rule ? ", clamped by data size)" : ")") << "\n";
        }
    }
    if (want_gaussians)
        stats.gaussians = fit_class_gaussians(train.features, *train.labels, train.num_classes(),
                                              cfg.ridge_lambda);
    if (want_vim)
        stats.vim_c = fit_vim_scale(train.logits, train.features, *stats.subspace);
    for (const std::string& name : sirc_s2) {
        const ScoreId id = ScoreId::parse(name);
        const ScoreVec vec = score_dataset(train, id, &stats, opt.threads);
        stats.s2_stats.emplace(name, fit_s2_stats(vec));
    }

    const std::filesystem::path path = out / "stats.json";
    write_file_atomic(path, stats_to_json(stats));
    return path;
}

std::filesystem::path cmd_score(const ExperimentConfig& cfg, const PipelineOptions& opt) {
    cfg.validate();
    const std::filesystem::path out = opt.resolve_out(cfg);
    const IdStats stats = load_stats(out / "stats.json");

    std::vector<std::pair<std::string, DatasetBundle>> datasets;
    datasets.emplace_back("id_test", load_bundle("id_test", cfg.id_test, true, opt.allow_nonfinite));
    for (const auto& [name, paths] : cfg.ood)
        datasets.emplace_back(name, load_bundle(name, paths, false, opt.allow_nonfinite));

    std::filesystem::create_directories(out / "scores");
    std::filesystem::create_directories(out / "groups");

    json manifest;
    manifest["version"] = 1;
    json datasets_json = json::object();
    for (const auto& [name, bundle] : datasets) {
        const bool is_ood = !bundle.labels.has_value();
        const std::vector<SampleGroup> groups = label_groups(bundle, is_ood);
        const std::string group_rel = "groups/" + name + ".sct";
        save_tensor(groups_to_tensor(groups), out / group_rel);

        // Base scores first so SIRC columns can reuse them.
        std::map<std::string, ScoreVec> base;
        for (const std::string& sname : base_score_names(cfg.scores)) {
            const ScoreId id = ScoreId::parse(sname);
            base.emplace(sname, score_dataset(bundle, id, &stats, opt.threads));
        }
        json score_files = json::object();
        auto write_score = [&](const ScoreVec& vec) {
            const std::string rel = "scores/" + name + "." + vec.id.name() + ".sct";
            std::vector<float> data(vec.values.begin(), vec.values.end());
            save_tensor(TensorF32({vec.values.size()}, std::move(data)), out / rel);
            score_files[vec.id.name()] = rel;
        };
        std::set<std::string> written;
        for (const auto& spec : cfg.scores) {
            if (!written.insert(spec.id.name()).second) continue;
            if (spec.id.kind == ScoreKind::Sirc) {
                const SircParams params = sirc_params_for(spec, stats);
                const ScoreVec combined =
                    sirc_score_dataset(base.at(ScoreId::simple(spec.id.s1).name()),
                                       base.at(ScoreId::simple(spec.id.s2).name()), params,
                                       opt.threads);
                write_score(combined);
            } else {
                write_score(base.at(spec.id.name()));
            }
        }
        datasets_json[name] = {{"is_ood", is_ood}, {"groups", group_rel}, {"scores", score_files}};
    }
    manifest["datasets"] = datasets_json;

    const std::filesystem::path path = out / "score_manifest.json";
    write_file_atomic(path, manifest.dump(2) + "\n");
    return path;
}

std::filesystem::path cmd_eval(const ExperimentConfig& cfg, const PipelineOptions& opt) {
    cfg.validate();
    const std::filesystem::path out = opt.resolve_out(cfg);
    const LoadedScores loaded = load_score_outputs(cfg, out);

    const auto& id_groups = loaded.groups.at("id_test");
    std::string csv = "score,negative,auroc,fpr" + trimmed_number(loaded.tpr_level * 100) + "\n";
    json rows = json::array();

    std::set<std::string> written;
    for (const auto& spec : cfg.scores) {
        const std::string sname = spec.id.name();
        if (!written.insert(sname).second) continue;
        const auto& id_scores = loaded.values.at("id_test").at(sname);
        std::vector<double> pos, neg_wrong;
        for (std::size_t i = 0; i < id_scores.size(); ++i) {
            (id_groups[i] == GroupKind::IdCorrect ? pos : neg_wrong).push_back(id_scores[i]);
        }
        auto emit = [&](const std::string& negative, double auc, double fpr) {
            csv += sname + "," + negative + "," + format_value(auc, opt.full_precision) + "," +
                   format_value(fpr, opt.full_precision) + "\n";
            rows.push_back({{"score", sname},
                            {"negative", negative},
                            {"auroc", auc},
                            {"fpr", fpr}});
        };
        emit("id_wrong", auroc(pos, neg_wrong), fpr_at_tpr(pos, neg_wrong, loaded.tpr_level));
        double auc_sum = 0.0, fpr_sum = 0.0;
        for (const std::string& ood_name : loaded.ood_names) {
            const auto& ood_scores = loaded.values.at(ood_name).at(sname);
            const double auc = auroc(pos, ood_scores);
            const double fpr = fpr_at_tpr(pos, ood_scores, loaded.tpr_level);
            auc_sum += auc;
            fpr_sum += fpr;
            emit("ood:" + ood_name, auc, fpr);
        }
        if (!loaded.ood_names.empty()) {
            const double n = static_cast<double>(loaded.ood_names.size());
            emit("ood_mean", auc_sum / n, fpr_sum / n);
        }
    }

    write_file_atomic(out / "eval.csv", csv);
    json report;
    report["version"] = 1;
    report["tpr_level"] = loaded.tpr_level;
    report["threshold_rule"] = "largest threshold with TPR >= level; acceptance is score >= t";
    report["ood_mean"] = "unweighted mean over OOD sets";
    report["rows"] = rows;
    write_file_atomic(out / "eval.json", report.dump(2) + "\n");
    return out / "eval.csv";
}

std::filesystem::path cmd_sweep(const ExperimentConfig& cfg, const PipelineOptions& opt) {
    cfg.validate();
    const std::filesystem::path out = opt.resolve_out(cfg);
    const LoadedScores loaded = load_score_outputs(cfg, out);
    const auto& id_groups = loaded.groups.at("id_test");

    std::string csv =
        "score,grouping,alpha,beta,aurr,risk_at_level,aurc,aurc_oracle,"
        "aurr_x100,risk_x100,aurc_x100\n";
    json rows = json::array();

    std::set<std::string> written;
    for (const auto& spec : cfg.scores) {
        const std::string sname = spec.id.name();
        if (!written.insert(sname).second) continue;

        SweepRequest req;
        req.id_records = make_records(loaded.values.at("id_test").at(sname), id_groups);
        for (const std::string& ood_name : loaded.ood_names) {
            req.ood_records[ood_name] =
                make_records(loaded.values.at(ood_name).at(sname), loaded.groups.at(ood_name));
        }
        req.alphas = cfg.alphas;
        req.betas = cfg.betas;
        req.groupings = cfg.groupings;
        req.recall_level = cfg.tpr_level;
        req.sample_mode = opt.sample_mode;
        req.sample_seed = opt.resolve_seed(cfg);

        for (const SweepCell& cell : sweep(req)) {
            csv += sname + "," + cell.grouping + "," + trimmed_number(cell.alpha) + "," +
                   trimmed_number(cell.beta) + "," + format_value(cell.aurr, opt.full_precision) +
                   "," + format_value(cell.risk_at_level, opt.full_precision) + "," +
                   format_value(cell.aurc, opt.full_precision) + "," +
                   format_value(cell.aurc_oracle, opt.full_precision) + "," +
                   format_value(cell.aurr * 100.0, opt.full_precision) + "," +
                   format_value(cell.risk_at_level * 100.0, opt.full_precision) + "," +
                   format_value(cell.aurc * 100.0, opt.full_precision) + "\n";
            rows.push_back({{"score", sname},
                            {"grouping", cell.grouping},
                            {"alpha", cell.alpha},
                            {"beta", cell.beta},
                            {"aurr", cell.aurr},
                            {"risk_at_level", cell.risk_at_level},
                            {"aurc", cell.aurc},
                            {"aurc_oracle", cell.aurc_oracle}});

            if (opt.dump_curves) {
                const std::string stem = sname + "." + cell.grouping + ".a" +
                                         trimmed_number(cell.alpha) + ".b" +
                                         trimmed_number(cell.beta);
                std::vector<EvalRecord> pooled = req.id_records;
                for (const std::string& m : cfg.groupings.at(cell.grouping)) {
                    const auto& more = req.ood_records.at(m);
                    pooled.insert(pooled.end(), more.begin(), more.end());
                }
                const RiskConfig rc{cell.alpha, cell.beta};
                auto dump = [&](const Curve& curve, const std::string& kind) {
                    std::string text = "threshold,x,risk\n";
                    for (const CurvePoint& p : curve.points)
                        text += format_value(p.threshold, true) + "," + format_value(p.x, true) +
                                "," + format_value(p.risk, true) + "\n";
                    write_file_atomic(out / "curves" / (stem + "." + kind + ".csv"), text);
                };
                dump(risk_recall_curve(pooled, rc), "rr");
                dump(risk_coverage_curve(pooled, rc).curve, "rc");
            }
        }
    }

    write_file_atomic(out / "sweep.csv", csv);
    json report;
    report["version"] = 1;
    report["recall_level"] = cfg.tpr_level;
    report["alpha_mode"] = opt.sample_mode ? "sampled" : "reweighted";
    report["empty_acceptance"] = "curves start at the first threshold with accepted weight";
    report["rows"] = rows;
    write_file_atomic(out / "sweep.json", report.dump(2) + "\n");
    return out / "sweep.csv";
}

std::filesystem::path cmd_synth(const SynthConfig& cfg, const std::filesystem::path& out_dir) {
    const SynthBenchmark bench = gen_benchmark(cfg);
    std::filesystem::create_directories(out_dir);

    auto save_bundle = [&](const DatasetBundle& b) {
        save_tensor(b.logits, out_dir / (b.name + ".logits.sct"));
        save_tensor(b.features, out_dir / (b.name + ".features.sct"));
        if (b.labels) save_labels(*b.labels, out_dir / (b.name + ".labels.sct"));
    };
    save_bundle(bench.train);
    save_bundle(bench.id_test);
    for (const auto& b : bench.ood) save_bundle(b);

    json manifest;
    manifest["version"] = 1;
    manifest["seed"] = cfg.seed;
    manifest["num_classes"] = cfg.num_classes;
    manifest["feature_dim"] = cfg.feature_dim;
    manifest["signal_dim"] = cfg.signal_dim;
    manifest["counts"] = {{"id_train", cfg.n_train},
                          {"id_test", cfg.n_id_test},
                          {"per_ood_set", cfg.n_ood}};
    json names = json::array();
    for (const auto& b : bench.ood) names.push_back(b.name);
    manifest["ood_sets"] = names;
    write_file_atomic(out_dir / "manifest.json", manifest.dump(2) + "\n");

    // Ready-to-run experiment config pointing at the generated files.
    ExperimentConfig exp;
    exp.seed = cfg.seed;
    exp.output_dir = "results";
    exp.id_train = {"id_train.logits.sct", "id_train.features.sct",
                    std::filesystem::path("id_train.labels.sct")};
    exp.id_test = {"id_test.logits.sct", "id_test.features.sct",
                   std::filesystem::path("id_test.labels.sct")};
    std::vector<std::string> ood_names;
    for (const auto& b : bench.ood) {
        exp.ood.emplace(b.name, DatasetPaths{b.name + ".logits.sct", b.name + ".features.sct",
                                             std::nullopt});
        ood_names.push_back(b.name);
    }
    for (ScoreKind k : {ScoreKind::Msp, ScoreKind::NegEntropy, ScoreKind::Doctor,
                        ScoreKind::MaxLogit, ScoreKind::Energy, ScoreKind::L1Norm,
                        ScoreKind::NegResidual, ScoreKind::Mahalanobis, ScoreKind::Gradnorm,
                        ScoreKind::Vim})
        exp.scores.push_back({ScoreId::simple(k), std::nullopt, std::nullopt});
    for (ScoreKind s1 : {ScoreKind::Msp, ScoreKind::NegEntropy})
        for (ScoreKind s2 : {ScoreKind::L1Norm, ScoreKind::NegResidual})
            exp.scores.push_back({ScoreId::sirc(s1, s2), std::nullopt, std::nullopt});
    exp.groupings.emplace("all", ood_names);
    exp.subspace_dim = cfg.signal_dim;
    write_file_atomic(out_dir / "config.json", exp.to_json_text());
    return out_dir / "config.json";
}

std::filesystem::path cmd_noise_gen(const NoiseConfig& cfg,
                                    const std::filesystem::path& out_dir) {
    gen_noise_images(cfg, out_dir);
    return out_dir;
}

std::filesystem::path cmd_plotdata(const ExperimentConfig& cfg, const PipelineOptions& opt,
                                   std::optional<ScoreId> pair, std::optional<double> linear_c) {
    cfg.validate();
    const std::filesystem::path out = opt.resolve_out(cfg);

    ScoreSpec spec;
    bool found = false;
    for (const auto& s : cfg.scores) {
        if (s.id.kind != ScoreKind::Sirc) continue;
        if (pair && !(s.id == *pair)) continue;
        spec = s;
        found = true;
        break;
    }
    if (!found) throw ConfigError("bad_config", "plotdata needs a SIRC score in the config");

    const IdStats stats = load_stats(out / "stats.json");
    const SircParams params = sirc_params_for(spec, stats);
    const ScoreId s1_id = ScoreId::simple(spec.id.s1);
    const ScoreId s2_id = ScoreId::simple(spec.id.s2);

    std::vector<std::pair<std::string, DatasetBundle>> datasets;
    datasets.emplace_back("id_test", load_bundle("id_test", cfg.id_test, true, opt.allow_nonfinite));
    for (const auto& [name, paths] : cfg.ood)
        datasets.emplace_back(name, load_bundle(name, paths, false, opt.allow_nonfinite));

    std::string samples = "dataset,group,s1,s2\n";
    std::vector<double> all_s1, all_s2;
    for (const auto& [name, bundle] : datasets) {
        const ScoreVec s1 = score_dataset(bundle, s1_id, &stats, opt.threads);
        const ScoreVec s2 = score_dataset(bundle, s2_id, &stats, opt.threads);
        const std::vector<SampleGroup> groups = label_groups(bundle, !bundle.labels.has_value());
        for (std::size_t i = 0; i < s1.values.size(); ++i) {
            samples += name + "," + group_code_name(groups[i].kind) + "," +
                       format_value(s1.values[i], true) + "," + format_value(s2.values[i], true) +
                       "\n";
            all_s1.push_back(s1.values[i]);
            all_s2.push_back(s2.values[i]);
        }
    }
    write_file_atomic(out / "plot_samples.csv", samples);

    const auto [s1_lo_it, s1_hi_it] = std::minmax_element(all_s1.begin(), all_s1.end());
    const auto [s2_lo_it, s2_hi_it] = std::minmax_element(all_s2.begin(), all_s2.end());
    const double s1_pad = 0.05 * (*s1_hi_it - *s1_lo_it);
    const double s2_pad = 0.05 * (*s2_hi_it - *s2_lo_it);
    const double s1_lo = *s1_lo_it - s1_pad, s1_hi = *s1_hi_it + s1_pad;
    const double s2_lo = *s2_lo_it - s2_pad, s2_hi = *s2_hi_it + s2_pad;

    const double c_linear =
        linear_c.value_or([&] {
            auto stddev = [](const std::vector<double>& v) {
                double mean = 0.0;
                for (double x : v) mean += x;
                mean /= static_cast<double>(v.size());
                double ss = 0.0;
                for (double x : v) ss += (x - mean) * (x - mean);
                return std::sqrt(ss / static_cast<double>(v.size() - 1));
            };
            const double s2_sd = stddev(all_s2);
            return s2_sd > 0.0 ? stddev(all_s1) / s2_sd : 1.0;
        }());

    struct Combiner {
        std::string name;
        std::function<double(double, double)> eval;
    };
    const std::vector<Combiner> combiners = {
        {"sirc", [&](double a, double b) { return sirc_combine_direct(a, b, params); }},
        {"linear", [&](double a, double b) { return a + c_linear * b; }},
        {"product", [](double a, double b) { return a * b; }},
    };

    constexpr int kGrid = 64;
    std::string contours = "combiner,level,s1,s2\n";
    for (const Combiner& comb : combiners) {
        // Contour levels at deciles of the combined score over the samples.
        std::vector<double> values(all_s1.size());
        for (std::size_t i = 0; i < all_s1.size(); ++i)
            values[i] = comb.eval(all_s1[i], all_s2[i]);
        std::sort(values.begin(), values.end());
        for (int decile = 1; decile <= 9; ++decile) {
            const double level = values[values.size() * decile / 10];
            for (int gi = 0; gi < kGrid; ++gi) {
                const double s1 = s1_lo + (s1_hi - s1_lo) * gi / (kGrid - 1);
                double lo = s2_lo, hi = s2_hi;
                double flo = comb.eval(s1, lo) - level;
                double fhi = comb.eval(s1, hi) - level;
                if (flo == 0.0 && fhi == 0.0) continue;
                if (flo * fhi > 0.0) continue;  // level not crossed on this column
                for (int it = 0; it < 60; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    const double fmid = comb.eval(s1, mid) - level;
                    if ((fmid <= 0.0) == (flo <= 0.0)) {
                        lo = mid;
                        flo = fmid;
                    } else {
                        hi = mid;
                    }
                }
                contours += comb.name + "," + format_value(level, true) + "," +
                            format_value(s1, true) + "," + format_value(0.5 * (lo + hi), true) +
                            "\n";
            }
        }
    }
    write_file_atomic(out / "plot_contours.csv", contours);
    return out / "plot_samples.csv";
}

}  // namespace scod
