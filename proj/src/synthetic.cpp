#include "scod/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>

namespace scod {

namespace {

// Stream tags keep every bundle and every image on its own counter stream.
constexpr std::uint64_t kStreamTrain = 1;
constexpr std::uint64_t kStreamIdTest = 2;
constexpr std::uint64_t kStreamOodBase = 16;
constexpr std::uint64_t kStreamNoiseBase = 1ULL << 32;

std::uint64_t sample_stream(std::uint64_t bundle_tag, std::uint64_t index) {
    return (bundle_tag << 40) | index;
}

void fill_id_sample(const SynthConfig& cfg, std::uint64_t label, CounterRng& rng,
                    std::span<float> logits, std::span<float> features) {
    for (std::uint64_t k = 0; k < cfg.num_classes; ++k) {
        const double margin = k == label ? cfg.class_margin : 0.0;
        logits[k] = static_cast<float>(margin + cfg.logit_noise * rng.next_normal());
    }
    const std::uint64_t signal_dim = label % cfg.signal_dim;
    for (std::uint64_t j = 0; j < cfg.feature_dim; ++j) {
        const double margin = j == signal_dim ? cfg.class_margin : 0.0;
        features[j] = static_cast<float>(margin + rng.next_normal());
    }
}

void fill_ood_sample(const SynthConfig& cfg, CounterRng& rng, std::span<float> logits,
                     std::span<float> features) {
    const std::uint64_t pseudo_class = rng.next_below(cfg.num_classes);
    const std::uint64_t spike_dim =
        cfg.signal_dim + rng.next_below(cfg.feature_dim - cfg.signal_dim);
    // Half the ID margin: softmax scores see OOD as less confident but with
    // real overlap.
    for (std::uint64_t k = 0; k < cfg.num_classes; ++k) {
        const double margin = k == pseudo_class ? 0.5 * cfg.class_margin : 0.0;
        logits[k] = static_cast<float>(margin + cfg.logit_noise * rng.next_normal());
    }
    const std::uint64_t signal_dim = pseudo_class % cfg.signal_dim;
    for (std::uint64_t j = 0; j < cfg.feature_dim; ++j) {
        const double margin = j == signal_dim ? cfg.class_margin : 0.0;
        double v = cfg.ood_feature_scale * (margin + rng.next_normal());
        if (j == spike_dim) v += cfg.ood_residual_boost;
        features[j] = static_cast<float>(v);
    }
}

DatasetBundle make_bundle(const SynthConfig& cfg, const std::string& name,
                          std::uint64_t bundle_tag, std::uint64_t n, bool is_ood) {
    DatasetBundle b;
    b.name = name;
    b.logits = TensorF32({n, cfg.num_classes},
                         std::vector<float>(n * cfg.num_classes, 0.0f));
    b.features = TensorF32({n, cfg.feature_dim},
                           std::vector<float>(n * cfg.feature_dim, 0.0f));
    if (!is_ood) b.labels = LabelVec{};

    for (std::uint64_t i = 0; i < n; ++i) {
        CounterRng rng(cfg.seed, sample_stream(bundle_tag, i));
        std::span<float> logits{b.logits.data.data() + i * cfg.num_classes,
                                static_cast<std::size_t>(cfg.num_classes)};
        std::span<float> features{b.features.data.data() + i * cfg.feature_dim,
                                  static_cast<std::size_t>(cfg.feature_dim)};
        if (is_ood) {
            fill_ood_sample(cfg, rng, logits, features);
        } else {
            const std::uint64_t label = i % cfg.num_classes;
            b.labels->labels.push_back(static_cast<std::int64_t>(label));
            fill_id_sample(cfg, label, rng, logits, features);
        }
    }
    return b;
}

double lanczos3(double x) {
    constexpr double a = 3.0;
    if (x <= -a || x >= a) return 0.0;
    if (x == 0.0) return 1.0;
    const double px = std::numbers::pi * x;
    return a * std::sin(px) * std::sin(px / a) / (px * px);
}

// Per-axis contribution windows, support scaled by the downsampling ratio and
// weights normalized to one.
struct ResampleAxis {
    std::vector<std::uint32_t> first;
    std::vector<std::vector<double>> weights;
};

ResampleAxis build_axis(std::uint32_t src, std::uint32_t dst) {
    const double scale = static_cast<double>(src) / static_cast<double>(dst);
    const double filter_scale = std::max(scale, 1.0);
    const double support = 3.0 * filter_scale;

    ResampleAxis axis;
    axis.first.resize(dst);
    axis.weights.resize(dst);
    for (std::uint32_t i = 0; i < dst; ++i) {
        const double center = (static_cast<double>(i) + 0.5) * scale;
        const auto lo = static_cast<std::int64_t>(std::floor(center - support + 0.5));
        const auto hi = static_cast<std::int64_t>(std::floor(center + support + 0.5));
        const std::int64_t begin = std::max<std::int64_t>(lo, 0);
        const std::int64_t end = std::min<std::int64_t>(hi, src);
        std::vector<double> w(static_cast<std::size_t>(end - begin));
        double total = 0.0;
        for (std::int64_t k = begin; k < end; ++k) {
            const double x = (static_cast<double>(k) + 0.5 - center) / filter_scale;
            w[static_cast<std::size_t>(k - begin)] = lanczos3(x);
            total += w[static_cast<std::size_t>(k - begin)];
        }
        for (double& v : w) v /= total;
        axis.first[i] = static_cast<std::uint32_t>(begin);
        axis.weights[i] = std::move(w);
    }
    return axis;
}

}  // namespace

void SynthConfig::validate() const {
    if (num_classes < 2) throw ConfigError("bad_config", "need at least 2 classes");
    if (signal_dim < 1 || signal_dim >= feature_dim)
        throw ConfigError("bad_config", "signal_dim must lie in [1, feature_dim)");
    if (n_train == 0 || n_id_test == 0 || n_ood == 0 || num_ood_sets == 0)
        throw ConfigError("bad_config", "sample counts must be positive");
    if (!(ood_feature_scale > 0.0 && ood_feature_scale <= 1.0))
        throw ConfigError("bad_config", "ood_feature_scale must lie in (0, 1]");
    if (!(ood_residual_boost >= 0.0))
        throw ConfigError("bad_config", "ood_residual_boost must be >= 0");
    if (!(logit_noise >= 0.0) || !(class_margin > 0.0))
        throw ConfigError("bad_config", "logit_noise must be >= 0 and class_margin > 0");
}

SynthBenchmark gen_benchmark(const SynthConfig& cfg) {
    cfg.validate();
    SynthBenchmark out;
    out.train = make_bundle(cfg, "id_train", kStreamTrain, cfg.n_train, false);
    out.id_test = make_bundle(cfg, "id_test", kStreamIdTest, cfg.n_id_test, false);
    for (std::uint64_t s = 0; s < cfg.num_ood_sets; ++s) {
        const std::string name = "ood" + std::to_string(s);
        out.ood.push_back(make_bundle(cfg, name, kStreamOodBase + s, cfg.n_ood, true));
    }
    return out;
}

void NoiseConfig::validate() const {
    if (min_width < 2 || min_width > max_width)
        throw ConfigError("bad_config", "need 2 <= min_width <= max_width");
    if (out_size < 1) throw ConfigError("bad_config", "out_size must be positive");
    if (count == 0) throw ConfigError("bad_config", "count must be positive");
}

std::vector<double> render_noise_pixels(std::uint32_t width, double sigma, CounterRng& rng) {
    std::vector<double> pixels(static_cast<std::size_t>(width) * width * 3);
    for (double& p : pixels) {
        const double v = 0.5 + sigma * rng.next_normal();
        p = std::clamp(v, 0.0, 1.0);
    }
    return pixels;
}

std::vector<double> lanczos3_resample(std::span<const double> pixels, std::uint32_t width,
                                      std::uint32_t out_size) {
    if (pixels.size() != static_cast<std::size_t>(width) * width * 3)
        throw DataError("bad_dims", "pixel buffer does not match width");
    if (width == out_size) return {pixels.begin(), pixels.end()};
    const ResampleAxis axis = build_axis(width, out_size);

    // Horizontal pass: width x width -> width x out_size.
    std::vector<double> mid(static_cast<std::size_t>(width) * out_size * 3, 0.0);
    for (std::uint32_t y = 0; y < width; ++y) {
        for (std::uint32_t x = 0; x < out_size; ++x) {
            const auto& w = axis.weights[x];
            for (std::uint32_t c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (std::size_t k = 0; k < w.size(); ++k) {
                    const std::size_t sx = axis.first[x] + k;
                    acc += w[k] * pixels[(static_cast<std::size_t>(y) * width + sx) * 3 + c];
                }
                mid[(static_cast<std::size_t>(y) * out_size + x) * 3 + c] = acc;
            }
        }
    }
    // Vertical pass: width x out_size -> out_size x out_size.
    std::vector<double> out(static_cast<std::size_t>(out_size) * out_size * 3, 0.0);
    for (std::uint32_t y = 0; y < out_size; ++y) {
        const auto& w = axis.weights[y];
        for (std::uint32_t x = 0; x < out_size; ++x) {
            for (std::uint32_t c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (std::size_t k = 0; k < w.size(); ++k) {
                    const std::size_t sy = axis.first[y] + k;
                    acc += w[k] * mid[(sy * out_size + x) * 3 + c];
                }
                out[(static_cast<std::size_t>(y) * out_size + x) * 3 + c] =
                    std::clamp(acc, 0.0, 1.0);
            }
        }
    }
    return out;
}

std::vector<std::uint8_t> encode_ppm(std::span<const double> pixels, std::uint32_t size) {
    if (pixels.size() != static_cast<std::size_t>(size) * size * 3)
        throw DataError("bad_dims", "pixel buffer does not match image size");
    std::string header = "P6\n" + std::to_string(size) + " " + std::to_string(size) + "\n255\n";
    std::vector<std::uint8_t> bytes(header.begin(), header.end());
    bytes.reserve(bytes.size() + pixels.size());
    for (double p : pixels) {
        const double clamped = std::clamp(p, 0.0, 1.0);
        bytes.push_back(static_cast<std::uint8_t>(std::lround(clamped * 255.0)));
    }
    return bytes;
}

std::vector<std::filesystem::path> gen_noise_images(const NoiseConfig& cfg,
                                                    const std::filesystem::path& out_dir) {
    cfg.validate();
    std::filesystem::create_directories(out_dir);
    std::vector<std::filesystem::path> paths;
    paths.reserve(cfg.count);
    for (std::uint64_t i = 0; i < cfg.count; ++i) {
        CounterRng rng(cfg.seed, kStreamNoiseBase + i);
        const double unit = rng.next_normal();
        const double sigma = unit * unit;
        const std::uint32_t width =
            cfg.min_width +
            static_cast<std::uint32_t>(rng.next_below(cfg.max_width - cfg.min_width + 1));
        const std::vector<double> raw = render_noise_pixels(width, sigma, rng);
        const std::vector<double> resampled = lanczos3_resample(raw, width, cfg.out_size);
        const std::vector<std::uint8_t> bytes = encode_ppm(resampled, cfg.out_size);

        char name[32];
        std::snprintf(name, sizeof(name), "noise_%05llu.ppm",
                      static_cast<unsigned long long>(i));
        const std::filesystem::path path = out_dir / name;
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("io", "cannot open " + path.string() + " for writing");
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
        if (!out) throw DataError("io", "write failure on " + path.string());
        paths.push_back(path);
    }
    return paths;
}

double oracle_auroc(std::span<const double> pos, std::span<const double> neg) {
    if (pos.empty() || neg.empty()) throw DataError("empty_class", "AUROC needs both classes");
    double acc = 0.0;
    for (double p : pos) {
        for (double n : neg) {
            if (p > n)
                acc += 1.0;
            else if (p == n)
                acc += 0.5;
        }
    }
    return acc / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

namespace {

// Direct recomputation of the weighted risk for one threshold.
struct OracleRisk {
    double weight = 0.0;
    double risk = 0.0;
    double recall = 0.0;
    double coverage = 0.0;
};

OracleRisk oracle_point(std::span<const EvalRecord> records, const RiskConfig& cfg,
                        double threshold) {
    std::size_t n_id = 0, n_ood = 0, n_correct = 0;
    for (const auto& r : records) {
        (r.group == GroupKind::Ood ? n_ood : n_id)++;
        if (r.group == GroupKind::IdCorrect) ++n_correct;
    }
    const double id_w = n_id ? cfg.alpha / static_cast<double>(n_id) : 0.0;
    const double ood_w = n_ood ? (1.0 - cfg.alpha) / static_cast<double>(n_ood) : 0.0;

    double acc_w = 0.0, acc_wl = 0.0, total_w = 0.0;
    std::size_t acc_correct = 0;
    for (const auto& r : records) {
        const double rw = r.group == GroupKind::Ood ? ood_w : id_w;
        total_w += rw;
        if (r.score < threshold) continue;
        acc_w += rw;
        acc_wl += rw * sample_loss(r.group, cfg.beta);
        if (r.group == GroupKind::IdCorrect) ++acc_correct;
    }
    OracleRisk out;
    out.weight = acc_w;
    out.risk = acc_w > 0.0 ? acc_wl / acc_w : 0.0;
    out.recall = n_correct ? static_cast<double>(acc_correct) / static_cast<double>(n_correct)
                           : 0.0;
    out.coverage = total_w > 0.0 ? acc_w / total_w : 0.0;
    return out;
}

std::vector<double> distinct_thresholds_desc(std::span<const EvalRecord> records) {
    std::set<double> values;
    for (const auto& r : records) values.insert(r.score);
    return {values.rbegin(), values.rend()};
}

double oracle_trapezoid(const std::vector<OraclePoint>& points) {
    double area = 0.0;
    for (std::size_t i = 1; i < points.size(); ++i)
        area += (points[i].x - points[i - 1].x) * 0.5 * (points[i].risk + points[i - 1].risk);
    return area;
}

}  // namespace

OracleCurves oracle_selective_curves(std::span<const EvalRecord> records, const RiskConfig& cfg) {
    OracleCurves out;
    for (double t : distinct_thresholds_desc(records)) {
        const OracleRisk p = oracle_point(records, cfg, t);
        if (p.weight <= 0.0) continue;
        out.risk_recall.push_back({t, p.recall, p.risk});
        out.risk_coverage.push_back({t, p.coverage, p.risk});
    }
    out.aurr = oracle_trapezoid(out.risk_recall);
    out.aurc = oracle_trapezoid(out.risk_coverage);
    return out;
}

double oracle_risk_at_recall(std::span<const EvalRecord> records, const RiskConfig& cfg,
                             double level) {
    double best_threshold = 0.0;
    bool found = false;
    for (double t : distinct_thresholds_desc(records)) {
        const OracleRisk p = oracle_point(records, cfg, t);
        if (p.recall >= level) {
            best_threshold = t;
            found = true;
            break;  // thresholds descend, so the first hit is the largest
        }
    }
    if (!found) throw NumericalError("undefined_risk", "recall level never reached");
    const OracleRisk p = oracle_point(records, cfg, best_threshold);
    if (p.weight <= 0.0) throw NumericalError("undefined_risk", "acceptance set carries no weight");
    return p.risk;
}

double oracle_fpr_at_tpr(std::span<const double> pos, std::span<const double> neg, double level) {
    // Scan every candidate threshold, keep the largest with TPR >= level.
    std::vector<double> candidates(pos.begin(), pos.end());
    std::sort(candidates.begin(), candidates.end(), std::greater<>());
    double threshold = 0.0;
    bool found = false;
    for (double t : candidates) {
        std::size_t tp = 0;
        for (double s : pos)
            if (s >= t) ++tp;
        if (static_cast<double>(tp) / static_cast<double>(pos.size()) >= level) {
            threshold = t;
            found = true;
            break;
        }
    }
    if (!found) throw NumericalError("undefined_risk", "TPR level never reached");
    std::size_t fp = 0;
    for (double s : neg)
        if (s >= threshold) ++fp;
    return static_cast<double>(fp) / static_cast<double>(neg.size());
}

}  // namespace scod
