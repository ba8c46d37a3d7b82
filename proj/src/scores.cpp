#include "scod/scores.hpp"

#include <algorithm>
#include <cmath>

#include "scod/idstats.hpp"
#include "scod/parallel.hpp"

namespace scod {

namespace {

void require_finite(std::span<const float> row, const char* what) {
    for (float v : row) {
        if (!std::isfinite(v)) throw NumericalError("nonfinite", std::string(what) + " contains a non-finite value");
    }
}

Eigen::VectorXd to_vector(std::span<const float> row) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(row.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = row[static_cast<std::size_t>(i)];
    return v;
}

// ||(z - mu) - B B'(z - mu)||, shared by neg_residual and vim.
double residual_norm(std::span<const float> features, const SubspaceBasis& sub) {
    if (static_cast<Eigen::Index>(features.size()) != sub.mean.size())
        throw DataError("bad_dims", "feature dimension does not match subspace basis");
    const Eigen::VectorXd centered = to_vector(features) - sub.mean;
    const Eigen::VectorXd coords = sub.basis.transpose() * centered;
    return (centered - sub.basis * coords).norm();
}

}  // namespace

std::string_view score_kind_name(ScoreKind k) {
    switch (k) {
        case ScoreKind::Msp: return "msp";
        case ScoreKind::NegEntropy: return "neg_entropy";
        case ScoreKind::Doctor: return "doctor";
        case ScoreKind::MaxLogit: return "max_logit";
        case ScoreKind::Energy: return "energy";
        case ScoreKind::L1Norm: return "l1_norm";
        case ScoreKind::NegResidual: return "neg_residual";
        case ScoreKind::Mahalanobis: return "mahalanobis";
        case ScoreKind::Gradnorm: return "gradnorm";
        case ScoreKind::Vim: return "vim";
        case ScoreKind::Sirc: return "sirc";
    }
    return "unknown";
}

ScoreKind parse_score_kind(std::string_view name) {
    for (ScoreKind k : {ScoreKind::Msp, ScoreKind::NegEntropy, ScoreKind::Doctor,
                        ScoreKind::MaxLogit, ScoreKind::Energy, ScoreKind::L1Norm,
                        ScoreKind::NegResidual, ScoreKind::Mahalanobis, ScoreKind::Gradnorm,
                        ScoreKind::Vim, ScoreKind::Sirc}) {
        if (score_kind_name(k) == name) return k;
    }
    throw ConfigError("bad_score", "unknown score name: " + std::string(name));
}

std::string ScoreId::name() const {
    if (kind != ScoreKind::Sirc) return std::string(score_kind_name(kind));
    return "sirc-" + std::string(score_kind_name(s1)) + "-" + std::string(score_kind_name(s2));
}

ScoreId ScoreId::parse(std::string_view name) {
    if (!name.starts_with("sirc")) return simple(parse_score_kind(name));
    if (name == "sirc") throw ConfigError("bad_score", "sirc needs components: sirc-<s1>-<s2>");
    std::string_view rest = name.substr(5);  // past "sirc-"
    // s1 names contain no '-', so the first dash splits the pair.
    const std::size_t dash = rest.find('-');
    if (name.substr(4, 1) != "-" || dash == std::string_view::npos)
        throw ConfigError("bad_score", "malformed sirc score name: " + std::string(name));
    return sirc(parse_score_kind(rest.substr(0, dash)), parse_score_kind(rest.substr(dash + 1)));
}

bool score_needs_subspace(const ScoreId& id) {
    if (id.kind == ScoreKind::NegResidual || id.kind == ScoreKind::Vim) return true;
    return id.kind == ScoreKind::Sirc && id.s2 == ScoreKind::NegResidual;
}

bool score_needs_gaussians(const ScoreId& id) {
    if (id.kind == ScoreKind::Mahalanobis) return true;
    return id.kind == ScoreKind::Sirc && id.s2 == ScoreKind::Mahalanobis;
}

bool score_needs_vim_scale(const ScoreId& id) { return id.kind == ScoreKind::Vim; }

std::vector<double> softmax(std::span<const float> logits) {
    if (logits.size() < 2) throw DataError("bad_dims", "softmax needs K >= 2");
    require_finite(logits, "logit row");
    const double m = max_logit(logits);
    std::vector<double> probs(logits.size());
    double sum = 0.0;
    for (std::size_t k = 0; k < logits.size(); ++k) {
        probs[k] = std::exp(static_cast<double>(logits[k]) - m);
        sum += probs[k];
    }
    for (double& p : probs) p /= sum;
    return probs;
}

std::size_t classify(std::span<const float> logits) {
    if (logits.size() < 2) throw DataError("bad_dims", "classify needs K >= 2");
    // Ties break to the lowest index.
    std::size_t best = 0;
    for (std::size_t k = 1; k < logits.size(); ++k) {
        if (logits[k] > logits[best]) best = k;
    }
    return best;
}

double msp(std::span<const double> probs) { return *std::max_element(probs.begin(), probs.end()); }

double neg_entropy(std::span<const double> probs) {
    double acc = 0.0;
    for (double p : probs) {
        if (p > 0.0) acc += p * std::log(p);  // 0 log 0 := 0
    }
    return acc;
}

double doctor(std::span<const double> probs) {
    double acc = 0.0;
    for (double p : probs) acc += p * p;
    return std::sqrt(acc);
}

double max_logit(std::span<const float> logits) {
    double m = -std::numeric_limits<double>::infinity();
    for (float v : logits) m = std::max(m, static_cast<double>(v));
    return m;
}

double energy(std::span<const float> logits) {
    require_finite(logits, "logit row");
    const double m = max_logit(logits);
    double sum = 0.0;
    for (float v : logits) sum += std::exp(static_cast<double>(v) - m);
    return m + std::log(sum);
}

double l1_norm(std::span<const float> features) {
    double acc = 0.0;
    for (float v : features) acc += std::abs(static_cast<double>(v));
    return acc;
}

double neg_residual(std::span<const float> features, const IdStats& stats) {
    if (!stats.subspace) throw DataError("missing_stats", "neg_residual needs a fitted subspace");
    return -residual_norm(features, *stats.subspace);
}

double mahalanobis(std::span<const float> features, const IdStats& stats) {
    if (!stats.gaussians) throw DataError("missing_stats", "mahalanobis needs fitted class gaussians");
    const ClassGaussians& g = *stats.gaussians;
    if (static_cast<Eigen::Index>(features.size()) != g.precision.rows())
        throw DataError("bad_dims", "feature dimension does not match gaussians");
    const Eigen::VectorXd z = to_vector(features);
    const double zz = z.dot(g.precision * z);
    // (z - mu)' P (z - mu) = z'Pz - 2 (P mu)'z + mu'P mu, minimized over classes.
    const Eigen::VectorXd cross = g.precision_means.transpose() * z;
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < g.means.rows(); ++k)
        best = std::min(best, zz - 2.0 * cross[k] + g.mean_quad[k]);
    return -best;
}

double gradnorm(std::span<const double> probs, std::span<const float> features) {
    const double uniform = 1.0 / static_cast<double>(probs.size());
    double dev = 0.0;
    for (double p : probs) dev += std::abs(p - uniform);
    return dev * l1_norm(features);
}

double vim(std::span<const float> logits, std::span<const float> features, const IdStats& stats) {
    if (!stats.subspace || !stats.vim_c)
        throw DataError("missing_stats", "vim needs a fitted subspace and scale");
    return energy(logits) - *stats.vim_c * residual_norm(features, *stats.subspace);
}

ScoreVec score_dataset(const DatasetBundle& bundle, const ScoreId& id, const IdStats* stats,
                       unsigned threads) {
    bundle.validate();
    if (id.kind == ScoreKind::Sirc)
        throw ConfigError("bad_score", "SIRC columns are built by sirc_score_dataset");
    const bool needs_stats = score_needs_subspace(id) || score_needs_gaussians(id) ||
                             score_needs_vim_scale(id);
    if (needs_stats && stats == nullptr)
        throw DataError("missing_stats", id.name() + " requires fitted ID statistics");

    const std::size_t n = bundle.size();
    ScoreVec out{id, std::vector<double>(n)};
    parallel_for(n, threads, [&](std::size_t i) {
        const auto logits = bundle.logits.row(i);
        const auto features = bundle.features.row(i);
        switch (id.kind) {
            case ScoreKind::Msp: out.values[i] = msp(softmax(logits)); break;
            case ScoreKind::NegEntropy: out.values[i] = neg_entropy(softmax(logits)); break;
            case ScoreKind::Doctor: out.values[i] = doctor(softmax(logits)); break;
            case ScoreKind::MaxLogit: out.values[i] = max_logit(logits); break;
            case ScoreKind::Energy: out.values[i] = energy(logits); break;
            case ScoreKind::L1Norm: out.values[i] = l1_norm(features); break;
            case ScoreKind::NegResidual: out.values[i] = neg_residual(features, *stats); break;
            case ScoreKind::Mahalanobis: out.values[i] = mahalanobis(features, *stats); break;
            case ScoreKind::Gradnorm: out.values[i] = gradnorm(softmax(logits), features); break;
            case ScoreKind::Vim: out.values[i] = vim(logits, features, *stats); break;
            case ScoreKind::Sirc: break;  // rejected above
        }
    });
    for (double v : out.values) {
        if (!std::isfinite(v)) throw NumericalError("nonfinite", id.name() + " produced a non-finite score");
    }
    return out;
}

std::vector<SampleGroup> label_groups(const DatasetBundle& bundle, bool is_ood) {
    bundle.validate();
    std::vector<SampleGroup> groups(bundle.size());
    if (is_ood) {
        for (auto& g : groups) g = {GroupKind::Ood, bundle.name};
        return groups;
    }
    if (!bundle.labels) throw DataError("missing_labels", bundle.name + ": ID bundle has no labels");
    for (std::size_t i = 0; i < groups.size(); ++i) {
        const bool correct =
            classify(bundle.logits.row(i)) == static_cast<std::size_t>(bundle.labels->labels[i]);
        groups[i] = {correct ? GroupKind::IdCorrect : GroupKind::IdWrong, ""};
    }
    return groups;
}

}  // namespace scod
