#include "scod/idstats.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>

namespace scod {

namespace {

using nlohmann::json;

constexpr char kB64Chars[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string base64_encode(std::span<const std::uint8_t> bytes) {
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 3 <= bytes.size(); i += 3) {
        const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
        out.push_back(kB64Chars[(v >> 18) & 63]);
        out.push_back(kB64Chars[(v >> 12) & 63]);
        out.push_back(kB64Chars[(v >> 6) & 63]);
        out.push_back(kB64Chars[v & 63]);
    }
    const std::size_t rem = bytes.size() - i;
    if (rem == 1) {
        const std::uint32_t v = bytes[i] << 16;
        out.push_back(kB64Chars[(v >> 18) & 63]);
        out.push_back(kB64Chars[(v >> 12) & 63]);
        out += "==";
    } else if (rem == 2) {
        const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8);
        out.push_back(kB64Chars[(v >> 18) & 63]);
        out.push_back(kB64Chars[(v >> 12) & 63]);
        out.push_back(kB64Chars[(v >> 6) & 63]);
        out += "=";
    }
    return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
    auto value_of = [](char c) -> int {
        if (c >= 'A' && c <= 'Z') return c - 'A';
        if (c >= 'a' && c <= 'z') return c - 'a' + 26;
        if (c >= '0' && c <= '9') return c - '0' + 52;
        if (c == '+') return 62;
        if (c == '/') return 63;
        return -1;
    };
    if (text.size() % 4 != 0) throw DataError("schema", "base64 blob length not a multiple of 4");
    std::vector<std::uint8_t> out;
    out.reserve(text.size() / 4 * 3);
    for (std::size_t i = 0; i < text.size(); i += 4) {
        int vals[4];
        int pads = 0;
        for (int j = 0; j < 4; ++j) {
            const char c = text[i + j];
            if (c == '=' && i + 4 == text.size() && j >= 2) {
                vals[j] = 0;
                ++pads;
            } else {
                vals[j] = value_of(c);
                if (vals[j] < 0 || pads > 0) throw DataError("schema", "invalid base64 blob");
            }
        }
        const std::uint32_t v = (vals[0] << 18) | (vals[1] << 12) | (vals[2] << 6) | vals[3];
        out.push_back((v >> 16) & 0xff);
        if (pads < 2) out.push_back((v >> 8) & 0xff);
        if (pads < 1) out.push_back(v & 0xff);
    }
    return out;
}

std::string encode_matrix(const Eigen::MatrixXd& m) {
    std::vector<float> data;
    data.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(static_cast<float>(m(i, j)));
    const TensorF32 t({static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())},
                      std::move(data));
    return base64_encode(encode_tensor(t));
}

std::string encode_vector(const Eigen::VectorXd& v) {
    std::vector<float> data;
    data.reserve(static_cast<std::size_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) data.push_back(static_cast<float>(v[i]));
    const TensorF32 t({static_cast<std::uint64_t>(v.size())}, std::move(data));
    return base64_encode(encode_tensor(t));
}

Eigen::MatrixXd decode_matrix(const std::string& blob, std::uint64_t rows, std::uint64_t cols) {
    const TensorF32 t = decode_tensor(base64_decode(blob));
    if (t.rank() != 2 || t.dims[0] != rows || t.dims[1] != cols)
        throw DataError("schema", "embedded matrix has unexpected shape");
    Eigen::MatrixXd m(rows, cols);
    for (std::uint64_t i = 0; i < rows; ++i)
        for (std::uint64_t j = 0; j < cols; ++j) m(i, j) = t.data[i * cols + j];
    return m;
}

Eigen::VectorXd decode_eigen_vector(const std::string& blob, std::uint64_t len) {
    const TensorF32 t = decode_tensor(base64_decode(blob));
    if (t.rank() != 1 || t.dims[0] != len)
        throw DataError("schema", "embedded vector has unexpected shape");
    Eigen::VectorXd v(len);
    for (std::uint64_t i = 0; i < len; ++i) v[i] = t.data[i];
    return v;
}

Eigen::MatrixXd centered_rows(const TensorF32& features, Eigen::VectorXd& mean_out) {
    const auto n = static_cast<Eigen::Index>(features.rows());
    const auto l = static_cast<Eigen::Index>(features.cols());
    Eigen::MatrixXd x(n, l);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < l; ++j) x(i, j) = features.data[i * l + j];
    mean_out = x.colwise().mean();
    x.rowwise() -= mean_out.transpose();
    return x;
}

// Largest-magnitude entry of each column made positive, ties to lower index.
void fix_column_signs(Eigen::MatrixXd& basis) {
    for (Eigen::Index c = 0; c < basis.cols(); ++c) {
        Eigen::Index arg = 0;
        double best = -1.0;
        for (Eigen::Index r = 0; r < basis.rows(); ++r) {
            const double mag = std::abs(basis(r, c));
            if (mag > best) {
                best = mag;
                arg = r;
            }
        }
        if (basis(arg, c) < 0.0) basis.col(c) = -basis.col(c);
    }
}

const json& require_field(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) throw DataError("schema", std::string("stats file missing field: ") + key);
    return *it;
}

}  // namespace

void ClassGaussians::finalize() {
    precision_means = precision * means.transpose();  // L x K
    mean_quad.resize(means.rows());
    for (Eigen::Index k = 0; k < means.rows(); ++k)
        mean_quad[k] = means.row(k).dot(precision_means.col(k));
}

const S2Stats& IdStats::s2_for(const ScoreId& id) const {
    auto it = s2_stats.find(id.name());
    if (it == s2_stats.end())
        throw DataError("missing_stats", "no S2 statistics fitted for " + id.name());
    return it->second;
}

std::uint64_t default_subspace_dim(std::uint64_t feature_dim) {
    return feature_dim > 1500 ? 1000 : 512;
}

SubspaceBasis fit_subspace(const TensorF32& train_features, std::optional<std::uint64_t> d_opt) {
    if (train_features.rank() != 2) throw DataError("bad_dims", "features must be rank 2");
    const std::uint64_t n = train_features.rows();
    const std::uint64_t l = train_features.cols();
    if (n < 3 || l < 2) throw DataError("bad_dims", "subspace fit needs N >= 3 and L >= 2");

    const std::uint64_t feasible = std::min(n - 2, l - 1);
    std::uint64_t d;
    if (d_opt) {
        d = *d_opt;
        if (d < 1 || d >= std::min(n - 1, l))
            throw ConfigError("bad_subspace_dim",
                              "subspace dim must satisfy 1 <= d < min(N-1, L), got " +
                                  std::to_string(d));
    } else {
        d = std::min(default_subspace_dim(l), feasible);
    }

    SubspaceBasis out;
    const Eigen::MatrixXd centered = centered_rows(train_features, out.mean);
    // Covariance with divisor N: the train-set residual energy then equals
    // N times the discarded eigenvalue sum.
    const Eigen::MatrixXd cov =
        (centered.transpose() * centered) / static_cast<double>(n);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success)
        throw NumericalError("eigensolve", "eigendecomposition failed");

    // Eigen returns ascending order; flip to descending.
    out.eigenvalues = solver.eigenvalues().reverse();
    Eigen::MatrixXd basis(l, d);
    for (std::uint64_t c = 0; c < d; ++c)
        basis.col(c) = solver.eigenvectors().col(static_cast<Eigen::Index>(l - 1 - c));
    fix_column_signs(basis);
    out.basis = std::move(basis);
    out.d = d;
    return out;
}

ClassGaussians fit_class_gaussians(const TensorF32& train_features, const LabelVec& labels,
                                   std::uint64_t num_classes, double ridge_lambda) {
    if (train_features.rank() != 2) throw DataError("bad_dims", "features must be rank 2");
    const std::uint64_t n = train_features.rows();
    const std::uint64_t l = train_features.cols();
    if (labels.labels.size() != n)
        throw DataError("bad_dims", "label count does not match feature rows");
    if (num_classes < 1) throw DataError("bad_dims", "need at least one class");

    std::vector<std::uint64_t> counts(num_classes, 0);
    for (std::int64_t y : labels.labels) {
        if (y < 0 || static_cast<std::uint64_t>(y) >= num_classes)
            throw DataError("bad_label", "label outside [0, K)");
        ++counts[static_cast<std::uint64_t>(y)];
    }
    for (std::uint64_t k = 0; k < num_classes; ++k) {
        if (counts[k] < 2)
            throw DataError("empty_class",
                            "class " + std::to_string(k) + " has fewer than 2 samples");
    }

    ClassGaussians out;
    out.means = Eigen::MatrixXd::Zero(num_classes, l);
    for (std::uint64_t i = 0; i < n; ++i) {
        const auto row = train_features.row(i);
        const auto y = static_cast<Eigen::Index>(labels.labels[i]);
        for (std::uint64_t j = 0; j < l; ++j) out.means(y, j) += row[j];
    }
    for (std::uint64_t k = 0; k < num_classes; ++k)
        out.means.row(k) /= static_cast<double>(counts[k]);

    // Pooled within-class scatter, divisor N.
    Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(l, l);
    Eigen::VectorXd delta(l);
    for (std::uint64_t i = 0; i < n; ++i) {
        const auto row = train_features.row(i);
        const auto y = static_cast<Eigen::Index>(labels.labels[i]);
        for (std::uint64_t j = 0; j < l; ++j) delta[j] = row[j] - out.means(y, j);
        scatter.selfadjointView<Eigen::Lower>().rankUpdate(delta);
    }
    Eigen::MatrixXd cov = scatter.selfadjointView<Eigen::Lower>();
    cov /= static_cast<double>(n);

    double scale = cov.diagonal().mean();
    if (!(scale > 0.0)) scale = 1.0;  // point-mass classes: pure ridge
    out.ridge = ridge_lambda * scale;
    cov.diagonal().array() += out.ridge;

    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success)
        throw NumericalError("factorization", "tied covariance not positive-definite after ridge");
    Eigen::MatrixXd precision =
        llt.solve(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(l),
                                            static_cast<Eigen::Index>(l)));
    out.precision = 0.5 * (precision + precision.transpose());
    out.finalize();
    return out;
}

S2Stats fit_s2_stats(const ScoreVec& train_s2) {
    const std::size_t n = train_s2.values.size();
    if (n < 2) throw DataError("bad_dims", "S2 statistics need at least 2 samples");
    double mean = 0.0;
    for (double v : train_s2.values) mean += v;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : train_s2.values) ss += (v - mean) * (v - mean);
    const double stddev = std::sqrt(ss / static_cast<double>(n - 1));
    if (stddev == 0.0)
        throw NumericalError("degenerate_std", "S2 has zero standard deviation on ID train");
    return {mean, stddev, train_s2.id};
}

double fit_vim_scale(const TensorF32& train_logits, const TensorF32& train_features,
                     const SubspaceBasis& subspace) {
    if (train_logits.rows() != train_features.rows())
        throw DataError("bad_dims", "logits and features disagree on sample count");
    const std::uint64_t n = train_logits.rows();
    if (n == 0) throw DataError("bad_dims", "vim scale needs samples");

    IdStats tmp;
    tmp.subspace = subspace;
    double logit_mean = 0.0;
    double residual_mean = 0.0;
    for (std::uint64_t i = 0; i < n; ++i) {
        logit_mean += max_logit(train_logits.row(i));
        residual_mean += -neg_residual(train_features.row(i), tmp);
    }
    logit_mean /= static_cast<double>(n);
    residual_mean /= static_cast<double>(n);
    if (residual_mean == 0.0)
        throw NumericalError("degenerate_residual", "mean train residual is zero");
    return logit_mean / residual_mean;
}

std::string stats_to_json(const IdStats& stats) {
    json j;
    j["version"] = 1;
    j["K"] = stats.num_classes;
    j["L"] = stats.feature_dim;
    j["meta"] = {{"std_denominator", "n-1"}};
    if (stats.subspace) {
        const SubspaceBasis& s = *stats.subspace;
        j["subspace"] = {{"d", s.d},
                         {"mean", encode_vector(s.mean)},
                         {"basis", encode_matrix(s.basis)},
                         {"eigenvalues", encode_vector(s.eigenvalues)}};
    }
    if (stats.gaussians) {
        const ClassGaussians& g = *stats.gaussians;
        j["gaussians"] = {{"means", encode_matrix(g.means)},
                          {"precision", encode_matrix(g.precision)},
                          {"ridge", g.ridge}};
    }
    json s2 = json::object();
    for (const auto& [name, st] : stats.s2_stats)
        s2[name] = {{"mean", st.mean}, {"std", st.stddev}, {"score", st.score.name()}};
    j["s2_stats"] = s2;
    if (stats.vim_c) j["vim_c"] = *stats.vim_c;
    return j.dump(2) + "\n";
}

IdStats stats_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError("schema", std::string("stats file is not valid JSON: ") + e.what());
    }
    if (!j.contains("version") || j["version"] != 1)
        throw DataError("schema", "stats schema version mismatch (expected 1)");

    IdStats out;
    out.num_classes = require_field(j, "K").get<std::uint64_t>();
    out.feature_dim = require_field(j, "L").get<std::uint64_t>();
    const std::uint64_t l = out.feature_dim;

    if (j.contains("subspace")) {
        const json& s = j["subspace"];
        SubspaceBasis sub;
        sub.d = require_field(s, "d").get<std::uint64_t>();
        sub.mean = decode_eigen_vector(require_field(s, "mean").get<std::string>(), l);
        sub.basis = decode_matrix(require_field(s, "basis").get<std::string>(), l, sub.d);
        sub.eigenvalues =
            decode_eigen_vector(require_field(s, "eigenvalues").get<std::string>(), l);
        out.subspace = std::move(sub);
    }
    if (j.contains("gaussians")) {
        const json& g = j["gaussians"];
        ClassGaussians cg;
        cg.means = decode_matrix(require_field(g, "means").get<std::string>(), out.num_classes, l);
        cg.precision = decode_matrix(require_field(g, "precision").get<std::string>(), l, l);
        cg.ridge = require_field(g, "ridge").get<double>();
        cg.finalize();
        out.gaussians = std::move(cg);
    }
    for (const auto& [name, st] : require_field(j, "s2_stats").items()) {
        S2Stats s2;
        s2.mean = require_field(st, "mean").get<double>();
        s2.stddev = require_field(st, "std").get<double>();
        s2.score = ScoreId::parse(require_field(st, "score").get<std::string>());
        if (!(s2.stddev > 0.0)) throw DataError("schema", "S2 std must be positive");
        out.s2_stats.emplace(name, std::move(s2));
    }
    if (j.contains("vim_c")) out.vim_c = j["vim_c"].get<double>();
    return out;
}

void save_stats(const IdStats& stats, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("io", "cannot open " + path.string() + " for writing");
    out << stats_to_json(stats);
    if (!out) throw DataError("io", "write failure on " + path.string());
}

IdStats load_stats(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("io", "cannot open " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return stats_from_json(text);
}

}  // namespace scod
