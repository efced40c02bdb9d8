#include "jamdet/knn.hpp"

#include <algorithm>
#include <istream>
#include <numeric>
#include <ostream>
#include <utility>

#include "jamdet/common.hpp"

namespace jamdet {

const char* to_string(KnnMode m) { return m == KnnMode::StandardizedFull ? "standardized" : "pca"; }

void KnnModel::validate() const {
    if (points.rows() == 0) throw Error("knn: empty model");
    if (static_cast<std::size_t>(points.rows()) != labels.size()) throw Error("knn: label count mismatch");
    if (k < 1 || k > labels.size()) throw Error("knn: k must lie in [1, N]");
}

std::vector<std::size_t> nearest_indices(const Eigen::MatrixXd& points, const Eigen::VectorXd& x, std::size_t count) {
    if (x.size() != points.cols()) throw Error("knn: dimension mismatch");
    const auto n = static_cast<std::size_t>(points.rows());
    count = std::min(count, n);
    Eigen::VectorXd dist = (points.rowwise() - x.transpose()).rowwise().squaredNorm();
    std::vector<std::pair<double, std::size_t>> d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = {dist(static_cast<Eigen::Index>(i)), i};
    auto mid = d.begin() + static_cast<std::ptrdiff_t>(count);
    std::partial_sort(d.begin(), mid, d.end());
    std::vector<std::size_t> idx(count);
    for (std::size_t i = 0; i < count; ++i) idx[i] = d[i].second;
    return idx;
}

namespace {

KnnPrediction vote(std::span<const std::size_t> neighbours, std::span<const std::uint8_t> labels, std::size_t k) {
    std::size_t jammed = 0;
    for (std::size_t i = 0; i < k; ++i) jammed += labels[neighbours[i]];
    KnnPrediction p;
    p.vote_fraction = static_cast<double>(jammed) / static_cast<double>(k);
    p.label = 2 * jammed > k ? 1 : 0;
    return p;
}

}  // namespace

KnnPrediction knn_predict(const KnnModel& model, const Eigen::VectorXd& x) {
    model.validate();
    auto nn = nearest_indices(model.points, x, model.k);
    return vote(nn, model.labels, model.k);
}

KnnPrediction knn_predict_psd(const KnnModel& model, const Eigen::VectorXd& psd) {
    return knn_predict(model, model.featurizer.apply(psd));
}

namespace {

Featurizer make_featurizer(const Eigen::MatrixXd& train_psds, KnnMode mode, std::size_t pca_dims) {
    if (mode == KnnMode::StandardizedFull) return Featurizer::standardized(fit_standardizer(train_psds));
    return Featurizer::projected(fit_pca(train_psds, pca_dims));
}

}  // namespace

KnnModel fit_knn(const Eigen::MatrixXd& train_psds, std::span<const std::uint8_t> labels, std::size_t k, KnnMode mode,
                 std::size_t pca_dims) {
    if (static_cast<std::size_t>(train_psds.rows()) != labels.size()) throw Error("fit_knn: label count mismatch");
    KnnModel model;
    model.mode = mode;
    model.k = k;
    model.labels.assign(labels.begin(), labels.end());
    model.featurizer = make_featurizer(train_psds, mode, pca_dims);
    model.points = model.featurizer.apply_rows(train_psds);
    model.validate();
    return model;
}

KnnGrid knn_grid_eval(const LabeledPsds& train, const LabeledPsds& validation, const LabeledPsds& test,
                      std::span<const std::size_t> k_list, KnnMode mode, std::size_t pca_dims) {
    if (k_list.empty()) throw Error("knn_grid_eval: empty k list");
    const std::size_t k_max = *std::max_element(k_list.begin(), k_list.end());
    auto featurizer = make_featurizer(train.psds, mode, pca_dims);
    Eigen::MatrixXd points = featurizer.apply_rows(train.psds);
    if (k_max > static_cast<std::size_t>(points.rows()) || *std::min_element(k_list.begin(), k_list.end()) < 1)
        throw Error("knn_grid_eval: k out of range");

    auto accuracy = [&](const LabeledPsds& split) {
        std::vector<std::size_t> correct(k_list.size(), 0);
        Eigen::MatrixXd q = featurizer.apply_rows(split.psds);
        for (Eigen::Index i = 0; i < q.rows(); ++i) {
            auto nn = nearest_indices(points, q.row(i).transpose(), k_max);
            for (std::size_t j = 0; j < k_list.size(); ++j)
                correct[j] += vote(nn, train.labels, k_list[j]).label == split.labels[static_cast<std::size_t>(i)];
        }
        std::vector<double> pct(k_list.size(), 0.0);
        if (q.rows() > 0)
            for (std::size_t j = 0; j < k_list.size(); ++j)
                pct[j] = 100.0 * static_cast<double>(correct[j]) / static_cast<double>(q.rows());
        return pct;
    };

    auto tr = accuracy(train), va = accuracy(validation), te = accuracy(test);
    KnnGrid grid;
    grid.mode = mode;
    double best = -1.0;
    for (std::size_t j = 0; j < k_list.size(); ++j) {
        grid.rows.push_back({k_list[j], tr[j], va[j], te[j]});
        if (va[j] > best || (va[j] == best && k_list[j] < grid.best_k)) {
            best = va[j];
            grid.best_k = k_list[j];
        }
    }
    return grid;
}

namespace {
constexpr std::string_view kKnnMagic = "SSBKNN01";
}

void write_knn(std::ostream& os, const KnnModel& model) {
    model.validate();
    binio::write_magic(os, kKnnMagic);
    binio::write_pod(os, static_cast<std::uint8_t>(model.mode));
    binio::write_pod(os, static_cast<std::uint32_t>(model.k));
    binio::write_pod(os, static_cast<std::uint32_t>(model.points.rows()));
    binio::write_pod(os, static_cast<std::uint32_t>(model.points.cols()));
    write_featurizer(os, model.featurizer);
    for (Eigen::Index i = 0; i < model.points.rows(); ++i)
        for (Eigen::Index j = 0; j < model.points.cols(); ++j) binio::write_pod(os, model.points(i, j));
    os.write(reinterpret_cast<const char*>(model.labels.data()), static_cast<std::streamsize>(model.labels.size()));
}

KnnModel read_knn(std::istream& is) {
    binio::expect_magic(is, kKnnMagic);
    KnnModel model;
    auto mode = binio::read_pod<std::uint8_t>(is);
    if (mode > 1) throw Error("SSBKNN01: unknown mode");
    model.mode = static_cast<KnnMode>(mode);
    model.k = binio::read_pod<std::uint32_t>(is);
    auto n = binio::read_pod<std::uint32_t>(is);
    auto d = binio::read_pod<std::uint32_t>(is);
    model.featurizer = read_featurizer(is);
    model.points.resize(n, d);
    for (std::uint32_t i = 0; i < n; ++i)
        for (std::uint32_t j = 0; j < d; ++j) model.points(i, j) = binio::read_pod<double>(is);
    model.labels.resize(n);
    is.read(reinterpret_cast<char*>(model.labels.data()), n);
    if (!is) throw Error("SSBKNN01: truncated labels");
    model.validate();
    return model;
}

}  // namespace jamdet
