#include "jamdet/pca.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <limits>
#include <random>

#include "jamdet/common.hpp"

namespace jamdet {

PcaModel PcaModel::truncated(std::size_t d) const {
    if (d > dims()) throw Error("PcaModel::truncated: not enough components");
    auto di = static_cast<Eigen::Index>(d);
    return {mean, components.topRows(di), explained_variance_ratio.head(di)};
}

PcaModel fit_pca(const Eigen::MatrixXd& data, std::size_t d) {
    const auto n = static_cast<std::size_t>(data.rows());
    const auto m = static_cast<std::size_t>(data.cols());
    if (n < 2) throw Error("fit_pca: need at least two samples");
    if (d == 0 || d > std::min(n - 1, m)) throw Error("fit_pca: component count must be in [1, min(N-1, m)]");

    PcaModel model;
    model.mean = data.colwise().mean().transpose();
    Eigen::MatrixXd centered = data.rowwise() - model.mean.transpose();

    Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
    const Eigen::VectorXd& sv = svd.singularValues();
    const double total = sv.squaredNorm();
    if (!(total > 0.0) || total <= 1e-300) throw Error("fit_pca: data has zero total variance");

    auto di = static_cast<Eigen::Index>(d);
    model.components = svd.matrixV().leftCols(di).transpose();
    model.explained_variance_ratio = sv.head(di).array().square() / total;

    for (Eigen::Index r = 0; r < di; ++r) {
        Eigen::Index idx = 0;
        model.components.row(r).cwiseAbs().maxCoeff(&idx);
        if (model.components(r, idx) < 0.0) model.components.row(r) *= -1.0;
    }
    return model;
}

Eigen::VectorXd project(const PcaModel& model, const Eigen::VectorXd& x) {
    if (x.size() != model.mean.size()) throw Error("project: dimension mismatch");
    return model.components * (x - model.mean);
}

Eigen::MatrixXd project_rows(const PcaModel& model, const Eigen::MatrixXd& data) {
    if (data.cols() != model.mean.size()) throw Error("project_rows: dimension mismatch");
    return (data.rowwise() - model.mean.transpose()) * model.components.transpose();
}

std::vector<double> explained_variance_curve(const PcaModel& model) {
    std::vector<double> curve(model.dims());
    double acc = 0.0;
    for (std::size_t i = 0; i < curve.size(); ++i) {
        acc += model.explained_variance_ratio(static_cast<Eigen::Index>(i));
        curve[i] = acc;
    }
    return curve;
}

VarianceBand bootstrap_variance_band(const Eigen::MatrixXd& data, std::size_t reps, std::uint64_t seed, double q_lo,
                                     double q_hi) {
    const auto n = data.rows();
    std::mt19937_64 rng(splitmix64(seed));
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    std::vector<std::vector<double>> curves;
    std::size_t shortest = std::numeric_limits<std::size_t>::max();
    Eigen::MatrixXd sample(n, data.cols());
    for (std::size_t r = 0; r < reps; ++r) {
        for (Eigen::Index i = 0; i < n; ++i) sample.row(i) = data.row(pick(rng));
        std::size_t d = std::min<std::size_t>(static_cast<std::size_t>(n) - 1, static_cast<std::size_t>(data.cols()));
        PcaModel m;
        try {
            m = fit_pca(sample, d);
        } catch (const Error&) {
            continue;  // a resample of identical rows
        }
        curves.push_back(explained_variance_curve(m));
        shortest = std::min(shortest, curves.back().size());
    }
    VarianceBand band;
    if (curves.empty()) return band;
    auto quantile = [](std::vector<double> v, double q) {
        std::sort(v.begin(), v.end());
        auto idx = static_cast<std::size_t>(std::floor(q * static_cast<double>(v.size())));
        return v[std::min(idx, v.size() - 1)];
    };
    for (std::size_t j = 0; j < shortest; ++j) {
        std::vector<double> col;
        col.reserve(curves.size());
        for (const auto& c : curves) col.push_back(c[j]);
        band.lower.push_back(quantile(col, q_lo));
        band.upper.push_back(quantile(col, q_hi));
    }
    return band;
}

namespace {
constexpr std::string_view kPcaMagic = "SSBPCA01";
}

void write_pca(std::ostream& os, const PcaModel& model) {
    binio::write_magic(os, kPcaMagic);
    binio::write_pod(os, static_cast<std::uint32_t>(model.dims()));
    binio::write_pod(os, static_cast<std::uint32_t>(model.input_dims()));
    binio::write_as_f32(os, model.mean.data(), model.mean.data() + model.mean.size());
    for (Eigen::Index r = 0; r < model.components.rows(); ++r)
        for (Eigen::Index c = 0; c < model.components.cols(); ++c) binio::write_pod(os, static_cast<float>(model.components(r, c)));
    binio::write_as_f32(os, model.explained_variance_ratio.data(),
                        model.explained_variance_ratio.data() + model.explained_variance_ratio.size());
}

PcaModel read_pca(std::istream& is) {
    binio::expect_magic(is, kPcaMagic);
    auto d = binio::read_pod<std::uint32_t>(is);
    auto m = binio::read_pod<std::uint32_t>(is);
    PcaModel model;
    auto mean = binio::read_f32_vector(is, m);
    auto comps = binio::read_f32_vector(is, std::size_t{d} * m);
    auto ratios = binio::read_f32_vector(is, d);
    model.mean = Eigen::Map<Eigen::VectorXf>(mean.data(), m).cast<double>();
    model.components =
        Eigen::Map<Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(comps.data(), d, m).cast<double>();
    model.explained_variance_ratio = Eigen::Map<Eigen::VectorXf>(ratios.data(), d).cast<double>();
    return model;
}

}  // namespace jamdet
