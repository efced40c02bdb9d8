#include "jamdet/features.hpp"

#include <cmath>
#include <istream>
#include <ostream>

#include "jamdet/common.hpp"

namespace jamdet {

Eigen::VectorXd psd_features(const Spectrogram& spec) {
    auto avg = average_psd(spec);
    return Eigen::Map<Eigen::VectorXd>(avg.values.data(), static_cast<Eigen::Index>(avg.values.size()));
}

Eigen::MatrixXd psd_matrix(std::span<const Spectrogram> samples) {
    if (samples.empty()) return {};
    Eigen::MatrixXd out(static_cast<Eigen::Index>(samples.size()), static_cast<Eigen::Index>(samples.front().cols));
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].cols != samples.front().cols) throw Error("psd_matrix: inconsistent spectrogram widths");
        out.row(static_cast<Eigen::Index>(i)) = psd_features(samples[i]).transpose();
    }
    return out;
}

std::vector<std::uint8_t> binary_labels(std::span<const Spectrogram> samples) {
    std::vector<std::uint8_t> y;
    y.reserve(samples.size());
    for (const auto& s : samples) y.push_back(s.binary());
    return y;
}

Standardizer fit_standardizer(const Eigen::MatrixXd& data) {
    if (data.rows() < 2) throw Error("fit_standardizer: need at least two samples");
    Standardizer s;
    s.mean = data.colwise().mean().transpose();
    Eigen::MatrixXd centered = data.rowwise() - s.mean.transpose();
    s.std = (centered.array().square().colwise().sum() / static_cast<double>(data.rows())).sqrt().transpose();
    for (Eigen::Index j = 0; j < s.std.size(); ++j) {
        if (!(s.std(j) > 1e-12 * (1.0 + std::abs(s.mean(j))))) {
            s.std(j) = 1.0;
            s.snapped.push_back(static_cast<std::size_t>(j));
        }
    }
    return s;
}

Eigen::VectorXd Standardizer::apply(const Eigen::VectorXd& x) const {
    if (x.size() != mean.size()) throw Error("Standardizer: dimension mismatch");
    return (x - mean).cwiseQuotient(std);
}

Eigen::MatrixXd Standardizer::apply_rows(const Eigen::MatrixXd& data) const {
    if (data.cols() != mean.size()) throw Error("Standardizer: dimension mismatch");
    return (data.rowwise() - mean.transpose()).array().rowwise() / std.transpose().array();
}

Eigen::VectorXd Featurizer::apply(const Eigen::VectorXd& psd) const {
    switch (kind) {
        case Kind::Raw: return psd;
        case Kind::Standardized: return standardizer->apply(psd);
        case Kind::Pca: return project(*pca, psd);
    }
    return psd;
}

Eigen::MatrixXd Featurizer::apply_rows(const Eigen::MatrixXd& psds) const {
    switch (kind) {
        case Kind::Raw: return psds;
        case Kind::Standardized: return standardizer->apply_rows(psds);
        case Kind::Pca: return project_rows(*pca, psds);
    }
    return psds;
}

void write_featurizer(std::ostream& os, const Featurizer& f) {
    binio::write_pod(os, static_cast<std::uint8_t>(f.kind));
    if (f.kind == Featurizer::Kind::Standardized) {
        const auto& s = *f.standardizer;
        binio::write_pod(os, static_cast<std::uint32_t>(s.mean.size()));
        // Kept at double precision so reloaded models classify identically.
        for (Eigen::Index i = 0; i < s.mean.size(); ++i) binio::write_pod(os, s.mean(i));
        for (Eigen::Index i = 0; i < s.std.size(); ++i) binio::write_pod(os, s.std(i));
    } else if (f.kind == Featurizer::Kind::Pca) {
        write_pca(os, *f.pca);
    }
}

Featurizer read_featurizer(std::istream& is) {
    auto kind = binio::read_pod<std::uint8_t>(is);
    if (kind > 2) throw Error("unknown featurizer kind");
    Featurizer f;
    f.kind = static_cast<Featurizer::Kind>(kind);
    if (f.kind == Featurizer::Kind::Standardized) {
        auto m = binio::read_pod<std::uint32_t>(is);
        Standardizer s;
        s.mean.resize(m);
        s.std.resize(m);
        for (std::uint32_t i = 0; i < m; ++i) s.mean(i) = binio::read_pod<double>(is);
        for (std::uint32_t i = 0; i < m; ++i) s.std(i) = binio::read_pod<double>(is);
        f.standardizer = std::move(s);
    } else if (f.kind == Featurizer::Kind::Pca) {
        f.pca = read_pca(is);
    }
    return f;
}

}  // namespace jamdet
