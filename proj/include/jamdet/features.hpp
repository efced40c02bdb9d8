#pragma once

// Time-averaged PSD features and the per-model preprocessing applied to them
// (standardization or PCA projection).

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "jamdet/pca.hpp"
#include "jamdet/specgen.hpp"

namespace jamdet {

/// Column means of a spectrogram as an Eigen vector.
Eigen::VectorXd psd_features(const Spectrogram& spec);

/// One averaged PSD per row.
Eigen::MatrixXd psd_matrix(std::span<const Spectrogram> samples);

std::vector<std::uint8_t> binary_labels(std::span<const Spectrogram> samples);

/// Per-feature z-scoring with population standard deviation.
struct Standardizer {
    Eigen::VectorXd mean;
    Eigen::VectorXd std;
    /// Features whose standard deviation was zero and got replaced by 1.
    std::vector<std::size_t> snapped;

    Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
    Eigen::MatrixXd apply_rows(const Eigen::MatrixXd& data) const;
};

Standardizer fit_standardizer(const Eigen::MatrixXd& data);

struct Featurizer {
    enum class Kind : std::uint8_t { Raw = 0, Standardized = 1, Pca = 2 };

    Kind kind = Kind::Raw;
    std::optional<Standardizer> standardizer;
    std::optional<PcaModel> pca;

    static Featurizer raw() { return {}; }
    static Featurizer standardized(Standardizer s) { return {Kind::Standardized, std::move(s), std::nullopt}; }
    static Featurizer projected(PcaModel p) { return {Kind::Pca, std::nullopt, std::move(p)}; }

    Eigen::VectorXd apply(const Eigen::VectorXd& psd) const;
    Eigen::MatrixXd apply_rows(const Eigen::MatrixXd& psds) const;
};

void write_featurizer(std::ostream& os, const Featurizer& f);
Featurizer read_featurizer(std::istream& is);

}  // namespace jamdet
