#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "jamdet/features.hpp"

namespace jamdet {

enum class KnnMode : std::uint8_t { StandardizedFull = 0, PcaProjected = 1 };

const char* to_string(KnnMode m);

/// Brute-force k-nearest-neighbour classifier over squared Euclidean distance.
///
/// Distance ties go to the lower training index; a tied vote (possible for
/// even k) resolves to the benign label 0.
struct KnnModel {
    Eigen::MatrixXd points;  // N x d, already featurized
    std::vector<std::uint8_t> labels;
    std::size_t k = 1;
    KnnMode mode = KnnMode::PcaProjected;
    /// Maps an averaged PSD to the space of `points`.
    Featurizer featurizer;

    void validate() const;
};

struct KnnPrediction {
    std::uint8_t label = 0;
    double vote_fraction = 0.0;  // jammed votes / k
};

/// Training indices of the `count` nearest points to `x`, ordered by
/// (distance, index).
std::vector<std::size_t> nearest_indices(const Eigen::MatrixXd& points, const Eigen::VectorXd& x, std::size_t count);

KnnPrediction knn_predict(const KnnModel& model, const Eigen::VectorXd& x);

/// Featurizes an averaged PSD, then predicts.
KnnPrediction knn_predict_psd(const KnnModel& model, const Eigen::VectorXd& psd);

/// Builds the featurizer for `mode` on training PSDs (standardizer, or PCA
/// with `pca_dims` components) and stores the featurized training set.
KnnModel fit_knn(const Eigen::MatrixXd& train_psds, std::span<const std::uint8_t> labels, std::size_t k, KnnMode mode,
                 std::size_t pca_dims = 8);

struct KnnGridRow {
    std::size_t k = 0;
    double train = 0.0, validation = 0.0, test = 0.0;  // percent
};

struct KnnGrid {
    KnnMode mode = KnnMode::PcaProjected;
    std::vector<KnnGridRow> rows;
    /// Highest validation accuracy; the smaller k wins ties.
    std::size_t best_k = 0;
};

struct LabeledPsds {
    Eigen::MatrixXd psds;
    std::vector<std::uint8_t> labels;
};

/// Accuracy of every k in `k_list` on the three splits. Training accuracy is
/// measured with each training point included in its own neighbourhood.
KnnGrid knn_grid_eval(const LabeledPsds& train, const LabeledPsds& validation, const LabeledPsds& test,
                      std::span<const std::size_t> k_list, KnnMode mode, std::size_t pca_dims = 8);

// SSBKNN01: "SSBKNN01", u8 mode, u32 k, u32 N, u32 d, featurizer,
// N x d float64 points, N u8 labels.
void write_knn(std::ostream& os, const KnnModel& model);
KnnModel read_knn(std::istream& is);

}  // namespace jamdet
