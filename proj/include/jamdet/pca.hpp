#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

namespace jamdet {

/// Centered PCA fitted by thin SVD of the data matrix.
struct PcaModel {
    Eigen::VectorXd mean;                      // m
    Eigen::MatrixXd components;                // d x m, orthonormal rows
    Eigen::VectorXd explained_variance_ratio;  // d

    std::size_t dims() const { return static_cast<std::size_t>(components.rows()); }
    std::size_t input_dims() const { return static_cast<std::size_t>(mean.size()); }

    /// First `d` components of this model (same mean and ratios).
    PcaModel truncated(std::size_t d) const;
};

/// `data` is N x m, one sample per row. Requires N >= 2 and d <= min(N-1, m).
/// Components are ordered by singular value; each is signed so its
/// largest-magnitude entry is nonnegative.
PcaModel fit_pca(const Eigen::MatrixXd& data, std::size_t d);

/// components * (x - mean)
Eigen::VectorXd project(const PcaModel& model, const Eigen::VectorXd& x);

/// Projects every row of `data`.
Eigen::MatrixXd project_rows(const PcaModel& model, const Eigen::MatrixXd& data);

/// Running sum of the explained variance ratios.
std::vector<double> explained_variance_curve(const PcaModel& model);

struct VarianceBand {
    std::vector<double> lower;  // per component count
    std::vector<double> upper;
};

/// Bootstrap band of the cumulative explained-variance curve: resample rows
/// with replacement `reps` times, refit, and take the given quantiles per
/// component count. Curves are truncated to the shortest refit.
VarianceBand bootstrap_variance_band(const Eigen::MatrixXd& data, std::size_t reps, std::uint64_t seed,
                                     double q_lo = 0.01, double q_hi = 0.99);

// SSBPCA01: "SSBPCA01", u32 d, u32 m, f32 mean[m], f32 components[d*m], f32 ratios[d].
void write_pca(std::ostream& os, const PcaModel& model);
PcaModel read_pca(std::istream& is);

}  // namespace jamdet
