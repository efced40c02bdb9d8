#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "jamdet/common.hpp"
#include "jamdet/features.hpp"
#include "jamdet/knn.hpp"

namespace jamdet {

enum class KernelKind : std::uint8_t { Linear = 0, Polynomial = 1, Rbf = 2 };

const char* to_string(KernelKind k);
KernelKind kernel_from_string(const std::string& s);

struct KernelSpec {
    KernelKind kind = KernelKind::Rbf;
    int degree = 3;
    double gamma = 1.0;
    double coef0 = 1.0;

    void validate() const;
};

/// linear: x.z, polynomial: (gamma x.z + coef0)^degree, rbf: exp(-gamma |x-z|^2)
double kernel_eval(const KernelSpec& spec, const Eigen::VectorXd& x, const Eigen::VectorXd& z);

/// The "scale" heuristic: 1 / (d * Var(X)) over all entries of X.
double scale_gamma(const Eigen::MatrixXd& data);

struct SvmModel {
    Eigen::MatrixXd support_vectors;  // S x d
    Eigen::VectorXd dual_coefs;       // alpha_i * y_i, y in {-1, +1}
    double bias = 0.0;
    KernelSpec kernel;
    double C = 1.0;
    Featurizer featurizer;

    void validate() const;
};

struct SmoOptions {
    double C = 1.0;
    double tol = 1e-3;
    std::size_t max_iterations = 2'000'000;
};

/// Optional training diagnostics.
struct SmoTrace {
    std::size_t iterations = 0;
    double final_violation = 0.0;
    bool record_objective = false;
    /// Dual objective after every step (only when record_objective is set).
    std::vector<double> objective;
    /// Full alpha vector at exit, indexed like the training data.
    Eigen::VectorXd alpha;
};

class SvmNotConverged : public Error {
public:
    SvmNotConverged(SvmModel best, double violation, std::size_t iterations);

    const SvmModel& best_model() const { return best_; }
    double violation() const { return violation_; }
    std::size_t iterations() const { return iterations_; }

private:
    SvmModel best_;
    double violation_;
    std::size_t iterations_;
};

/// Soft-margin SVM dual solved by SMO with maximal-violating-pair selection.
/// Labels are {0,1} and mapped to {-1,+1}. Stops once the largest KKT
/// violation gap drops to `tol`; throws SvmNotConverged after
/// `max_iterations` steps. Only points with alpha > 1e-10 are kept.
SvmModel train_svm(const Eigen::MatrixXd& data, std::span<const std::uint8_t> labels, const KernelSpec& kernel,
                   const SmoOptions& options = {}, SmoTrace* trace = nullptr);

/// Dual objective sum(alpha) - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij.
double svm_dual_objective(const Eigen::MatrixXd& data, std::span<const std::uint8_t> labels, const KernelSpec& kernel,
                          const Eigen::VectorXd& alpha);

double svm_decision(const SvmModel& model, const Eigen::VectorXd& x);
std::uint8_t svm_predict(const SvmModel& model, const Eigen::VectorXd& x);
std::uint8_t svm_predict_psd(const SvmModel& model, const Eigen::VectorXd& psd);

struct SvmGridRow {
    KernelKind kernel = KernelKind::Rbf;
    std::size_t dims = 0;  // 0 = full averaged PSD
    double train = 0.0, validation = 0.0, test = 0.0;  // percent
    std::size_t support_vectors = 0;
    bool converged = true;
};

struct SvmGridOptions {
    SmoOptions smo;
    int degree = 3;
    double coef0 = 1.0;
};

/// Fits an SVM on PCA projections (one PCA fitted on the training split) or
/// on the full PSD for every (kernel, dims) pair; dims == 0 selects the full
/// PSD. Non-converged fits are scored with their best-so-far model.
std::vector<SvmGridRow> svm_grid_eval(const LabeledPsds& train, const LabeledPsds& validation, const LabeledPsds& test,
                                      std::span<const KernelKind> kernels, std::span<const std::size_t> dims,
                                      const SvmGridOptions& options = {});

/// Fits featurizer (PCA with `dims` components, or raw when 0) and SVM with
/// the scale gamma.
SvmModel fit_svm_pipeline(const LabeledPsds& train, KernelKind kernel, std::size_t dims,
                          const SvmGridOptions& options = {});

// SSBSVM01: "SSBSVM01", u8 kind, i32 degree, f64 gamma, f64 coef0, f64 C,
// f64 bias, u32 S, u32 d, featurizer, S x d f64, S f64.
void write_svm(std::ostream& os, const SvmModel& model);
SvmModel read_svm(std::istream& is);

}  // namespace jamdet
