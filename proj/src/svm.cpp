#include "jamdet/svm.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <istream>
#include <limits>
#include <ostream>

namespace jamdet {

const char* to_string(KernelKind k) {
    switch (k) {
        case KernelKind::Linear: return "linear";
        case KernelKind::Polynomial: return "polynomial";
        case KernelKind::Rbf: return "rbf";
    }
    return "?";
}

KernelKind kernel_from_string(const std::string& s) {
    if (s == "linear") return KernelKind::Linear;
    if (s == "polynomial" || s == "poly") return KernelKind::Polynomial;
    if (s == "rbf") return KernelKind::Rbf;
    throw Error("unknown kernel '" + s + "'");
}

void KernelSpec::validate() const {
    if (kind != KernelKind::Linear && !(gamma > 0.0)) throw Error("kernel: gamma must be > 0");
    if (kind == KernelKind::Polynomial && degree < 1) throw Error("kernel: degree must be >= 1");
}

double kernel_eval(const KernelSpec& spec, const Eigen::VectorXd& x, const Eigen::VectorXd& z) {
    if (x.size() != z.size()) throw Error("kernel_eval: dimension mismatch");
    switch (spec.kind) {
        case KernelKind::Linear: return x.dot(z);
        case KernelKind::Polynomial: return std::pow(spec.gamma * x.dot(z) + spec.coef0, spec.degree);
        case KernelKind::Rbf: return std::exp(-spec.gamma * (x - z).squaredNorm());
    }
    return 0.0;
}

double scale_gamma(const Eigen::MatrixXd& data) {
    const double n = static_cast<double>(data.size());
    if (n == 0) throw Error("scale_gamma: empty data");
    const double mean = data.sum() / n;
    const double var = (data.array() - mean).square().sum() / n;
    if (!(var > 0.0)) return 1.0;
    return 1.0 / (static_cast<double>(data.cols()) * var);
}

void SvmModel::validate() const {
    if (support_vectors.rows() == 0) throw Error("svm: model has no support vectors");
    if (support_vectors.rows() != dual_coefs.size()) throw Error("svm: coefficient count mismatch");
    if (!(C > 0.0)) throw Error("svm: C must be > 0");
    kernel.validate();
}

SvmNotConverged::SvmNotConverged(SvmModel best, double violation, std::size_t iterations)
    : Error("SMO did not converge after " + std::to_string(iterations) + " iterations (max KKT violation " +
            std::to_string(violation) + ")"),
      best_(std::move(best)),
      violation_(violation),
      iterations_(iterations) {}

namespace {

// Kernel values between rows of `data`, precomputed when small enough.
class KernelMatrix {
public:
    KernelMatrix(const Eigen::MatrixXd& data, const KernelSpec& spec) : data_(data), spec_(spec) {
        const auto n = data.rows();
        sq_norms_ = data.rowwise().squaredNorm();
        diag_.resize(n);
        if (n <= kDenseLimit) {
            dense_ = gram_rows(0, n);
            diag_ = dense_.diagonal();
        } else {
            for (Eigen::Index i = 0; i < n; ++i) diag_(i) = kernel_eval(spec_, data_.row(i).transpose(), data_.row(i).transpose());
        }
    }

    double diag(Eigen::Index i) const { return diag_(i); }

    /// Row i of the Gram matrix.
    Eigen::VectorXd row(Eigen::Index i) const {
        if (dense_.size() > 0) return dense_.row(i).transpose();
        return gram_rows(i, 1).row(0).transpose();
    }

private:
    static constexpr Eigen::Index kDenseLimit = 4096;

    Eigen::MatrixXd gram_rows(Eigen::Index first, Eigen::Index count) const {
        Eigen::MatrixXd dots = data_.middleRows(first, count) * data_.transpose();
        switch (spec_.kind) {
            case KernelKind::Linear: return dots;
            case KernelKind::Polynomial:
                return (spec_.gamma * dots.array() + spec_.coef0).pow(spec_.degree).matrix();
            case KernelKind::Rbf: {
                Eigen::MatrixXd d2 = (-2.0 * dots).rowwise() + sq_norms_.transpose();
                d2.colwise() += sq_norms_.segment(first, count);
                return (-spec_.gamma * d2.array().max(0.0)).exp().matrix();
            }
        }
        return dots;
    }

    const Eigen::MatrixXd& data_;
    KernelSpec spec_;
    Eigen::VectorXd sq_norms_;
    Eigen::VectorXd diag_;
    Eigen::MatrixXd dense_;
};

constexpr double kTau = 1e-12;
constexpr double kSupportThreshold = 1e-10;

SvmModel assemble(const Eigen::MatrixXd& data, const Eigen::VectorXd& y, const Eigen::VectorXd& alpha, double rho,
                  const KernelSpec& kernel, double C) {
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < alpha.size(); ++i)
        if (alpha(i) > kSupportThreshold) keep.push_back(i);
    SvmModel m;
    m.kernel = kernel;
    m.C = C;
    m.bias = -rho;
    m.support_vectors.resize(static_cast<Eigen::Index>(keep.size()), data.cols());
    m.dual_coefs.resize(static_cast<Eigen::Index>(keep.size()));
    for (std::size_t s = 0; s < keep.size(); ++s) {
        m.support_vectors.row(static_cast<Eigen::Index>(s)) = data.row(keep[s]);
        m.dual_coefs(static_cast<Eigen::Index>(s)) = alpha(keep[s]) * y(keep[s]);
    }
    return m;
}

}  // namespace

SvmModel train_svm(const Eigen::MatrixXd& data, std::span<const std::uint8_t> labels, const KernelSpec& kernel,
                   const SmoOptions& options, SmoTrace* trace) {
    kernel.validate();
    const auto n = data.rows();
    if (static_cast<std::size_t>(n) != labels.size()) throw Error("train_svm: label count mismatch");
    if (!(options.C > 0.0)) throw Error("train_svm: C must be > 0");
    if (!(options.tol > 0.0)) throw Error("train_svm: tol must be > 0");
    const bool has0 = std::find(labels.begin(), labels.end(), 0) != labels.end();
    const bool has1 = std::find(labels.begin(), labels.end(), 1) != labels.end();
    if (!has0 || !has1) throw Error("train_svm: both classes must be present");

    const double C = options.C;
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) y(i) = labels[static_cast<std::size_t>(i)] ? 1.0 : -1.0;

    KernelMatrix K(data, kernel);
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd G = Eigen::VectorXd::Constant(n, -1.0);  // gradient of 1/2 a'Qa - e'a

    auto in_up = [&](Eigen::Index t) { return (y(t) > 0 && alpha(t) < C) || (y(t) < 0 && alpha(t) > 0); };
    auto in_low = [&](Eigen::Index t) { return (y(t) < 0 && alpha(t) < C) || (y(t) > 0 && alpha(t) > 0); };
    auto objective = [&] { return -0.5 * alpha.dot(G - Eigen::VectorXd::Ones(n)); };

    std::size_t iter = 0;
    double gap = std::numeric_limits<double>::infinity();
    for (;;) {
        double g_max = -std::numeric_limits<double>::infinity(), g_min = std::numeric_limits<double>::infinity();
        Eigen::Index i = -1, j = -1;
        for (Eigen::Index t = 0; t < n; ++t) {
            const double v = -y(t) * G(t);
            if (in_up(t) && v > g_max) {
                g_max = v;
                i = t;
            }
            if (in_low(t) && v < g_min) {
                g_min = v;
                j = t;
            }
        }
        gap = (i < 0 || j < 0) ? 0.0 : g_max - g_min;
        if (gap <= options.tol) break;
        if (iter >= options.max_iterations) break;
        ++iter;

        const Eigen::VectorXd Ki = K.row(i);
        const Eigen::VectorXd Kj = K.row(j);
        const double Qij = y(i) * y(j) * Ki(j);
        const double old_i = alpha(i), old_j = alpha(j);
        double& ai = alpha(i);
        double& aj = alpha(j);

        if (y(i) != y(j)) {
            double quad = K.diag(i) + K.diag(j) + 2.0 * Qij;
            if (quad <= 0) quad = kTau;
            const double delta = (-G(i) - G(j)) / quad;
            const double diff = ai - aj;
            ai += delta;
            aj += delta;
            if (diff > 0) {
                if (aj < 0) {
                    aj = 0;
                    ai = diff;
                }
            } else if (ai < 0) {
                ai = 0;
                aj = -diff;
            }
            if (diff > 0) {
                if (ai > C) {
                    ai = C;
                    aj = C - diff;
                }
            } else if (aj > C) {
                aj = C;
                ai = C + diff;
            }
        } else {
            double quad = K.diag(i) + K.diag(j) - 2.0 * Qij;
            if (quad <= 0) quad = kTau;
            const double delta = (G(i) - G(j)) / quad;
            const double sum = ai + aj;
            ai -= delta;
            aj += delta;
            if (sum > C) {
                if (ai > C) {
                    ai = C;
                    aj = sum - C;
                }
            } else if (aj < 0) {
                aj = 0;
                ai = sum;
            }
            if (sum > C) {
                if (aj > C) {
                    aj = C;
                    ai = sum - C;
                }
            } else if (ai < 0) {
                ai = 0;
                aj = sum;
            }
        }

        const double di = ai - old_i, dj = aj - old_j;
        // Q_ti = y_t y_i K_ti
        G.array() += y.array() * (Ki.array() * (y(i) * di) + Kj.array() * (y(j) * dj));

        if (trace && trace->record_objective) trace->objective.push_back(objective());
    }

    // Bias: mean of y G over free vectors, else midpoint of the feasible interval.
    double ub = std::numeric_limits<double>::infinity(), lb = -std::numeric_limits<double>::infinity();
    double sum_free = 0.0;
    std::size_t n_free = 0;
    for (Eigen::Index t = 0; t < n; ++t) {
        const double yg = y(t) * G(t);
        if (alpha(t) >= C) {
            if (y(t) < 0) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else if (alpha(t) <= 0) {
            if (y(t) > 0) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else {
            sum_free += yg;
            ++n_free;
        }
    }
    const double rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : (ub + lb) / 2.0;

    if (trace) {
        trace->iterations = iter;
        trace->final_violation = gap;
        trace->alpha = alpha;
    }

    SvmModel model = assemble(data, y, alpha, rho, kernel, C);
    if (gap > options.tol) throw SvmNotConverged(std::move(model), gap, iter);
    model.validate();
    return model;
}

double svm_dual_objective(const Eigen::MatrixXd& data, std::span<const std::uint8_t> labels, const KernelSpec& kernel,
                          const Eigen::VectorXd& alpha) {
    const auto n = data.rows();
    double quad = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (alpha(i) == 0.0) continue;
        const double yi = labels[static_cast<std::size_t>(i)] ? 1.0 : -1.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (alpha(j) == 0.0) continue;
            const double yj = labels[static_cast<std::size_t>(j)] ? 1.0 : -1.0;
            quad += alpha(i) * alpha(j) * yi * yj * kernel_eval(kernel, data.row(i).transpose(), data.row(j).transpose());
        }
    }
    return alpha.sum() - 0.5 * quad;
}

double svm_decision(const SvmModel& model, const Eigen::VectorXd& x) {
    if (x.size() != model.support_vectors.cols()) throw Error("svm_decision: dimension mismatch");
    const auto& sv = model.support_vectors;
    const auto& k = model.kernel;
    switch (k.kind) {
        case KernelKind::Linear: return model.dual_coefs.dot(sv * x) + model.bias;
        case KernelKind::Polynomial:
            return model.dual_coefs.dot(((k.gamma * (sv * x)).array() + k.coef0).pow(k.degree).matrix()) + model.bias;
        case KernelKind::Rbf:
            return model.dual_coefs.dot((-k.gamma * (sv.rowwise() - x.transpose()).rowwise().squaredNorm().array()).exp().matrix()) +
                   model.bias;
    }
    return model.bias;
}

std::uint8_t svm_predict(const SvmModel& model, const Eigen::VectorXd& x) { return svm_decision(model, x) >= 0.0 ? 1 : 0; }

std::uint8_t svm_predict_psd(const SvmModel& model, const Eigen::VectorXd& psd) {
    return svm_predict(model, model.featurizer.apply(psd));
}

namespace {

SvmModel fit_on_features(const Eigen::MatrixXd& feats, std::span<const std::uint8_t> labels, KernelKind kind,
                         const SvmGridOptions& options, bool& converged) {
    KernelSpec spec;
    spec.kind = kind;
    spec.degree = options.degree;
    spec.coef0 = options.coef0;
    spec.gamma = scale_gamma(feats);
    converged = true;
    try {
        return train_svm(feats, labels, spec, options.smo);
    } catch (const SvmNotConverged& e) {
        converged = false;
        return e.best_model();
    }
}

double percent_correct(const SvmModel& model, const Eigen::MatrixXd& feats, std::span<const std::uint8_t> labels) {
    if (feats.rows() == 0) return 0.0;
    std::size_t ok = 0;
    for (Eigen::Index i = 0; i < feats.rows(); ++i)
        ok += svm_predict(model, feats.row(i).transpose()) == labels[static_cast<std::size_t>(i)];
    return 100.0 * static_cast<double>(ok) / static_cast<double>(feats.rows());
}

}  // namespace

SvmModel fit_svm_pipeline(const LabeledPsds& train, KernelKind kernel, std::size_t dims, const SvmGridOptions& options) {
    Featurizer f = dims == 0 ? Featurizer::raw() : Featurizer::projected(fit_pca(train.psds, dims));
    Eigen::MatrixXd feats = f.apply_rows(train.psds);
    bool converged = true;
    SvmModel model = fit_on_features(feats, train.labels, kernel, options, converged);
    if (!converged) throw Error("SVM training did not converge");
    model.featurizer = std::move(f);
    return model;
}

std::vector<SvmGridRow> svm_grid_eval(const LabeledPsds& train, const LabeledPsds& validation, const LabeledPsds& test,
                                      std::span<const KernelKind> kernels, std::span<const std::size_t> dims,
                                      const SvmGridOptions& options) {
    std::size_t max_dims = 0;
    for (auto d : dims) max_dims = std::max(max_dims, d);
    // Top-d components of one fit equal a d-component fit.
    std::optional<PcaModel> pca;
    if (max_dims > 0) pca = fit_pca(train.psds, max_dims);

    std::vector<SvmGridRow> rows;
    for (auto kind : kernels) {
        for (auto d : dims) {
            Featurizer f = d == 0 ? Featurizer::raw() : Featurizer::projected(pca->truncated(d));
            Eigen::MatrixXd tr = f.apply_rows(train.psds);
            bool converged = true;
            SvmModel model = fit_on_features(tr, train.labels, kind, options, converged);
            SvmGridRow row;
            row.kernel = kind;
            row.dims = d;
            row.converged = converged;
            row.support_vectors = static_cast<std::size_t>(model.support_vectors.rows());
            if (model.support_vectors.rows() > 0) {
                row.train = percent_correct(model, tr, train.labels);
                row.validation = percent_correct(model, f.apply_rows(validation.psds), validation.labels);
                row.test = percent_correct(model, f.apply_rows(test.psds), test.labels);
            }
            rows.push_back(row);
        }
    }
    return rows;
}

namespace {
constexpr std::string_view kSvmMagic = "SSBSVM01";
}

void write_svm(std::ostream& os, const SvmModel& model) {
    model.validate();
    binio::write_magic(os, kSvmMagic);
    binio::write_pod(os, static_cast<std::uint8_t>(model.kernel.kind));
    binio::write_pod(os, static_cast<std::int32_t>(model.kernel.degree));
    binio::write_pod(os, model.kernel.gamma);
    binio::write_pod(os, model.kernel.coef0);
    binio::write_pod(os, model.C);
    binio::write_pod(os, model.bias);
    binio::write_pod(os, static_cast<std::uint32_t>(model.support_vectors.rows()));
    binio::write_pod(os, static_cast<std::uint32_t>(model.support_vectors.cols()));
    write_featurizer(os, model.featurizer);
    for (Eigen::Index i = 0; i < model.support_vectors.rows(); ++i)
        for (Eigen::Index j = 0; j < model.support_vectors.cols(); ++j) binio::write_pod(os, model.support_vectors(i, j));
    for (Eigen::Index i = 0; i < model.dual_coefs.size(); ++i) binio::write_pod(os, model.dual_coefs(i));
}

SvmModel read_svm(std::istream& is) {
    binio::expect_magic(is, kSvmMagic);
    SvmModel m;
    auto kind = binio::read_pod<std::uint8_t>(is);
    if (kind > 2) throw Error("SSBSVM01: unknown kernel");
    m.kernel.kind = static_cast<KernelKind>(kind);
    m.kernel.degree = binio::read_pod<std::int32_t>(is);
    m.kernel.gamma = binio::read_pod<double>(is);
    m.kernel.coef0 = binio::read_pod<double>(is);
    m.C = binio::read_pod<double>(is);
    m.bias = binio::read_pod<double>(is);
    auto s = binio::read_pod<std::uint32_t>(is);
    auto d = binio::read_pod<std::uint32_t>(is);
    m.featurizer = read_featurizer(is);
    m.support_vectors.resize(s, d);
    for (std::uint32_t i = 0; i < s; ++i)
        for (std::uint32_t j = 0; j < d; ++j) m.support_vectors(i, j) = binio::read_pod<double>(is);
    m.dual_coefs.resize(s);
    for (std::uint32_t i = 0; i < s; ++i) m.dual_coefs(i) = binio::read_pod<double>(is);
    m.validate();
    return m;
}

}  // namespace jamdet
