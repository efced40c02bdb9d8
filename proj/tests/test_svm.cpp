#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "jamdet/svm.hpp"
#include "oracles.hpp"

using namespace jamdet;

namespace {

struct Blobs {
    Eigen::MatrixXd x;
    std::vector<std::uint8_t> y;
};

// Two overlapping Gaussian blobs so that some multipliers hit C.
Blobs blobs(Eigen::Index n, Eigen::Index d, std::uint64_t seed, double sep = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    Blobs b{Eigen::MatrixXd(n, d), std::vector<std::uint8_t>(static_cast<std::size_t>(n))};
    for (Eigen::Index i = 0; i < n; ++i) {
        const std::uint8_t lab = static_cast<std::uint8_t>(i % 2);
        b.y[static_cast<std::size_t>(i)] = lab;
        for (Eigen::Index j = 0; j < d; ++j) b.x(i, j) = g(rng) + (lab ? sep : -sep) * (j == 0);
    }
    return b;
}

KernelSpec linear() { return {KernelKind::Linear, 3, 1.0, 0.0}; }

}  // namespace

TEST(Kernel, Examples) {
    Eigen::VectorXd x(3), z(3);
    x << 1, 2, 3;
    EXPECT_DOUBLE_EQ(kernel_eval({KernelKind::Rbf, 3, 0.7, 1.0}, x, x), 1.0);
    x << 1, 0, 0;
    z << 0, 5, 0;
    EXPECT_DOUBLE_EQ(kernel_eval(linear(), x, z), 0.0);
    z << 1, 5, 0;
    EXPECT_DOUBLE_EQ(kernel_eval({KernelKind::Polynomial, 3, 1.0, 1.0}, x, z), 8.0);
    z << 3, 4, 0;
    EXPECT_NEAR(kernel_eval({KernelKind::Rbf, 3, 0.5, 1.0}, x, z), std::exp(-0.5 * 20.0), 1e-15);
    EXPECT_THROW((KernelSpec{KernelKind::Rbf, 3, 0.0, 1.0}.validate()), Error);
    EXPECT_THROW((KernelSpec{KernelKind::Polynomial, 0, 1.0, 1.0}.validate()), Error);
}

TEST(Kernel, ScaleGamma) {
    Eigen::MatrixXd x(2, 2);
    x << 0, 2, 4, 6;  // mean 3, variance 5
    EXPECT_NEAR(scale_gamma(x), 1.0 / (2.0 * 5.0), 1e-15);
}

TEST(Svm, TwoPointSet) {
    Eigen::MatrixXd x(2, 1);
    x << -1, 1;
    std::vector<std::uint8_t> y{0, 1};
    auto m = train_svm(x, y, linear(), {10.0, 1e-9, 100000});
    EXPECT_EQ(m.support_vectors.rows(), 2);
    EXPECT_NEAR(m.bias, 0.0, 1e-8);
    EXPECT_NEAR(svm_decision(m, Eigen::VectorXd::Zero(1)), 0.0, 1e-8);
    // w = sum a_i y_i x_i; margin 2 / |w|
    double w = 0.0;
    for (Eigen::Index s = 0; s < 2; ++s) w += m.dual_coefs(s) * m.support_vectors(s, 0);
    EXPECT_NEAR(2.0 / std::abs(w), 2.0, 1e-8);
    EXPECT_NEAR(svm_decision(m, Eigen::VectorXd::Constant(1, 1.0)), 1.0, 1e-8);
    EXPECT_NEAR(svm_decision(m, Eigen::VectorXd::Constant(1, -1.0)), -1.0, 1e-8);
}

TEST(Svm, SquareSeparated) {
    Eigen::MatrixXd x(4, 2);
    x << 0, 0, 0, 1, 3, 0, 3, 1;
    std::vector<std::uint8_t> y{0, 0, 1, 1};
    for (auto kind : {KernelKind::Linear, KernelKind::Polynomial, KernelKind::Rbf}) {
        auto m = train_svm(x, y, {kind, 2, 0.5, 1.0}, {10.0, 1e-6, 100000});
        for (Eigen::Index i = 0; i < 4; ++i) EXPECT_EQ(svm_predict(m, x.row(i).transpose()), y[i]) << to_string(kind);
    }
}

TEST(Svm, DualObjectiveMatchesProjectedGradient) {
    auto b = blobs(20, 2, 3, 0.8);
    const KernelSpec k{KernelKind::Rbf, 3, 0.5, 1.0};
    const double C = 2.0;
    SmoTrace trace;
    auto m = train_svm(b.x, b.y, k, {C, 1e-8, 1000000}, &trace);
    const double smo = svm_dual_objective(b.x, b.y, k, trace.alpha);

    std::vector<double> q(400), yy(20);
    for (int i = 0; i < 20; ++i) yy[i] = b.y[i] ? 1.0 : -1.0;
    for (int i = 0; i < 20; ++i)
        for (int j = 0; j < 20; ++j)
            q[i * 20 + j] = yy[i] * yy[j] * kernel_eval(k, b.x.row(i).transpose(), b.x.row(j).transpose());
    auto a = oracle::svm_dual_pg(q, yy, C, 20000);
    const double ref = oracle::dual_objective(q, a);
    EXPECT_NEAR(smo, ref, 1e-4);
    EXPECT_GE(smo, ref - 1e-4);
    EXPECT_GT(m.support_vectors.rows(), 0);
}

TEST(Svm, KktAndEqualityConstraint) {
    auto b = blobs(60, 3, 5, 0.7);
    const KernelSpec k{KernelKind::Rbf, 3, 0.3, 1.0};
    const double C = 1.0, tol = 1e-6;
    SmoTrace trace;
    auto m = train_svm(b.x, b.y, k, {C, tol, 1000000}, &trace);
    double eq = 0.0;
    bool any_bound = false;
    for (Eigen::Index i = 0; i < 60; ++i) {
        const double yi = b.y[i] ? 1.0 : -1.0, a = trace.alpha(i);
        eq += yi * a;
        EXPECT_GE(a, 0.0);
        EXPECT_LE(a, C);
        const double margin = yi * svm_decision(m, b.x.row(i).transpose());
        if (a <= 1e-10) EXPECT_GE(margin, 1.0 - 1e-3);
        else if (a >= C - 1e-10) {
            EXPECT_LE(margin, 1.0 + 1e-3);
            any_bound = true;
        } else EXPECT_NEAR(margin, 1.0, 1e-3);
    }
    EXPECT_NEAR(eq, 0.0, 1e-10);
    EXPECT_TRUE(any_bound);
    EXPECT_LE(trace.final_violation, tol);
}

TEST(Svm, ObjectiveNondecreasing) {
    auto b = blobs(40, 2, 7, 0.5);
    SmoTrace trace;
    trace.record_objective = true;
    train_svm(b.x, b.y, {KernelKind::Rbf, 3, 1.0, 1.0}, {1.0, 1e-6, 1000000}, &trace);
    ASSERT_EQ(trace.objective.size(), trace.iterations);
    ASSERT_GT(trace.objective.size(), 1u);
    for (std::size_t i = 1; i < trace.objective.size(); ++i)
        EXPECT_GE(trace.objective[i], trace.objective[i - 1] - 1e-12);
}

TEST(Svm, PermutationInvariance) {
    auto b = blobs(30, 2, 9, 1.0);
    const KernelSpec k{KernelKind::Rbf, 3, 0.5, 1.0};
    auto m = train_svm(b.x, b.y, k, {1.0, 1e-8, 1000000});
    std::vector<Eigen::Index> perm(30);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), std::mt19937_64(1));
    Eigen::MatrixXd px(30, 2);
    std::vector<std::uint8_t> py(30);
    for (int i = 0; i < 30; ++i) {
        px.row(i) = b.x.row(perm[i]);
        py[i] = b.y[perm[i]];
    }
    auto p = train_svm(px, py, k, {1.0, 1e-8, 1000000});
    std::mt19937_64 rng(2);
    std::normal_distribution<double> g;
    for (int t = 0; t < 50; ++t) {
        Eigen::VectorXd q(2);
        q << g(rng), g(rng);
        EXPECT_NEAR(svm_decision(m, q), svm_decision(p, q), 1e-5);
    }
}

TEST(Svm, Errors) {
    auto b = blobs(10, 2, 11);
    std::vector<std::uint8_t> one(10, 1);
    EXPECT_THROW(train_svm(b.x, one, linear()), Error);
    EXPECT_THROW(train_svm(b.x, std::vector<std::uint8_t>(9, 0), linear()), Error);
    EXPECT_THROW(train_svm(b.x, b.y, linear(), {0.0, 1e-3, 10}), Error);

    auto hard = blobs(40, 2, 13, 0.2);
    try {
        train_svm(hard.x, hard.y, {KernelKind::Rbf, 3, 1.0, 1.0}, {1.0, 1e-6, 1});
        FAIL() << "expected SvmNotConverged";
    } catch (const SvmNotConverged& e) {
        EXPECT_EQ(e.iterations(), 1u);
        EXPECT_GT(e.violation(), 1e-6);
        EXPECT_GT(e.best_model().support_vectors.rows(), 0);
    }
    auto m = train_svm(b.x, b.y, linear());
    EXPECT_THROW(svm_decision(m, Eigen::VectorXd::Zero(3)), Error);
}

TEST(Svm, GridShape) {
    auto tr = blobs(40, 4, 15, 1.5), va = blobs(10, 4, 16, 1.5), te = blobs(10, 4, 17, 1.5);
    LabeledPsds a{tr.x, tr.y}, v{va.x, va.y}, t{te.x, te.y};
    std::vector<KernelKind> kernels{KernelKind::Linear, KernelKind::Polynomial, KernelKind::Rbf};
    std::vector<std::size_t> dims{1, 2, 3, 0};
    auto rows = svm_grid_eval(a, v, t, kernels, dims);
    ASSERT_EQ(rows.size(), 12u);
    for (const auto& r : rows) {
        EXPECT_GE(r.train, 0.0);
        EXPECT_LE(r.train, 100.0);
        EXPECT_GT(r.support_vectors, 0u);
    }
    // The full-dims RBF row matches a pipeline fitted directly.
    auto m = fit_svm_pipeline(a, KernelKind::Rbf, 0);
    std::size_t ok = 0;
    for (Eigen::Index i = 0; i < te.x.rows(); ++i) ok += svm_predict_psd(m, te.x.row(i).transpose()) == te.y[i];
    const auto& rbf_full = rows.back();
    EXPECT_EQ(rbf_full.kernel, KernelKind::Rbf);
    EXPECT_EQ(rbf_full.dims, 0u);
    EXPECT_NEAR(rbf_full.test, 100.0 * static_cast<double>(ok) / 10.0, 1e-9);
}

TEST(Svm, SerializationRoundTrip) {
    auto tr = blobs(30, 5, 19, 1.0);
    auto m = fit_svm_pipeline({tr.x, tr.y}, KernelKind::Polynomial, 3);
    std::stringstream ss;
    write_svm(ss, m);
    auto back = read_svm(ss);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    for (int t = 0; t < 20; ++t) {
        Eigen::VectorXd q(5);
        for (int j = 0; j < 5; ++j) q(j) = g(rng);
        EXPECT_EQ(svm_predict_psd(back, q), svm_predict_psd(m, q));
    }
    EXPECT_EQ(back.kernel.kind, KernelKind::Polynomial);
    std::stringstream bad("SSBSVM99xxxx");
    EXPECT_THROW(read_svm(bad), Error);
}
