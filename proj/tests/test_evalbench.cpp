#include <gtest/gtest.h>

#include <chrono>
#include <random>
#include <sstream>
#include <thread>

#include "jamdet/common.hpp"
#include "jamdet/evalbench.hpp"
#include "jamdet/sigsim.hpp"

using namespace jamdet;

namespace {

DatasetRecipe tiny_recipe() {
    DatasetRecipe r;
    r.spectrogram.stack_depth = 4;
    return r;
}

cnn::CnnModel tiny_model() {
    using namespace cnn;
    return CnnModel({4, 1024, 1},
                    {LayerSpec::conv(2, 3, 2), LayerSpec::flatten(),
                     LayerSpec::dense(1, Activation::Sigmoid)},
                    4);
}

}  // namespace

TEST(FaMd, HandExamples) {
    std::vector<double> s{0.2, 0.6, 0.4, 0.9};
    std::vector<std::uint8_t> y{0, 0, 1, 1};
    auto r = fa_md_at(s, y, 0.5);
    EXPECT_DOUBLE_EQ(r.p_fa, 0.5);
    EXPECT_DOUBLE_EQ(r.p_md, 0.5);
    r = fa_md_at(s, y, 0.0);
    EXPECT_DOUBLE_EQ(r.p_fa, 1.0);
    EXPECT_DOUBLE_EQ(r.p_md, 0.0);
    // Boundary inclusive: a score equal to tau counts as jammed.
    r = fa_md_at(s, y, 0.6);
    EXPECT_DOUBLE_EQ(r.p_fa, 0.5);
    EXPECT_DOUBLE_EQ(r.p_md, 0.5);
}

TEST(FaMd, PerfectScores) {
    std::vector<double> s{0, 0, 1, 1, 0, 1};
    std::vector<std::uint8_t> y{0, 0, 1, 1, 0, 1};
    auto taus = tau_grid();
    ASSERT_EQ(taus.size(), 1001u);
    EXPECT_EQ(taus.front(), 0.0);
    EXPECT_EQ(taus.back(), 1.0);
    auto c = fa_md_curve(s, y, taus);
    for (std::size_t i = 1; i < taus.size(); ++i) {
        EXPECT_EQ(c.p_fa[i], 0.0);
        EXPECT_EQ(c.p_md[i], 0.0);
    }
    EXPECT_EQ(c.p_fa[0], 1.0);
}

TEST(FaMd, MonotoneAndComplementOnRandomSets) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u;
    auto taus = tau_grid(101);
    for (int set = 0; set < 1000; ++set) {
        const std::size_t n = 2 + rng() % 30;
        std::vector<double> s(n);
        std::vector<std::uint8_t> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = u(rng);
            y[i] = static_cast<std::uint8_t>(i < 2 ? i : rng() % 2);
        }
        auto c = fa_md_curve(s, y, taus);
        std::size_t benign = 0;
        for (auto l : y) benign += l == 0;
        for (std::size_t t = 0; t < taus.size(); ++t) {
            ASSERT_GE(c.p_fa[t], 0.0);
            ASSERT_LE(c.p_md[t], 1.0);
            if (t) {
                ASSERT_LE(c.p_fa[t], c.p_fa[t - 1]);
                ASSERT_GE(c.p_md[t], c.p_md[t - 1]);
            }
            std::size_t correct = 0;
            for (std::size_t i = 0; i < n; ++i) correct += y[i] == 0 && s[i] < taus[t];
            ASSERT_NEAR(c.p_fa[t] + static_cast<double>(correct) / static_cast<double>(benign), 1.0, 1e-15);
        }
    }
}

TEST(FaMd, SingleClassThrows) {
    std::vector<double> s{0.1, 0.2};
    std::vector<std::uint8_t> y{1, 1};
    EXPECT_THROW(fa_md_curve(s, y, tau_grid()), Error);
    EXPECT_THROW(fa_md_at(s, y, 0.5), Error);
}

TEST(Metrics, AccuracyAndPercentile) {
    std::vector<std::uint8_t> p{1, 0, 1, 1}, t{1, 1, 1, 1};
    EXPECT_DOUBLE_EQ(accuracy_percent(p, t), 75.0);
    std::vector<double> v{1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1};
    EXPECT_DOUBLE_EQ(percentile(v, 0.9), 1.0);
    EXPECT_DOUBLE_EQ(percentile(v, 0.0), 0.1);
    EXPECT_DOUBLE_EQ(percentile(v, 0.5), 0.6);
    EXPECT_DOUBLE_EQ(percentile(v, 1.0), 1.0);
    std::vector<double> none;
    EXPECT_THROW(percentile(none, 0.5), Error);
}

TEST(Latency, CdfAtP95) {
    std::mt19937_64 rng(3);
    std::exponential_distribution<double> e(1000.0);
    for (std::size_t n : {1u, 7u, 20u, 1000u}) {
        LatencyCdf c;
        for (std::size_t i = 0; i < n; ++i) c.seconds.push_back(e(rng));
        std::sort(c.seconds.begin(), c.seconds.end());
        EXPECT_GE(c.cdf(c.p95()), 0.95);
        EXPECT_EQ(c.cdf(c.seconds.back()), 1.0);
    }
}

TEST(Latency, SleepingStub) {
    std::size_t calls = 0;
    auto stub = [&](std::size_t) -> std::uint8_t {
        ++calls;
        std::this_thread::sleep_for(std::chrono::milliseconds(1));
        return 1;
    };
    auto c = measure_latency(stub, 3, {100, 10});
    EXPECT_EQ(calls, 110u);
    ASSERT_EQ(c.seconds.size(), 100u);
    EXPECT_GE(c.p95(), 1e-3);
    EXPECT_LE(c.p95(), 1.5e-3);
    EXPECT_TRUE(std::is_sorted(c.seconds.begin(), c.seconds.end()));
    EXPECT_FALSE(c.warning.has_value());
}

TEST(Latency, SingleTrialIsOneStep) {
    std::vector<std::size_t> seen;
    auto c = measure_latency([&](std::size_t i) -> std::uint8_t { seen.push_back(i); return 0; }, 4, {1, 0});
    ASSERT_EQ(c.seconds.size(), 1u);
    EXPECT_EQ(seen, std::vector<std::size_t>{0});
    EXPECT_GT(c.seconds[0], 0.0);
    EXPECT_EQ(c.cdf(c.seconds[0]), 1.0);
    EXPECT_EQ(c.cdf(c.seconds[0] * 0.5), 0.0);
    EXPECT_GT(clock_resolution(), 0.0);
}

TEST(GainSweep, Mapping) {
    EXPECT_DOUBLE_EQ(sweep_linear_gain(3.0, 80.0, 80.0), 3.0);
    EXPECT_NEAR(sweep_linear_gain(3.0, 60.0, 80.0), 0.3, 1e-15);
    EXPECT_NEAR(sweep_linear_gain(1.0, 45.0, 80.0), std::pow(10.0, -35.0 / 20.0), 1e-15);
}

TEST(GainSweep, DeterministicAndDistances) {
    auto recipe = tiny_recipe();
    auto model = tiny_model();
    std::vector<double> gains{80, 65};
    GainSweepOptions opt{80.0, 3, 5};
    auto a = gain_sweep(recipe, gains, model, opt);
    auto b = gain_sweep(recipe, gains, model, opt);
    ASSERT_EQ(a.points.size(), 2u);
    for (std::size_t i = 0; i < 2; ++i) {
        EXPECT_EQ(a.points[i].outputs, b.points[i].outputs);
        EXPECT_EQ(a.points[i].outputs.size(), 3u);
        EXPECT_EQ(a.points[i].p90, percentile(a.points[i].outputs, 0.9));
        for (double o : a.points[i].outputs) {
            EXPECT_GT(o, 0.0);
            EXPECT_LT(o, 1.0);
        }
    }
    EXPECT_DOUBLE_EQ(a.points[0].distance_ratio, 1.0);
    EXPECT_NEAR(a.points[1].distance_ratio, std::pow(10.0, 15.0 / 20.0), 1e-12);
    EXPECT_DOUBLE_EQ(a.points[0].linear_gain, recipe.channel.jammer_gain);
}

TEST(GainSweep, ZeroGainSeesBenignInput) {
    auto recipe = tiny_recipe();
    auto model = tiny_model();
    auto out = jammed_outputs(recipe, 0.0, model, 3, 17);
    ChannelParams ch = recipe.channel;
    ch.jammer_gain = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
        auto frame = generate_frame(recipe.radio, ch, CaseLabel::EmptyChannel, recipe.duty_cycle,
                                    derive_seed(17, {0x5EE9, i}), 4 * 1024);
        EXPECT_EQ(out[i], cnn::predict_one(model, make_spectrogram(frame, recipe.spectrogram)));
    }
}

TEST(Report, EmptyIsValid) {
    Report r;
    auto text = report_to_json(r);
    auto back = report_from_json(text);
    EXPECT_TRUE(back == r);
    std::ostringstream os;
    write_summary(os, r);
    EXPECT_THROW(report_from_json("{\"format\": \"other\"}"), Error);
}

TEST(Report, KnnCsvHasSixAccuracyColumns) {
    KnnGrid s{KnnMode::StandardizedFull, {{1, 100, 99, 98}, {2, 97, 96, 95}}, 1};
    KnnGrid p{KnnMode::PcaProjected, {{1, 90, 91, 92}, {2, 93, 94, 95}}, 2};
    std::vector<KnnGrid> grids{s, p};
    std::ostringstream os;
    write_knn_csv(os, grids);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "k,standardized_train,standardized_validation,standardized_test,pca_train,pca_validation,pca_test");
    std::size_t rows = 0;
    while (std::getline(is, line)) {
        ++rows;
        EXPECT_EQ(std::count(line.begin(), line.end(), ','), 6);
    }
    EXPECT_EQ(rows, 2u);
}

TEST(Report, RoundTrip) {
    Report r;
    r.knn.push_back({KnnMode::PcaProjected, {{1, 100, 99.5, 98.25}, {3, 99, 98, 97}}, 1});
    r.svm.push_back({KernelKind::Rbf, 8, 99.1, 98.2, 97.3, 42, true});
    r.svm.push_back({KernelKind::Linear, 0, 50, 51, 52, 7, false});
    r.detection.push_back({"cnn", 0.5, 0.0, 0.0125, 99.375});
    r.fa_md.push_back({"cnn", {{0.0, 0.5, 1.0}, {1.0, 0.1, 0.0}, {0.0, 0.2, 1.0}}});
    r.latency.push_back({"svm-model", {{1e-7, 2e-7, 3.5e-7}, std::nullopt}});
    r.latency.push_back({"cnn", {{0.008, 0.009}, std::string("coarse clock")}});
    GainSweepResult g;
    g.points.push_back({80, 31.6, 1.0, {0.99, 1.0}, 1.0});
    g.points.push_back({45, 0.56, 56.2, {0.01, 0.02}, 0.02});
    r.gain_sweep = g;
    r.pca = PcaCurve{{0.9, 0.99, 1.0}, {0.88, 0.98, 1.0}, {0.92, 0.995, 1.0}};
    r.warnings = {"something odd"};
    auto back = report_from_json(report_to_json(r));
    EXPECT_TRUE(back == r);
    ASSERT_TRUE(back.gain_sweep.has_value());
    EXPECT_EQ(back.gain_sweep->points[1].outputs, g.points[1].outputs);
    EXPECT_EQ(back.latency[1].cdf.warning, std::optional<std::string>("coarse clock"));
    EXPECT_EQ(back.svm[1].converged, false);

    std::ostringstream os;
    write_summary(os, r);
    EXPECT_NE(os.str().find("cnn"), std::string::npos);
}

TEST(Report, CsvHeaders) {
    std::ostringstream a, b, c, d, e;
    std::vector<SvmGridRow> rows{{KernelKind::Rbf, 8, 1, 2, 3, 4, true}};
    write_svm_csv(a, rows);
    EXPECT_EQ(a.str().substr(0, a.str().find('\n')), "kernel,dims,train,validation,test,support_vectors,converged");
    write_fa_md_csv(b, {{0.5}, {0.1}, {0.2}});
    EXPECT_EQ(b.str().substr(0, b.str().find('\n')), "tau,p_fa,p_md");
    std::vector<LatencySummary> lat{{"knn", {{1e-6}, std::nullopt}}};
    write_latency_csv(c, lat);
    EXPECT_EQ(c.str().substr(0, c.str().find('\n')), "model,seconds,cdf");
    write_sweep_csv(d, {});
    EXPECT_EQ(d.str().substr(0, d.str().find('\n')), "gain_db,linear_gain,distance_ratio,p90,n");
    write_pca_csv(e, {{0.5, 1.0}, {}, {}});
    EXPECT_EQ(e.str(), "components,cumulative\n1,0.5\n2,1\n");
}
