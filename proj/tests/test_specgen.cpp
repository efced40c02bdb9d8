#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <fstream>
#include <set>
#include <sstream>

#include "jamdet/common.hpp"
#include "jamdet/features.hpp"
#include "jamdet/specgen.hpp"
#include "oracles.hpp"

using namespace jamdet;
using cplx = std::complex<double>;

namespace {

std::vector<cplx> random_window(std::size_t m, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    std::vector<cplx> x(m);
    for (auto& v : x) v = {g(rng), g(rng)};
    return x;
}

DatasetRecipe small_recipe() {
    DatasetRecipe r;
    r.spectrogram.stack_depth = 4;
    r.train = {2, 2, 2};
    r.validation = {1, 1, 1};
    r.test = {1, 0, 2};
    return r;
}

}  // namespace

TEST(ComputePsd, ZeroWindow) {
    std::vector<cplx> x(1024);
    for (double v : compute_psd(x)) EXPECT_EQ(v, 0.0);
}

TEST(ComputePsd, ConstantWindow) {
    std::vector<cplx> x(1024, cplx{1.0, 0.0});
    auto p = compute_psd(x);
    for (std::size_t k = 0; k < p.size(); ++k) {
        if (k == 512)
            EXPECT_NEAR(p[k], 1024.0, 1e-9);
        else
            EXPECT_NEAR(p[k], 0.0, 1e-9);
    }
}

TEST(ComputePsd, ComplexExponentialMatchesDirectDft) {
    const std::size_t m = 1024;
    std::vector<cplx> x(m);
    for (std::size_t t = 0; t < m; ++t) x[t] = std::polar(1.0, 2.0 * std::numbers::pi * 100.0 * static_cast<double>(t) / m);
    auto p = compute_psd(x);
    auto ref = oracle::periodogram(x);
    for (std::size_t k = 0; k < m; ++k) EXPECT_NEAR(p[k], ref[k], 1e-8);
    EXPECT_NEAR(p[612], 1024.0, 1e-8);
}

TEST(ComputePsd, RandomWindowMatchesDirectDftAndParseval) {
    auto x = random_window(256, 1);
    auto p = compute_psd(x);
    auto ref = oracle::periodogram(x);
    double energy = 0.0, sum = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        EXPECT_NEAR(p[k], ref[k], 1e-9 * (1.0 + ref[k]));
        energy += std::norm(x[k]);
        sum += p[k];
        EXPECT_GE(p[k], 0.0);
    }
    EXPECT_NEAR(sum / energy, 1.0, 1e-6);
}

TEST(TransformPsd, Values) {
    const double eps = 1e-21;
    std::vector<double> in{0.0, 1.0 - eps, std::exp(-1.0) - eps};
    auto out = transform_psd(in, eps);
    EXPECT_EQ(out[0], -std::log(1e-21));
    EXPECT_NEAR(out[0], 48.354, 1e-3);
    EXPECT_NEAR(out[1], 0.0, 1e-15);
    EXPECT_NEAR(out[2], 1.0, 1e-15);
}

TEST(TransformPsd, StrictlyDecreasingAndErrors) {
    std::vector<double> in{0.0, 1e-30, 1e-10, 0.5, 1.0, 10.0, 1e6};
    auto out = transform_psd(in, 1e-21);
    for (std::size_t i = 1; i < out.size(); ++i) EXPECT_LT(out[i], out[i - 1]);
    std::vector<double> neg{1.0, -1e-12};
    EXPECT_THROW(transform_psd(neg, 1e-21), Error);
    std::vector<double> nan{std::nan("")};
    EXPECT_THROW(transform_psd(nan, 1e-21), Error);
}

TEST(Spectrogram, ZeroFrame) {
    IqFrame f;
    f.samples.assign(102400, cplx{});
    SpectrogramParams p;
    auto s = make_spectrogram(f, p);
    EXPECT_EQ(s.rows, 100u);
    EXPECT_EQ(s.cols, 1024u);
    for (float v : s.values) ASSERT_EQ(v, static_cast<float>(-std::log(1e-21)));
}

TEST(Spectrogram, DefaultShapeCovers0p8Ms) {
    SpectrogramParams p;
    RadioConfig cfg;
    EXPECT_DOUBLE_EQ(static_cast<double>(p.window_size * p.stack_depth) / cfg.sample_rate, 0.8e-3);
}

TEST(Spectrogram, RowsMatchPerWindowPipeline) {
    RadioConfig cfg;
    ChannelParams ch;
    auto f = generate_frame(cfg, ch, CaseLabel::OngoingTransmission, 0.7, 3);
    SpectrogramParams p;
    auto s = make_spectrogram(f, p);
    for (std::size_t r = 0; r < p.stack_depth; ++r) {
        auto psd = compute_psd(std::span<const cplx>(f.samples.data() + r * p.window_size, p.window_size));
        auto row = transform_psd(psd, p.epsilon);
        for (std::size_t k = 0; k < p.window_size; ++k) ASSERT_EQ(s.row(r)[k], static_cast<float>(row[k]));
    }
    EXPECT_EQ(s.label, CaseLabel::OngoingTransmission);
}

TEST(Spectrogram, Errors) {
    IqFrame f;
    f.samples.assign(1000, cplx{});
    EXPECT_THROW(make_spectrogram(f, SpectrogramParams{}), Error);
    SpectrogramParams bad;
    bad.window_size = 1000;
    EXPECT_THROW(bad.validate(), Error);
    bad = {};
    bad.stack_depth = 0;
    EXPECT_THROW(bad.validate(), Error);
    bad = {};
    bad.epsilon = 0.0;
    EXPECT_THROW(bad.validate(), Error);
}

TEST(Spectrogram, StrongJammerLowersSsbColumns) {
    RadioConfig cfg;
    ChannelParams ch;
    auto s = make_spectrogram(generate_frame(cfg, ch, CaseLabel::Jammed, 0.7, 5), SpectrogramParams{});
    auto avg = average_psd(s).values;
    double ssb = 0.0, empty = 0.0;
    for (std::size_t k = 160; k < 196; ++k) ssb += avg[k];
    for (std::size_t k = 2; k < 38; ++k) empty += avg[k];
    EXPECT_LT(ssb, empty);
}

TEST(AveragePsd, Cases) {
    Spectrogram same{3, 4, {1, 2, 3, 4, 1, 2, 3, 4, 1, 2, 3, 4}, CaseLabel::EmptyChannel};
    auto a = average_psd(same).values;
    EXPECT_EQ(a, (std::vector<double>{1, 2, 3, 4}));

    Spectrogram sym{2, 3, {1.5f, -2, 7, -1.5f, 2, -7}, CaseLabel::EmptyChannel};
    for (double v : average_psd(sym).values) EXPECT_EQ(v, 0.0);

    std::mt19937 rng(4);
    std::uniform_real_distribution<float> u(-5, 5);
    Spectrogram r{3, 4, std::vector<float>(12), CaseLabel::Jammed};
    for (auto& v : r.values) v = u(rng);
    auto m = average_psd(r).values;
    for (std::size_t c = 0; c < 4; ++c) {
        double acc = 0.0;
        for (std::size_t row = 0; row < 3; ++row) acc += r.values[row * 4 + c];
        EXPECT_NEAR(m[c], acc / 3.0, 1e-12);
    }
    auto feat = psd_features(r);
    for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(feat(static_cast<Eigen::Index>(c)), m[c]);
}

TEST(Dataset, FullScaleCountsAndLabels) {
    DatasetRecipe r;
    r.spectrogram.stack_depth = 1;  // keep this quick; counts do not depend on frame size
    CaseCounts seen;
    std::size_t zeros = 0, ones = 0;
    generate_split(r, Split::Train, [&](Spectrogram&& s) {
        (s.label == CaseLabel::EmptyChannel ? seen.empty : s.label == CaseLabel::OngoingTransmission ? seen.ongoing : seen.jammed)++;
        (s.binary() ? ones : zeros)++;
    });
    EXPECT_EQ(seen.total(), 6000u);
    EXPECT_EQ(seen.empty, 2000u);
    EXPECT_EQ(seen.ongoing, 2000u);
    EXPECT_EQ(seen.jammed, 2000u);
    EXPECT_EQ(zeros, 4000u);
    EXPECT_EQ(ones, 2000u);
    EXPECT_EQ(r.validation.total(), 3000u);
    EXPECT_EQ(r.test.total(), 1200u);
}

TEST(Dataset, ZeroCountsGiveEmptyDataset) {
    DatasetRecipe r;
    r.train = r.validation = r.test = {};
    auto ds = build_dataset(r);
    EXPECT_TRUE(ds.train.samples.empty());
    EXPECT_TRUE(ds.validation.samples.empty());
    EXPECT_TRUE(ds.test.samples.empty());
    std::stringstream ss;
    write_spectrograms(ss, ds.train.samples);
    EXPECT_TRUE(read_spectrograms(ss).empty());
}

TEST(Dataset, SameSeedSameBytes) {
    auto r = small_recipe();
    auto a = build_dataset(r);
    auto b = build_dataset(r);
    std::stringstream sa, sb;
    write_spectrograms(sa, a.train.samples);
    write_spectrograms(sb, b.train.samples);
    EXPECT_EQ(sa.str(), sb.str());
    r.seed = 2;
    auto c = build_dataset(r);
    std::stringstream sc;
    write_spectrograms(sc, c.train.samples);
    EXPECT_NE(sa.str(), sc.str());
    EXPECT_EQ(a.test.class_counts().jammed, 2u);
    EXPECT_EQ(a.test.class_counts().ongoing, 0u);
}

TEST(Dataset, SplitsUseDistinctSeeds) {
    std::set<std::uint64_t> seeds;
    for (auto s : {Split::Train, Split::Validation, Split::Test})
        for (auto c : {CaseLabel::EmptyChannel, CaseLabel::OngoingTransmission, CaseLabel::Jammed})
            for (std::size_t i = 0; i < 50; ++i) seeds.insert(sample_seed(1, s, c, i));
    EXPECT_EQ(seeds.size(), 450u);
}

TEST(Dataset, SerializationRoundTrip) {
    auto ds = build_dataset(small_recipe());
    std::stringstream ss;
    write_spectrograms(ss, ds.train.samples);
    EXPECT_EQ(ss.str().size(), 8 + 12 + ds.train.samples.size() * (2 + 4 * 1024 * 4));
    auto back = read_spectrograms(ss);
    EXPECT_EQ(back, ds.train.samples);

    auto dir = std::filesystem::temp_directory_path() / "jamdet_specgen_rt";
    std::filesystem::remove_all(dir);
    save_dataset(dir, ds);
    auto loaded = load_dataset(dir);
    EXPECT_EQ(loaded.train.samples, ds.train.samples);
    EXPECT_EQ(loaded.validation.samples, ds.validation.samples);
    EXPECT_EQ(loaded.test.samples, ds.test.samples);

    // Streaming writer produces the same files.
    auto dir2 = std::filesystem::temp_directory_path() / "jamdet_specgen_rt2";
    std::filesystem::remove_all(dir2);
    generate_dataset_files(small_recipe(), dir2);
    for (auto s : {Split::Train, Split::Validation, Split::Test}) {
        std::ifstream a(split_path(dir, s), std::ios::binary), b(split_path(dir2, s), std::ios::binary);
        std::string sa((std::istreambuf_iterator<char>(a)), {}), sb((std::istreambuf_iterator<char>(b)), {});
        EXPECT_EQ(sa, sb);
    }
    std::filesystem::remove_all(dir);
    std::filesystem::remove_all(dir2);
}

TEST(Dataset, LabelsCsv) {
    std::vector<Spectrogram> s(3);
    s[0].label = CaseLabel::EmptyChannel;
    s[1].label = CaseLabel::Jammed;
    s[2].label = CaseLabel::OngoingTransmission;
    std::stringstream ss;
    write_labels_csv(ss, s);
    EXPECT_EQ(ss.str(), "index,case,label\n0,0,0\n1,2,1\n2,1,0\n");
}

TEST(Dataset, CorruptInputsRejected) {
    std::stringstream bad("NOTSPEC1xxxxxxxxxxxx");
    EXPECT_THROW(read_spectrograms(bad), Error);

    auto ds = build_dataset(small_recipe());
    std::stringstream ss;
    write_spectrograms(ss, ds.test.samples);
    std::string bytes = ss.str();
    std::stringstream cut(bytes.substr(0, bytes.size() - 10));
    EXPECT_THROW(read_spectrograms(cut), Error);

    std::stringstream out;
    SpectrogramWriter w(out, 2, 4, 1024);
    w.write(ds.test.samples[0]);
    EXPECT_THROW(w.finish(), Error);
    Spectrogram wrong{2, 2, {0, 0, 0, 0}, CaseLabel::Jammed};
    EXPECT_THROW(w.write(wrong), Error);
}
