#include "jamdet/specgen.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "jamdet/common.hpp"
#include "jamdet/fft.hpp"

namespace jamdet {

void SpectrogramParams::validate() const {
    if (!fft::is_power_of_two(window_size)) throw Error("spectrogram: window size must be a power of two");
    if (stack_depth == 0) throw Error("spectrogram: stack depth must be >= 1");
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw Error("spectrogram: epsilon must be > 0");
}

std::vector<double> compute_psd(std::span<const std::complex<double>> window) {
    const std::size_t m = window.size();
    if (m == 0) throw Error("compute_psd: empty window");
    std::vector<std::complex<double>> spec(m);
    fft::forward(window, spec);
    std::vector<double> psd(m);
    const std::size_t half = m / 2;
    const double inv_m = 1.0 / static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i) psd[i] = std::norm(spec[(i + half) % m]) * inv_m;
    return psd;
}

std::vector<double> transform_psd(std::span<const double> psd, double epsilon) {
    std::vector<double> out(psd.size());
    for (std::size_t i = 0; i < psd.size(); ++i) {
        if (!(psd[i] >= 0.0)) throw Error("transform_psd: PSD values must be nonnegative");
        out[i] = -std::log(psd[i] + epsilon);
    }
    return out;
}

Spectrogram make_spectrogram(const IqFrame& frame, const SpectrogramParams& params) {
    params.validate();
    const std::size_t m = params.window_size, n = params.stack_depth;
    if (frame.samples.size() < m * n) throw Error("make_spectrogram: frame shorter than n*m samples");
    Spectrogram s;
    s.rows = n;
    s.cols = m;
    s.label = frame.label;
    s.values.resize(n * m);
    std::span<const std::complex<double>> all(frame.samples);
    for (std::size_t r = 0; r < n; ++r) {
        auto row = transform_psd(compute_psd(all.subspan(r * m, m)), params.epsilon);
        for (std::size_t c = 0; c < m; ++c) s.values[r * m + c] = static_cast<float>(row[c]);
    }
    return s;
}

PsdVector average_psd(const Spectrogram& spec) {
    PsdVector v;
    v.values.assign(spec.cols, 0.0);
    for (std::size_t r = 0; r < spec.rows; ++r)
        for (std::size_t c = 0; c < spec.cols; ++c) v.values[c] += spec.values[r * spec.cols + c];
    if (spec.rows > 0)
        for (auto& x : v.values) x /= static_cast<double>(spec.rows);
    return v;
}

const char* to_string(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Validation: return "validation";
        case Split::Test: return "test";
    }
    return "?";
}

std::size_t CaseCounts::of(CaseLabel c) const {
    switch (c) {
        case CaseLabel::EmptyChannel: return empty;
        case CaseLabel::OngoingTransmission: return ongoing;
        case CaseLabel::Jammed: return jammed;
    }
    return 0;
}

CaseCounts DatasetSplit::class_counts() const {
    CaseCounts c;
    for (const auto& s : samples) {
        switch (s.label) {
            case CaseLabel::EmptyChannel: ++c.empty; break;
            case CaseLabel::OngoingTransmission: ++c.ongoing; break;
            case CaseLabel::Jammed: ++c.jammed; break;
        }
    }
    return c;
}

DatasetSplit& Dataset::get(Split s) {
    return s == Split::Train ? train : s == Split::Validation ? validation : test;
}

const DatasetSplit& Dataset::get(Split s) const {
    return s == Split::Train ? train : s == Split::Validation ? validation : test;
}

const CaseCounts& DatasetRecipe::counts(Split s) const {
    return s == Split::Train ? train : s == Split::Validation ? validation : test;
}

std::uint64_t sample_seed(std::uint64_t master, Split split, CaseLabel label, std::size_t index) {
    return derive_seed(master, {static_cast<std::uint64_t>(split), static_cast<std::uint64_t>(label), index});
}

void generate_split(const DatasetRecipe& recipe, Split split, const std::function<void(Spectrogram&&)>& sink) {
    recipe.radio.validate();
    recipe.channel.validate();
    recipe.spectrogram.validate();
    const auto& counts = recipe.counts(split);
    const std::size_t len = recipe.spectrogram.window_size * recipe.spectrogram.stack_depth;
    for (auto label : {CaseLabel::EmptyChannel, CaseLabel::OngoingTransmission, CaseLabel::Jammed}) {
        for (std::size_t i = 0; i < counts.of(label); ++i) {
            auto frame = generate_frame(recipe.radio, recipe.channel, label, recipe.duty_cycle,
                                        sample_seed(recipe.seed, split, label, i), len);
            sink(make_spectrogram(frame, recipe.spectrogram));
        }
    }
}

Dataset build_dataset(const DatasetRecipe& recipe) {
    Dataset ds;
    for (auto split : {Split::Train, Split::Validation, Split::Test}) {
        auto& dst = ds.get(split).samples;
        dst.reserve(recipe.counts(split).total());
        generate_split(recipe, split, [&](Spectrogram&& s) { dst.push_back(std::move(s)); });
    }
    return ds;
}

namespace {
constexpr std::string_view kSpecMagic = "SSBSPEC1";

std::uint32_t checked_u32(std::size_t v, const char* what) {
    if (v > std::numeric_limits<std::uint32_t>::max()) throw Error(std::string(what) + " does not fit in u32");
    return static_cast<std::uint32_t>(v);
}
}  // namespace

SpectrogramWriter::SpectrogramWriter(std::ostream& os, std::size_t n_samples, std::size_t rows, std::size_t cols)
    : os_(os), expected_(n_samples), rows_(rows), cols_(cols) {
    binio::write_magic(os_, kSpecMagic);
    binio::write_pod(os_, checked_u32(n_samples, "sample count"));
    binio::write_pod(os_, checked_u32(rows, "n"));
    binio::write_pod(os_, checked_u32(cols, "m"));
}

void SpectrogramWriter::write(const Spectrogram& s) {
    if (written_ >= expected_) throw Error("SpectrogramWriter: more samples than announced");
    if (s.rows != rows_ || s.cols != cols_ || s.values.size() != rows_ * cols_)
        throw Error("SpectrogramWriter: spectrogram shape mismatch");
    binio::write_pod(os_, static_cast<std::uint8_t>(s.label));
    binio::write_pod(os_, s.binary());
    binio::write_f32(os_, s.values);
    if (!os_) throw Error("SpectrogramWriter: write failed");
    ++written_;
}

void SpectrogramWriter::finish() const {
    if (written_ != expected_) throw Error("SpectrogramWriter: fewer samples than announced");
}

void write_spectrograms(std::ostream& os, std::span<const Spectrogram> samples) {
    std::size_t rows = samples.empty() ? 0 : samples.front().rows;
    std::size_t cols = samples.empty() ? 0 : samples.front().cols;
    SpectrogramWriter w(os, samples.size(), rows, cols);
    for (const auto& s : samples) w.write(s);
    w.finish();
}

std::vector<Spectrogram> read_spectrograms(std::istream& is) {
    binio::expect_magic(is, kSpecMagic);
    auto count = binio::read_pod<std::uint32_t>(is);
    auto rows = binio::read_pod<std::uint32_t>(is);
    auto cols = binio::read_pod<std::uint32_t>(is);
    std::vector<Spectrogram> out;
    out.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        Spectrogram s;
        s.rows = rows;
        s.cols = cols;
        s.label = case_from_int(binio::read_pod<std::uint8_t>(is));
        auto label = binio::read_pod<std::uint8_t>(is);
        if (label != s.binary()) throw Error("SSBSPEC1: binary label disagrees with case");
        s.values.resize(std::size_t{rows} * cols);
        binio::read_f32(is, s.values);
        out.push_back(std::move(s));
    }
    return out;
}

void save_split(const std::filesystem::path& path, const DatasetSplit& split) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot open " + path.string() + " for writing");
    write_spectrograms(os, split.samples);
}

DatasetSplit load_split(const std::filesystem::path& path, Split split) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot open " + path.string());
    return {split, read_spectrograms(is)};
}

void write_labels_csv(std::ostream& os, std::span<const Spectrogram> samples) {
    os << "index,case,label\n";
    for (std::size_t i = 0; i < samples.size(); ++i)
        os << i << ',' << static_cast<int>(samples[i].label) << ',' << static_cast<int>(samples[i].binary()) << '\n';
}

std::filesystem::path split_path(const std::filesystem::path& dir, Split s) {
    return dir / (std::string(to_string(s)) + ".ssbspec");
}

void save_dataset(const std::filesystem::path& dir, const Dataset& ds) {
    std::filesystem::create_directories(dir);
    for (auto s : {Split::Train, Split::Validation, Split::Test}) {
        save_split(split_path(dir, s), ds.get(s));
        std::ofstream csv(dir / (std::string(to_string(s)) + "_labels.csv"));
        write_labels_csv(csv, ds.get(s).samples);
    }
}

Dataset load_dataset(const std::filesystem::path& dir) {
    Dataset ds;
    for (auto s : {Split::Train, Split::Validation, Split::Test}) ds.get(s) = load_split(split_path(dir, s), s);
    return ds;
}

void generate_dataset_files(const DatasetRecipe& recipe, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (auto s : {Split::Train, Split::Validation, Split::Test}) {
        const auto path = split_path(dir, s);
        std::ofstream os(path, std::ios::binary);
        std::ofstream csv(dir / (std::string(to_string(s)) + "_labels.csv"));
        if (!os || !csv) throw Error("cannot write into " + dir.string());
        SpectrogramWriter w(os, recipe.counts(s).total(), recipe.spectrogram.stack_depth, recipe.spectrogram.window_size);
        csv << "index,case,label\n";
        std::size_t i = 0;
        generate_split(recipe, s, [&](Spectrogram&& spec) {
            w.write(spec);
            csv << i++ << ',' << static_cast<int>(spec.label) << ',' << static_cast<int>(spec.binary()) << '\n';
        });
        w.finish();
        os.close();
        if (!os || !csv) throw Error("write failed for " + path.string());
    }
}

}  // namespace jamdet
