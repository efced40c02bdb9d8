#pragma once

// Spectrogram construction and the on-disk dataset container.
//
// A spectrogram stacks n periodograms of consecutive, non-overlapping,
// rectangular windows of m IQ samples. Each periodogram is |FFT|^2 / m,
// shifted so index 0 is the lowest frequency, then mapped through
// f(x) = -ln(x + eps).

#include <complex>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "jamdet/sigsim.hpp"

namespace jamdet {

struct SpectrogramParams {
    std::size_t window_size = 1024;  // m
    std::size_t stack_depth = 100;   // n
    double epsilon = 1e-21;

    void validate() const;
};

struct Spectrogram {
    std::size_t rows = 0;  // n
    std::size_t cols = 0;  // m
    std::vector<float> values;  // row-major n x m
    CaseLabel label = CaseLabel::EmptyChannel;

    std::uint8_t binary() const { return binary_label(label); }
    std::span<const float> row(std::size_t r) const { return {values.data() + r * cols, cols}; }

    bool operator==(const Spectrogram&) const = default;
};

struct PsdVector {
    std::vector<double> values;
};

/// |FFT(window)|^2 / m, FFT-shifted (DC at index m/2).
std::vector<double> compute_psd(std::span<const std::complex<double>> window);

/// Elementwise -ln(x + eps). Throws on negative or NaN input.
std::vector<double> transform_psd(std::span<const double> psd, double epsilon);

Spectrogram make_spectrogram(const IqFrame& frame, const SpectrogramParams& params);

/// Column-wise mean over the rows.
PsdVector average_psd(const Spectrogram& spec);

enum class Split : std::uint8_t { Train = 0, Validation = 1, Test = 2 };
const char* to_string(Split s);

/// Per-case sample counts for one split, indexed by CaseLabel.
struct CaseCounts {
    std::size_t empty = 0;
    std::size_t ongoing = 0;
    std::size_t jammed = 0;

    std::size_t total() const { return empty + ongoing + jammed; }
    std::size_t of(CaseLabel c) const;
};

struct DatasetSplit {
    Split split = Split::Train;
    std::vector<Spectrogram> samples;

    CaseCounts class_counts() const;
};

struct Dataset {
    DatasetSplit train{Split::Train, {}};
    DatasetSplit validation{Split::Validation, {}};
    DatasetSplit test{Split::Test, {}};

    DatasetSplit& get(Split s);
    const DatasetSplit& get(Split s) const;
};

struct DatasetRecipe {
    RadioConfig radio;
    ChannelParams channel;
    SpectrogramParams spectrogram;
    CaseCounts train{2000, 2000, 2000};
    CaseCounts validation{1000, 1000, 1000};
    CaseCounts test{400, 400, 400};
    double duty_cycle = 0.7;
    std::uint64_t seed = 1;

    const CaseCounts& counts(Split s) const;
};

/// Seed of the i-th sample of a given case in a given split:
/// derive_seed(master, {split, case, i}).
std::uint64_t sample_seed(std::uint64_t master, Split split, CaseLabel label, std::size_t index);

/// Generates one split sample by sample (case-major order) and hands each
/// spectrogram to `sink`. Memory stays at one frame.
void generate_split(const DatasetRecipe& recipe, Split split, const std::function<void(Spectrogram&&)>& sink);

Dataset build_dataset(const DatasetRecipe& recipe);

// SSBSPEC1 container:
//   "SSBSPEC1", u32 n_samples, u32 n, u32 m,
//   then per sample: u8 case, u8 binary_label, n*m float32 row-major.
class SpectrogramWriter {
public:
    SpectrogramWriter(std::ostream& os, std::size_t n_samples, std::size_t rows, std::size_t cols);
    void write(const Spectrogram& s);
    /// Throws if fewer samples were written than announced.
    void finish() const;

private:
    std::ostream& os_;
    std::size_t expected_, rows_, cols_, written_ = 0;
};

void write_spectrograms(std::ostream& os, std::span<const Spectrogram> samples);
std::vector<Spectrogram> read_spectrograms(std::istream& is);

void save_split(const std::filesystem::path& path, const DatasetSplit& split);
DatasetSplit load_split(const std::filesystem::path& path, Split split);

/// CSV "index,case,label".
void write_labels_csv(std::ostream& os, std::span<const Spectrogram> samples);

/// Directory layout used by the CLI: train.ssbspec, validation.ssbspec,
/// test.ssbspec plus <split>_labels.csv.
std::filesystem::path split_path(const std::filesystem::path& dir, Split s);
void save_dataset(const std::filesystem::path& dir, const Dataset& ds);
Dataset load_dataset(const std::filesystem::path& dir);

/// Same layout as save_dataset, generated one sample at a time.
void generate_dataset_files(const DatasetRecipe& recipe, const std::filesystem::path& dir);

}  // namespace jamdet
