#pragma once

// Evaluation: FA/MD curves, latency CDFs, the jammer gain sweep and the
// JSON/CSV report.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "jamdet/cnn.hpp"
#include "jamdet/knn.hpp"
#include "jamdet/pca.hpp"
#include "jamdet/specgen.hpp"
#include "jamdet/svm.hpp"

namespace jamdet {

struct FaMdCurve {
    std::vector<double> taus;
    std::vector<double> p_fa;
    std::vector<double> p_md;
};

/// `points` evenly spaced values from 0 to 1 inclusive.
std::vector<double> tau_grid(std::size_t points = 1001);

struct FaMd {
    double p_fa = 0.0;
    double p_md = 0.0;
};

/// Score >= tau counts as jammed. Throws if either class is missing.
FaMd fa_md_at(std::span<const double> scores, std::span<const std::uint8_t> labels, double tau);
FaMdCurve fa_md_curve(std::span<const double> scores, std::span<const std::uint8_t> labels,
                      std::span<const double> taus);

/// Percent of matching entries.
double accuracy_percent(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> truth);

/// Sample at sorted index min(n - 1, floor(p * n)).
double percentile(std::span<const double> samples, double p);

struct LatencyCdf {
    std::vector<double> seconds;  // sorted ascending
    std::optional<std::string> warning;

    double percentile(double p) const;
    double p95() const { return percentile(0.95); }
    double median() const { return percentile(0.5); }
    /// Fraction of samples <= t.
    double cdf(double t) const;
};

struct LatencyOptions {
    std::size_t trials = 1000;
    std::size_t warmup = 10;
};

/// Times `classify(i % n_inputs)` once per trial after the untimed warm-up
/// runs. Single-threaded.
LatencyCdf measure_latency(const std::function<std::uint8_t(std::size_t)>& classify, std::size_t n_inputs,
                           const LatencyOptions& options = {});

/// Smallest observable positive step of the steady clock, in seconds.
double clock_resolution();

struct GainSweepPoint {
    double gain_db = 0.0;
    double linear_gain = 0.0;
    /// Distance relative to the reference position under d^-2 power loss.
    double distance_ratio = 1.0;
    std::vector<double> outputs;
    double p90 = 0.0;
};

struct GainSweepResult {
    double reference_db = 80.0;
    std::vector<GainSweepPoint> points;
};

struct GainSweepOptions {
    /// Nominal dB value attributed to the recipe's jammer gain.
    double reference_db = 80.0;
    std::size_t samples_per_gain = 100;
    std::uint64_t seed = 99;
};

/// linear = recipe gain * 10^((gain_db - reference_db) / 20).
double sweep_linear_gain(double recipe_gain, double gain_db, double reference_db);

/// CNN outputs on fresh jammed frames at one linear jammer gain. Sample i
/// uses the same seed, derive_seed(seed, {0x5EE9, i}), at every gain, so only
/// the jammer amplitude changes.
std::vector<double> jammed_outputs(const DatasetRecipe& recipe, double linear_gain, cnn::CnnModel& model,
                                   std::size_t count, std::uint64_t seed);

GainSweepResult gain_sweep(const DatasetRecipe& recipe, std::span<const double> gains_db, cnn::CnnModel& model,
                           const GainSweepOptions& options = {});

struct DetectionSummary {
    std::string model;
    double tau = 0.5;
    double p_fa = 0.0;
    double p_md = 0.0;
    double accuracy = 0.0;  // percent
};

struct NamedCurve {
    std::string model;
    FaMdCurve curve;
};

struct LatencySummary {
    std::string model;
    LatencyCdf cdf;
};

struct PcaCurve {
    std::vector<double> cumulative;
    std::vector<double> lower;  // empty without bootstrap
    std::vector<double> upper;
};

/// Every section is optional; an empty report is valid.
struct Report {
    std::vector<KnnGrid> knn;
    std::vector<SvmGridRow> svm;
    std::vector<DetectionSummary> detection;
    std::vector<NamedCurve> fa_md;
    std::vector<LatencySummary> latency;
    std::optional<GainSweepResult> gain_sweep;
    std::optional<PcaCurve> pca;
    std::vector<std::string> warnings;
};

std::string report_to_json(const Report& r, int indent = 2);
Report report_from_json(const std::string& text);
bool operator==(const Report& a, const Report& b);

void write_summary(std::ostream& os, const Report& r);

// CSV exports. Headers:
//   knn table:  k,<mode>_train,<mode>_validation,<mode>_test per grid
//   svm table:  kernel,dims,train,validation,test,support_vectors,converged
//   fa/md:      tau,p_fa,p_md
//   latency:    model,seconds,cdf
//   sweep:      gain_db,linear_gain,distance_ratio,p90,n
//   pca:        components,cumulative[,lower,upper]
void write_knn_csv(std::ostream& os, std::span<const KnnGrid> grids);
void write_svm_csv(std::ostream& os, std::span<const SvmGridRow> rows);
void write_fa_md_csv(std::ostream& os, const FaMdCurve& curve);
void write_latency_csv(std::ostream& os, std::span<const LatencySummary> runs);
void write_sweep_csv(std::ostream& os, const GainSweepResult& sweep);
void write_pca_csv(std::ostream& os, const PcaCurve& curve);

}  // namespace jamdet
