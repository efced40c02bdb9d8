#pragma once

// INI run configuration shared by every CLI subcommand.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "jamdet/cnn.hpp"
#include "jamdet/specgen.hpp"
#include "jamdet/svm.hpp"

namespace jamdet {

struct KnnSettings {
    std::vector<std::size_t> k_list{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    std::size_t pca_dims = 8;
    /// k of the model saved by `train knn`; 0 picks the best validation k.
    std::size_t k = 0;
};

struct SvmSettings {
    std::vector<KernelKind> kernels{KernelKind::Linear, KernelKind::Polynomial, KernelKind::Rbf};
    std::vector<std::size_t> dims{8, 13, 85, 0};  // 0 = full PSD
    KernelKind kernel = KernelKind::Rbf;  // kernel of the saved model
    std::size_t model_dims = 8;
    SvmGridOptions grid;
};

struct CnnSettings {
    cnn::TrainConfig train;
    std::uint64_t init_seed = 11;
    double tau = 0.5;
};

struct SweepSettings {
    double reference_db = 80.0;
    std::vector<double> gains_db{80, 75, 70, 65, 60, 55, 50, 45};
    std::size_t samples_per_gain = 100;
    std::uint64_t seed = 99;
};

struct BenchSettings {
    std::size_t trials = 1000;
    std::size_t warmup = 10;
};

struct PcaSettings {
    std::size_t components = 100;
    std::size_t bootstrap = 100;  // 0 disables the band
};

struct RunConfig {
    DatasetRecipe dataset;
    KnnSettings knn;
    SvmSettings svm;
    CnnSettings cnn;
    SweepSettings sweep;
    BenchSettings bench;
    PcaSettings pca;

    /// Re-checks every module invariant. Throws Error.
    void validate() const;
};

/// Missing keys keep their defaults; unknown sections or keys are errors.
RunConfig parse_config(std::istream& is);
RunConfig load_config(const std::filesystem::path& path);
void write_config(std::ostream& os, const RunConfig& cfg);

}  // namespace jamdet
