// jamdet: dataset synthesis, training, evaluation and benchmarking.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "jamdet/cnn.hpp"
#include "jamdet/common.hpp"
#include "jamdet/config.hpp"
#include "jamdet/evalbench.hpp"
#include "jamdet/features.hpp"
#include "jamdet/knn.hpp"
#include "jamdet/pca.hpp"
#include "jamdet/specgen.hpp"
#include "jamdet/svm.hpp"

namespace fs = std::filesystem;
using namespace jamdet;

namespace {

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = ".";
    std::vector<std::string> models;
    std::string dataset;
    std::optional<std::size_t> trials;
    std::optional<double> tau;
    std::string k;
    std::string kernel;
    std::string dims;
    std::string gains_db;
    std::string kind;
};

class ExitCode : public std::runtime_error {
public:
    ExitCode(int code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
    int code() const { return code_; }

private:
    int code_;
};

RunConfig load(const Options& o) { return o.config.empty() ? RunConfig{} : load_config(o.config); }

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

std::size_t parse_size(const std::string& s, const char* flag) {
    try {
        std::size_t used = 0;
        auto v = std::stoull(s, &used);
        if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw Error(std::string(flag) + ": expected a nonnegative integer, got '" + s + "'");
}

std::size_t parse_dims(const std::string& s) { return s == "full" ? 0 : parse_size(s, "--dims"); }

std::ofstream open_out(const fs::path& p) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream os(p, std::ios::binary);
    if (!os) throw Error("cannot write " + p.string());
    return os;
}

std::ifstream open_in(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    if (!is) throw Error("cannot open " + p.string());
    return is;
}

DatasetSplit load_one(const Options& o, Split s) {
    if (o.dataset.empty()) throw Error("--dataset is required");
    return load_split(split_path(o.dataset, s), s);
}

LabeledPsds labeled(const DatasetSplit& s) { return {psd_matrix(s.samples), binary_labels(s.samples)}; }

void emit_report(const fs::path& dir, const Report& r) {
    fs::create_directories(dir);
    {
        auto os = open_out(dir / "report.json");
        os << report_to_json(r) << '\n';
    }
    auto os = open_out(dir / "summary.txt");
    write_summary(os, r);
    write_summary(std::cout, r);
}

enum class ModelKind { Cnn, Knn, Svm };

ModelKind sniff(const fs::path& p) {
    auto is = open_in(p);
    std::string magic(8, '\0');
    is.read(magic.data(), 8);
    if (magic == "SSBCNN01") return ModelKind::Cnn;
    if (magic == "SSBKNN01") return ModelKind::Knn;
    if (magic == "SSBSVM01") return ModelKind::Svm;
    throw Error(p.string() + " is not a CNN, KNN or SVM model file");
}

cnn::CnnModel load_cnn(const fs::path& p) {
    auto is = open_in(p);
    return cnn::read_cnn(is);
}

// ---- subcommands ----

void cmd_gen_dataset(const Options& o) {
    auto cfg = load(o);
    if (o.seed) cfg.dataset.seed = *o.seed;
    cfg.validate();
    generate_dataset_files(cfg.dataset, o.out);
    std::cout << "wrote " << cfg.dataset.train.total() << '/' << cfg.dataset.validation.total() << '/'
              << cfg.dataset.test.total() << " train/validation/test spectrograms to " << o.out << '\n';
}

void train_cnn(const Options& o, RunConfig& cfg) {
    if (o.seed) {
        cfg.cnn.init_seed = *o.seed;
        cfg.cnn.train.seed = derive_seed(*o.seed, {1});
    }
    auto train = load_one(o, Split::Train);
    auto val = load_one(o, Split::Validation);
    auto model = cnn::make_detector(cfg.cnn.init_seed);
    auto result = cnn::train(model, train.samples, val.samples, cfg.cnn.train, [](const cnn::EpochRecord& r) {
        std::cout << "epoch " << r.epoch << "  train " << r.train_loss << "  val " << r.val_loss << std::endl;
    });
    fs::path dir = o.out;
    {
        auto os = open_out(dir / "cnn.model");
        cnn::write_cnn(os, model);
    }
    auto hist = open_out(dir / "cnn_history.csv");
    cnn::write_history_csv(hist, result);
    std::cout << "best epoch " << result.best_epoch << (result.stopped_early ? " (early stop)" : "") << ", model "
              << (dir / "cnn.model").string() << '\n';
}

void train_knn(const Options& o, RunConfig& cfg) {
    if (!o.k.empty()) {
        cfg.knn.k_list.clear();
        for (const auto& s : split_csv(o.k)) cfg.knn.k_list.push_back(parse_size(s, "--k"));
        if (cfg.knn.k_list.size() == 1) cfg.knn.k = cfg.knn.k_list.front();
    }
    if (!o.dims.empty()) cfg.knn.pca_dims = parse_dims(o.dims);
    cfg.validate();
    auto tr = labeled(load_one(o, Split::Train));
    auto va = labeled(load_one(o, Split::Validation));
    auto te = labeled(load_one(o, Split::Test));

    Report r;
    r.knn.push_back(knn_grid_eval(tr, va, te, cfg.knn.k_list, KnnMode::StandardizedFull));
    r.knn.push_back(knn_grid_eval(tr, va, te, cfg.knn.k_list, KnnMode::PcaProjected, cfg.knn.pca_dims));
    const std::size_t k = cfg.knn.k ? cfg.knn.k : r.knn.back().best_k;
    auto model = fit_knn(tr.psds, tr.labels, k, KnnMode::PcaProjected, cfg.knn.pca_dims);

    fs::path dir = o.out;
    {
        auto os = open_out(dir / "knn.model");
        write_knn(os, model);
    }
    auto csv = open_out(dir / "knn_table.csv");
    write_knn_csv(csv, r.knn);
    emit_report(dir, r);
    std::cout << "saved PCA-" << cfg.knn.pca_dims << " KNN with k=" << k << '\n';
}

void train_svm(const Options& o, RunConfig& cfg) {
    if (!o.kernel.empty()) {
        cfg.svm.kernels.clear();
        for (const auto& s : split_csv(o.kernel)) cfg.svm.kernels.push_back(kernel_from_string(s));
        if (cfg.svm.kernels.size() == 1) cfg.svm.kernel = cfg.svm.kernels.front();
    }
    if (!o.dims.empty()) {
        cfg.svm.dims.clear();
        for (const auto& s : split_csv(o.dims)) cfg.svm.dims.push_back(parse_dims(s));
        if (cfg.svm.dims.size() == 1) cfg.svm.model_dims = cfg.svm.dims.front();
    }
    cfg.validate();
    auto tr = labeled(load_one(o, Split::Train));
    auto va = labeled(load_one(o, Split::Validation));
    auto te = labeled(load_one(o, Split::Test));

    Report r;
    r.svm = svm_grid_eval(tr, va, te, cfg.svm.kernels, cfg.svm.dims, cfg.svm.grid);
    for (const auto& row : r.svm)
        if (!row.converged)
            r.warnings.push_back(std::string("SMO did not converge for ") + to_string(row.kernel) + " dims " +
                                 std::to_string(row.dims));

    fs::path dir = o.out;
    auto csv = open_out(dir / "svm_table.csv");
    write_svm_csv(csv, r.svm);
    emit_report(dir, r);

    std::optional<std::string> failure;
    SvmModel model;
    try {
        model = fit_svm_pipeline(tr, cfg.svm.kernel, cfg.svm.model_dims, cfg.svm.grid);
    } catch (const SvmNotConverged& e) {
        model = e.best_model();
        failure = std::string(e.what()) + "; saved the best iterate";
    }
    auto os = open_out(dir / "svm.model");
    write_svm(os, model);
    std::cout << "saved " << to_string(cfg.svm.kernel) << " SVM on "
              << (cfg.svm.model_dims ? std::to_string(cfg.svm.model_dims) + " PCA dims" : std::string("the full PSD"))
              << " with " << model.support_vectors.rows() << " support vectors\n";
    if (failure) throw ExitCode(3, *failure);
}

void cmd_train(const Options& o) {
    auto cfg = load(o);
    if (o.kind == "cnn")
        train_cnn(o, cfg);
    else if (o.kind == "knn")
        train_knn(o, cfg);
    else if (o.kind == "svm")
        train_svm(o, cfg);
    else
        throw Error("unknown model kind '" + o.kind + "' (cnn, knn, svm)");
}

void cmd_eval(const Options& o) {
    auto cfg = load(o);
    if (o.models.size() != 1) throw Error("eval takes exactly one --model");
    const double tau = o.tau.value_or(cfg.cnn.tau);
    if (!(tau >= 0.0 && tau <= 1.0)) throw Error("--tau must lie in [0, 1]");
    const fs::path path = o.models.front();
    auto test = load_one(o, Split::Test);
    auto truth = binary_labels(test.samples);

    Report r;
    std::vector<double> scores;
    std::string name;
    switch (sniff(path)) {
        case ModelKind::Cnn: {
            name = "cnn";
            auto model = load_cnn(path);
            scores = cnn::predict_all(model, test.samples);
            r.fa_md.push_back({name, fa_md_curve(scores, truth, tau_grid())});
            break;
        }
        case ModelKind::Knn: {
            name = "knn";
            auto is = open_in(path);
            auto model = read_knn(is);
            for (const auto& s : test.samples) scores.push_back(knn_predict_psd(model, psd_features(s)).label);
            break;
        }
        case ModelKind::Svm: {
            name = "svm";
            auto is = open_in(path);
            auto model = read_svm(is);
            for (const auto& s : test.samples) scores.push_back(svm_predict_psd(model, psd_features(s)));
            break;
        }
    }
    auto fm = fa_md_at(scores, truth, tau);
    std::vector<std::uint8_t> pred;
    for (double s : scores) pred.push_back(s >= tau ? 1 : 0);
    r.detection.push_back({name, tau, fm.p_fa, fm.p_md, accuracy_percent(pred, truth)});

    fs::path dir = o.out;
    if (!r.fa_md.empty()) {
        auto csv = open_out(dir / "fa_md.csv");
        write_fa_md_csv(csv, r.fa_md.front().curve);
    }
    emit_report(dir, r);
}

void cmd_bench(const Options& o) {
    auto cfg = load(o);
    if (o.models.empty()) throw Error("bench needs at least one --model");
    LatencyOptions lo{o.trials.value_or(cfg.bench.trials), cfg.bench.warmup};
    auto test = load_one(o, Split::Test);
    if (test.samples.empty()) throw Error("bench: the test split is empty");
    std::vector<Eigen::VectorXd> psds;
    for (const auto& s : test.samples) psds.push_back(psd_features(s));
    const auto n = test.samples.size();

    Report r;
    for (const auto& m : o.models) {
        switch (sniff(m)) {
            case ModelKind::Cnn: {
                auto model = load_cnn(m);
                const double tau = cfg.cnn.tau;
                r.latency.push_back({"cnn", measure_latency(
                                                [&](std::size_t i) {
                                                    return static_cast<std::uint8_t>(
                                                        cnn::classify(cnn::predict_one(model, test.samples[i]), tau));
                                                },
                                                n, lo)});
                break;
            }
            case ModelKind::Knn: {
                auto is = open_in(m);
                auto model = read_knn(is);
                std::vector<Eigen::VectorXd> feats;
                for (const auto& p : psds) feats.push_back(model.featurizer.apply(p));
                r.latency.push_back({"knn-pipeline", measure_latency(
                                                         [&](std::size_t i) {
                                                             return knn_predict_psd(model, psd_features(test.samples[i]))
                                                                 .label;
                                                         },
                                                         n, lo)});
                r.latency.push_back(
                    {"knn-model", measure_latency([&](std::size_t i) { return knn_predict(model, feats[i]).label; }, n, lo)});
                break;
            }
            case ModelKind::Svm: {
                auto is = open_in(m);
                auto model = read_svm(is);
                std::vector<Eigen::VectorXd> feats;
                for (const auto& p : psds) feats.push_back(model.featurizer.apply(p));
                r.latency.push_back(
                    {"svm-pipeline",
                     measure_latency([&](std::size_t i) { return svm_predict_psd(model, psd_features(test.samples[i])); },
                                     n, lo)});
                r.latency.push_back(
                    {"svm-model", measure_latency([&](std::size_t i) { return svm_predict(model, feats[i]); }, n, lo)});
                break;
            }
        }
    }
    for (const auto& l : r.latency)
        if (l.cdf.warning) r.warnings.push_back(l.model + ": " + *l.cdf.warning);
    fs::path dir = o.out;
    auto csv = open_out(dir / "latency.csv");
    write_latency_csv(csv, r.latency);
    emit_report(dir, r);
}

void cmd_gain_sweep(const Options& o) {
    auto cfg = load(o);
    if (o.seed) cfg.sweep.seed = *o.seed;
    if (!o.gains_db.empty()) {
        cfg.sweep.gains_db.clear();
        for (const auto& s : split_csv(o.gains_db)) {
            std::size_t used = 0;
            double v = std::stod(s, &used);
            if (used != s.size()) throw Error("--gains-db: bad value '" + s + "'");
            cfg.sweep.gains_db.push_back(v);
        }
    }
    if (o.models.size() != 1) throw Error("gain-sweep takes exactly one --model");
    if (sniff(o.models.front()) != ModelKind::Cnn) throw Error("gain-sweep needs a CNN model");
    auto model = load_cnn(o.models.front());
    GainSweepOptions go{cfg.sweep.reference_db, o.trials.value_or(cfg.sweep.samples_per_gain), cfg.sweep.seed};
    Report r;
    r.gain_sweep = gain_sweep(cfg.dataset, cfg.sweep.gains_db, model, go);
    fs::path dir = o.out;
    auto csv = open_out(dir / "gain_sweep.csv");
    write_sweep_csv(csv, *r.gain_sweep);
    emit_report(dir, r);
}

void cmd_pca_analyze(const Options& o) {
    auto cfg = load(o);
    if (!o.dims.empty()) cfg.pca.components = parse_dims(o.dims);
    auto train = load_one(o, Split::Train);
    auto psds = psd_matrix(train.samples);
    if (psds.rows() < 2) throw Error("pca-analyze: need at least 2 training samples");
    const auto cap = static_cast<std::size_t>(std::min<Eigen::Index>(psds.rows() - 1, psds.cols()));
    const std::size_t d = cfg.pca.components == 0 ? cap : std::min(cfg.pca.components, cap);
    auto model = fit_pca(psds, d);
    PcaCurve curve;
    curve.cumulative = explained_variance_curve(model);
    if (cfg.pca.bootstrap > 0) {
        auto band = bootstrap_variance_band(psds, cfg.pca.bootstrap, o.seed.value_or(cfg.dataset.seed));
        const auto keep = std::min(band.lower.size(), d);
        curve.lower.assign(band.lower.begin(), band.lower.begin() + static_cast<std::ptrdiff_t>(keep));
        curve.upper.assign(band.upper.begin(), band.upper.begin() + static_cast<std::ptrdiff_t>(keep));
    }
    Report r;
    r.pca = curve;
    fs::path dir = o.out;
    auto csv = open_out(dir / "pca_curve.csv");
    write_pca_csv(csv, curve);
    emit_report(dir, r);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SSB jammer detection toolkit"};
    app.require_subcommand(1);
    Options o;

    auto add_config = [&](CLI::App* c) { c->add_option("--config", o.config, "INI run configuration")->check(CLI::ExistingFile); };
    auto add_out = [&](CLI::App* c) { c->add_option("--out", o.out, "Output directory"); };
    auto add_dataset = [&](CLI::App* c) {
        c->add_option("--dataset", o.dataset, "Dataset directory")->required()->check(CLI::ExistingDirectory);
    };
    auto add_seed = [&](CLI::App* c) { c->add_option("--seed", o.seed, "Override the command's master seed"); };

    auto* gen = app.add_subcommand("gen-dataset", "Synthesize train/validation/test spectrograms");
    add_config(gen);
    add_seed(gen);
    add_out(gen);

    auto* train = app.add_subcommand("train", "Train a cnn, knn or svm model");
    train->add_option("kind", o.kind, "cnn, knn or svm")->required()->check(CLI::IsMember({"cnn", "knn", "svm"}));
    add_config(train);
    add_dataset(train);
    add_seed(train);
    add_out(train);
    train->add_option("--k", o.k, "Comma-separated k values (knn)");
    train->add_option("--kernel", o.kernel, "Comma-separated kernels: linear, polynomial, rbf (svm)");
    train->add_option("--dims", o.dims, "PCA dimensions, comma-separated; 'full' for the raw PSD");

    auto* eval = app.add_subcommand("eval", "FA/MD and accuracy of a model on the test split");
    add_config(eval);
    add_dataset(eval);
    add_out(eval);
    eval->add_option("--model", o.models, "Model file")->required()->check(CLI::ExistingFile);
    eval->add_option("--tau", o.tau, "Decision threshold in [0, 1]");

    auto* bench = app.add_subcommand("bench", "Single-sample classification latency");
    add_config(bench);
    add_dataset(bench);
    add_out(bench);
    bench->add_option("--model", o.models, "Model file (repeatable)")->required()->check(CLI::ExistingFile);
    bench->add_option("--trials", o.trials, "Timed trials per model");

    auto* sweep = app.add_subcommand("gain-sweep", "CNN output on jammed frames versus jammer gain");
    add_config(sweep);
    add_seed(sweep);
    add_out(sweep);
    sweep->add_option("--model", o.models, "CNN model file")->required()->check(CLI::ExistingFile);
    sweep->add_option("--gains-db", o.gains_db, "Comma-separated jammer gains in dB");
    sweep->add_option("--trials", o.trials, "Jammed samples per gain");

    auto* pca = app.add_subcommand("pca-analyze", "Cumulative explained variance of the training PSDs");
    add_config(pca);
    add_dataset(pca);
    add_seed(pca);
    add_out(pca);
    pca->add_option("--dims", o.dims, "Number of components");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) cmd_gen_dataset(o);
        if (*train) cmd_train(o);
        if (*eval) cmd_eval(o);
        if (*bench) cmd_bench(o);
        if (*sweep) cmd_gain_sweep(o);
        if (*pca) cmd_pca_analyze(o);
    } catch (const ExitCode& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
