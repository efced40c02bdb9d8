#include "jamdet/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>
#include <string>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "jamdet/common.hpp"

namespace jamdet {

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& raw) {
    const std::string s = trim(raw);
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != s.size()) throw Error("not a number: '" + raw + "'");
    return v;
}

std::uint64_t to_uint(const std::string& raw) {
    const std::string s = trim(raw);
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || s.empty()) throw Error("not a nonnegative integer: '" + raw + "'");
    return v;
}

bool to_bool(const std::string& raw) {
    const std::string s = trim(raw);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw Error("not a boolean: '" + raw + "'");
}

std::vector<std::string> split_list(const std::string& raw) {
    std::vector<std::string> out;
    std::stringstream ss(raw);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

template <typename T, typename F>
std::string join(const std::vector<T>& v, F f) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + f(v[i]);
    return s;
}

std::string dims_str(std::size_t d) { return d == 0 ? "full" : std::to_string(d); }
std::size_t dims_from(const std::string& s) { return s == "full" ? 0 : to_uint(s); }

struct Binding {
    const char* section;
    const char* key;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
};

#define JD_DOUBLE(sec, key, field)                                          \
    Binding {                                                               \
        sec, key, [](const RunConfig& c) { return fmt(c.field); },          \
            [](RunConfig& c, const std::string& v) { c.field = to_double(v); } \
    }
#define JD_UINT(sec, key, field)                                                                  \
    Binding {                                                                                     \
        sec, key, [](const RunConfig& c) { return std::to_string(c.field); },                     \
            [](RunConfig& c, const std::string& v) { c.field = static_cast<decltype(c.field)>(to_uint(v)); } \
    }

const std::vector<Binding>& bindings() {
    static const std::vector<Binding> b = {
        JD_DOUBLE("radio", "observation_bandwidth", dataset.radio.observation_bandwidth),
        JD_DOUBLE("radio", "signal_bandwidth", dataset.radio.signal_bandwidth),
        JD_DOUBLE("radio", "subcarrier_spacing", dataset.radio.subcarrier_spacing),
        JD_UINT("radio", "num_subcarriers", dataset.radio.num_subcarriers),
        JD_UINT("radio", "ssb_subcarriers", dataset.radio.ssb_subcarriers),
        JD_DOUBLE("radio", "ssb_center_offset", dataset.radio.ssb_center_offset),
        JD_DOUBLE("radio", "sample_rate", dataset.radio.sample_rate),
        JD_UINT("radio", "beacon_period", dataset.radio.beacon_period),

        {"channel", "signal_gain_db", [](const RunConfig& c) { return fmt(20.0 * std::log10(c.dataset.channel.signal_gain)); },
         [](RunConfig& c, const std::string& v) { c.dataset.channel.signal_gain = gain_db_to_linear(to_double(v)); }},
        {"channel", "jammer_gain_db", [](const RunConfig& c) { return fmt(c.dataset.channel.jammer_gain_db()); },
         [](RunConfig& c, const std::string& v) { c.dataset.channel.set_jammer_gain_db(to_double(v)); }},
        JD_DOUBLE("channel", "noise_power", dataset.channel.noise_power),
        {"channel", "jammer_noise",
         [](const RunConfig& c) {
             return std::string(c.dataset.channel.jammer_noise == JammerNoise::Gaussian ? "gaussian" : "uniform");
         },
         [](RunConfig& c, const std::string& v) {
             const auto s = trim(v);
             if (s == "gaussian")
                 c.dataset.channel.jammer_noise = JammerNoise::Gaussian;
             else if (s == "uniform")
                 c.dataset.channel.jammer_noise = JammerNoise::Uniform;
             else
                 throw Error("jammer_noise must be gaussian or uniform");
         }},

        JD_UINT("spectrogram", "window_size", dataset.spectrogram.window_size),
        JD_UINT("spectrogram", "stack_depth", dataset.spectrogram.stack_depth),
        JD_DOUBLE("spectrogram", "epsilon", dataset.spectrogram.epsilon),

        JD_UINT("dataset", "seed", dataset.seed),
        JD_DOUBLE("dataset", "duty_cycle", dataset.duty_cycle),
        JD_UINT("dataset", "train_empty", dataset.train.empty),
        JD_UINT("dataset", "train_ongoing", dataset.train.ongoing),
        JD_UINT("dataset", "train_jammed", dataset.train.jammed),
        JD_UINT("dataset", "validation_empty", dataset.validation.empty),
        JD_UINT("dataset", "validation_ongoing", dataset.validation.ongoing),
        JD_UINT("dataset", "validation_jammed", dataset.validation.jammed),
        JD_UINT("dataset", "test_empty", dataset.test.empty),
        JD_UINT("dataset", "test_ongoing", dataset.test.ongoing),
        JD_UINT("dataset", "test_jammed", dataset.test.jammed),

        {"knn", "k_list", [](const RunConfig& c) { return join(c.knn.k_list, [](auto k) { return std::to_string(k); }); },
         [](RunConfig& c, const std::string& v) {
             c.knn.k_list.clear();
             for (const auto& s : split_list(v)) c.knn.k_list.push_back(to_uint(s));
         }},
        JD_UINT("knn", "pca_dims", knn.pca_dims),
        JD_UINT("knn", "k", knn.k),

        {"svm", "kernels",
         [](const RunConfig& c) { return join(c.svm.kernels, [](auto k) { return std::string(to_string(k)); }); },
         [](RunConfig& c, const std::string& v) {
             c.svm.kernels.clear();
             for (const auto& s : split_list(v)) c.svm.kernels.push_back(kernel_from_string(s));
         }},
        {"svm", "dims", [](const RunConfig& c) { return join(c.svm.dims, dims_str); },
         [](RunConfig& c, const std::string& v) {
             c.svm.dims.clear();
             for (const auto& s : split_list(v)) c.svm.dims.push_back(dims_from(s));
         }},
        {"svm", "kernel", [](const RunConfig& c) { return std::string(to_string(c.svm.kernel)); },
         [](RunConfig& c, const std::string& v) { c.svm.kernel = kernel_from_string(trim(v)); }},
        {"svm", "model_dims", [](const RunConfig& c) { return dims_str(c.svm.model_dims); },
         [](RunConfig& c, const std::string& v) { c.svm.model_dims = dims_from(trim(v)); }},
        JD_DOUBLE("svm", "C", svm.grid.smo.C),
        JD_DOUBLE("svm", "tol", svm.grid.smo.tol),
        JD_UINT("svm", "max_iterations", svm.grid.smo.max_iterations),
        {"svm", "degree", [](const RunConfig& c) { return std::to_string(c.svm.grid.degree); },
         [](RunConfig& c, const std::string& v) { c.svm.grid.degree = static_cast<int>(to_uint(v)); }},
        JD_DOUBLE("svm", "coef0", svm.grid.coef0),

        JD_UINT("cnn", "batch_size", cnn.train.batch_size),
        JD_DOUBLE("cnn", "learning_rate", cnn.train.adam.learning_rate),
        JD_DOUBLE("cnn", "beta1", cnn.train.adam.beta1),
        JD_DOUBLE("cnn", "beta2", cnn.train.adam.beta2),
        JD_DOUBLE("cnn", "adam_epsilon", cnn.train.adam.epsilon),
        JD_UINT("cnn", "patience", cnn.train.patience),
        {"cnn", "strictly_consecutive",
         [](const RunConfig& c) {
             return std::string(c.cnn.train.rule == cnn::EarlyStopRule::ConsecutiveIncreases ? "true" : "false");
         },
         [](RunConfig& c, const std::string& v) {
             c.cnn.train.rule = to_bool(v) ? cnn::EarlyStopRule::ConsecutiveIncreases : cnn::EarlyStopRule::NoImprovement;
         }},
        JD_UINT("cnn", "max_epochs", cnn.train.max_epochs),
        JD_UINT("cnn", "shuffle_seed", cnn.train.seed),
        JD_UINT("cnn", "init_seed", cnn.init_seed),
        JD_DOUBLE("cnn", "tau", cnn.tau),

        JD_DOUBLE("sweep", "reference_db", sweep.reference_db),
        {"sweep", "gains_db", [](const RunConfig& c) { return join(c.sweep.gains_db, fmt); },
         [](RunConfig& c, const std::string& v) {
             c.sweep.gains_db.clear();
             for (const auto& s : split_list(v)) c.sweep.gains_db.push_back(to_double(s));
         }},
        JD_UINT("sweep", "samples_per_gain", sweep.samples_per_gain),
        JD_UINT("sweep", "seed", sweep.seed),

        JD_UINT("bench", "trials", bench.trials),
        JD_UINT("bench", "warmup", bench.warmup),

        JD_UINT("pca", "components", pca.components),
        JD_UINT("pca", "bootstrap", pca.bootstrap),
    };
    return b;
}

#undef JD_DOUBLE
#undef JD_UINT

}  // namespace

void RunConfig::validate() const {
    dataset.radio.validate();
    dataset.channel.validate();
    dataset.spectrogram.validate();
    if (!(dataset.duty_cycle >= 0.0 && dataset.duty_cycle <= 1.0)) throw Error("dataset.duty_cycle must lie in [0, 1]");
    if (knn.k_list.empty()) throw Error("knn.k_list is empty");
    for (auto k : knn.k_list)
        if (k == 0) throw Error("knn.k_list entries must be >= 1");
    if (knn.pca_dims == 0) throw Error("knn.pca_dims must be >= 1");
    if (svm.kernels.empty() || svm.dims.empty()) throw Error("svm.kernels and svm.dims must be nonempty");
    if (!(svm.grid.smo.C > 0.0) || !(svm.grid.smo.tol > 0.0)) throw Error("svm.C and svm.tol must be > 0");
    if (svm.grid.degree < 1) throw Error("svm.degree must be >= 1");
    if (cnn.train.batch_size == 0 || cnn.train.max_epochs == 0 || cnn.train.patience == 0)
        throw Error("cnn.batch_size, max_epochs and patience must be >= 1");
    if (!(cnn.train.adam.learning_rate >= 0.0)) throw Error("cnn.learning_rate must be >= 0");
    if (!(cnn.tau >= 0.0 && cnn.tau <= 1.0)) throw Error("cnn.tau must lie in [0, 1]");
    if (dataset.spectrogram.stack_depth != cnn::kDetectorInput.h || dataset.spectrogram.window_size != cnn::kDetectorInput.w)
        throw Error("spectrogram must be 100 x 1024 to match the detector input");
    if (sweep.samples_per_gain == 0) throw Error("sweep.samples_per_gain must be >= 1");
    if (bench.trials == 0) throw Error("bench.trials must be >= 1");
    if (pca.components == 0) throw Error("pca.components must be >= 1");
}

namespace {

// read_ini only understands whole-line comments; drop trailing "; ..." too.
std::string strip_inline_comments(std::istream& is) {
    std::string out, line;
    while (std::getline(is, line)) {
        for (std::size_t i = 1; i < line.size(); ++i)
            if ((line[i] == ';' || line[i] == '#') && (line[i - 1] == ' ' || line[i - 1] == '\t')) {
                line.erase(i);
                break;
            }
        out += line;
        out += '\n';
    }
    return out;
}

}  // namespace

RunConfig parse_config(std::istream& is) {
    boost::property_tree::ptree tree;
    try {
        std::istringstream clean(strip_inline_comments(is));
        boost::property_tree::ini_parser::read_ini(clean, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw Error(std::string("config: ") + e.what());
    }
    RunConfig cfg;
    const auto& table = bindings();
    for (const auto& [section, body] : tree) {
        if (body.empty()) throw Error("config: key '" + section + "' outside of a section");
        for (const auto& [key, value] : body) {
            auto it = std::find_if(table.begin(), table.end(),
                                   [&](const Binding& b) { return section == b.section && key == b.key; });
            if (it == table.end()) throw Error("config: unknown key [" + section + "] " + key);
            try {
                it->set(cfg, value.data());
            } catch (const Error& e) {
                throw Error("config: [" + section + "] " + key + ": " + e.what());
            }
        }
    }
    cfg.validate();
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config " + path.string());
    try {
        return parse_config(in);
    } catch (const Error& e) {
        throw Error(path.string() + ": " + e.what());
    }
}

void write_config(std::ostream& os, const RunConfig& cfg) {
    std::string current;
    for (const auto& b : bindings()) {
        if (current != b.section) {
            if (!current.empty()) os << '\n';
            current = b.section;
            os << '[' << current << "]\n";
        }
        os << b.key << " = " << b.get(cfg) << '\n';
    }
}

}  // namespace jamdet
