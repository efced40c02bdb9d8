#include "jamdet/evalbench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "jamdet/common.hpp"

namespace jamdet {

using json = nlohmann::json;

std::vector<double> tau_grid(std::size_t points) {
    if (points < 2) throw Error("tau_grid: need at least 2 points");
    std::vector<double> taus(points);
    for (std::size_t i = 0; i < points; ++i) taus[i] = static_cast<double>(i) / static_cast<double>(points - 1);
    return taus;
}

namespace {

struct ClassSplit {
    std::vector<double> benign, jammed;  // sorted
};

ClassSplit split_scores(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    if (scores.size() != labels.size()) throw Error("fa/md: scores and labels differ in length");
    ClassSplit s;
    for (std::size_t i = 0; i < scores.size(); ++i) (labels[i] ? s.jammed : s.benign).push_back(scores[i]);
    if (s.benign.empty() || s.jammed.empty()) throw Error("fa/md: the test set must contain both classes");
    std::sort(s.benign.begin(), s.benign.end());
    std::sort(s.jammed.begin(), s.jammed.end());
    return s;
}

// Fraction of sorted values >= tau, and < tau.
double frac_at_least(const std::vector<double>& v, double tau) {
    auto it = std::lower_bound(v.begin(), v.end(), tau);
    return static_cast<double>(v.end() - it) / static_cast<double>(v.size());
}

FaMd fa_md_sorted(const ClassSplit& s, double tau) {
    return {frac_at_least(s.benign, tau), 1.0 - frac_at_least(s.jammed, tau)};
}

}  // namespace

FaMd fa_md_at(std::span<const double> scores, std::span<const std::uint8_t> labels, double tau) {
    return fa_md_sorted(split_scores(scores, labels), tau);
}

FaMdCurve fa_md_curve(std::span<const double> scores, std::span<const std::uint8_t> labels,
                      std::span<const double> taus) {
    auto s = split_scores(scores, labels);
    FaMdCurve c;
    c.taus.assign(taus.begin(), taus.end());
    for (double t : taus) {
        auto r = fa_md_sorted(s, t);
        c.p_fa.push_back(r.p_fa);
        c.p_md.push_back(r.p_md);
    }
    return c;
}

double accuracy_percent(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> truth) {
    if (predicted.size() != truth.size()) throw Error("accuracy: length mismatch");
    if (truth.empty()) throw Error("accuracy: empty set");
    std::size_t hit = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) hit += predicted[i] == truth[i];
    return 100.0 * static_cast<double>(hit) / static_cast<double>(truth.size());
}

namespace {

double sorted_percentile(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) throw Error("percentile: no samples");
    if (!(p >= 0.0 && p <= 1.0)) throw Error("percentile: p must lie in [0, 1]");
    const auto n = sorted.size();
    auto idx = static_cast<std::size_t>(std::floor(p * static_cast<double>(n)));
    return sorted[std::min(n - 1, idx)];
}

}  // namespace

double percentile(std::span<const double> samples, double p) {
    std::vector<double> v(samples.begin(), samples.end());
    std::sort(v.begin(), v.end());
    return sorted_percentile(v, p);
}

double LatencyCdf::percentile(double p) const { return sorted_percentile(seconds, p); }

double LatencyCdf::cdf(double t) const {
    if (seconds.empty()) return 0.0;
    auto it = std::upper_bound(seconds.begin(), seconds.end(), t);
    return static_cast<double>(it - seconds.begin()) / static_cast<double>(seconds.size());
}

double clock_resolution() {
    using clock = std::chrono::steady_clock;
    auto best = clock::duration::max();
    for (int i = 0; i < 200; ++i) {
        auto a = clock::now();
        auto b = clock::now();
        while (b == a) b = clock::now();
        best = std::min(best, b - a);
    }
    return std::chrono::duration<double>(best).count();
}

LatencyCdf measure_latency(const std::function<std::uint8_t(std::size_t)>& classify, std::size_t n_inputs,
                           const LatencyOptions& options) {
    if (n_inputs == 0) throw Error("measure_latency: no inputs");
    if (options.trials == 0) throw Error("measure_latency: trials must be >= 1");
    using clock = std::chrono::steady_clock;
    volatile std::uint8_t sink = 0;
    for (std::size_t i = 0; i < options.warmup; ++i) sink = sink ^ classify(i % n_inputs);

    LatencyCdf out;
    out.seconds.reserve(options.trials);
    for (std::size_t i = 0; i < options.trials; ++i) {
        auto t0 = clock::now();
        std::uint8_t y = classify(i % n_inputs);
        auto t1 = clock::now();
        sink = sink ^ y;
        out.seconds.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
    std::sort(out.seconds.begin(), out.seconds.end());
    const double res = clock_resolution();
    if (res > 0.01 * out.median()) {
        std::ostringstream msg;
        msg << "clock resolution " << res << " s exceeds 1% of the median duration " << out.median() << " s";
        out.warning = msg.str();
    }
    return out;
}

double sweep_linear_gain(double recipe_gain, double gain_db, double reference_db) {
    return recipe_gain * std::pow(10.0, (gain_db - reference_db) / 20.0);
}

std::vector<double> jammed_outputs(const DatasetRecipe& recipe, double linear_gain, cnn::CnnModel& model,
                                   std::size_t count, std::uint64_t seed) {
    ChannelParams ch = recipe.channel;
    ch.jammer_gain = linear_gain;
    ch.validate();
    const std::size_t len = recipe.spectrogram.window_size * recipe.spectrogram.stack_depth;
    std::vector<double> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        auto frame = generate_frame(recipe.radio, ch, CaseLabel::Jammed, recipe.duty_cycle,
                                    derive_seed(seed, {0x5EE9, i}), len);
        out.push_back(cnn::predict_one(model, make_spectrogram(frame, recipe.spectrogram)));
    }
    return out;
}

GainSweepResult gain_sweep(const DatasetRecipe& recipe, std::span<const double> gains_db, cnn::CnnModel& model,
                           const GainSweepOptions& options) {
    if (options.samples_per_gain == 0) throw Error("gain_sweep: samples_per_gain must be >= 1");
    GainSweepResult r;
    r.reference_db = options.reference_db;
    for (double g : gains_db) {
        GainSweepPoint p;
        p.gain_db = g;
        p.linear_gain = sweep_linear_gain(recipe.channel.jammer_gain, g, options.reference_db);
        p.distance_ratio = std::pow(10.0, (options.reference_db - g) / 20.0);
        p.outputs = jammed_outputs(recipe, p.linear_gain, model, options.samples_per_gain, options.seed);
        p.p90 = percentile(p.outputs, 0.9);
        r.points.push_back(std::move(p));
    }
    return r;
}

// ---- JSON ----

namespace {

json grid_json(const KnnGrid& g) {
    json rows = json::array();
    for (const auto& r : g.rows)
        rows.push_back({{"k", r.k}, {"train", r.train}, {"validation", r.validation}, {"test", r.test}});
    return {{"mode", static_cast<int>(g.mode)}, {"best_k", g.best_k}, {"rows", rows}};
}

KnnGrid grid_from(const json& j) {
    KnnGrid g;
    g.mode = static_cast<KnnMode>(j.at("mode").get<int>());
    g.best_k = j.at("best_k").get<std::size_t>();
    for (const auto& r : j.at("rows"))
        g.rows.push_back({r.at("k").get<std::size_t>(), r.at("train").get<double>(), r.at("validation").get<double>(),
                          r.at("test").get<double>()});
    return g;
}

json curve_json(const FaMdCurve& c) { return {{"tau", c.taus}, {"p_fa", c.p_fa}, {"p_md", c.p_md}}; }

FaMdCurve curve_from(const json& j) {
    return {j.at("tau").get<std::vector<double>>(), j.at("p_fa").get<std::vector<double>>(),
            j.at("p_md").get<std::vector<double>>()};
}

json report_json(const Report& r) {
    json j = json::object();
    j["format"] = "jamdet-report-1";
    j["knn"] = json::array();
    for (const auto& g : r.knn) j["knn"].push_back(grid_json(g));
    j["svm"] = json::array();
    for (const auto& s : r.svm)
        j["svm"].push_back({{"kernel", to_string(s.kernel)},
                            {"dims", s.dims},
                            {"train", s.train},
                            {"validation", s.validation},
                            {"test", s.test},
                            {"support_vectors", s.support_vectors},
                            {"converged", s.converged}});
    j["detection"] = json::array();
    for (const auto& d : r.detection)
        j["detection"].push_back({{"model", d.model},
                                  {"tau", d.tau},
                                  {"p_fa", d.p_fa},
                                  {"p_md", d.p_md},
                                  {"accuracy", d.accuracy}});
    j["fa_md"] = json::array();
    for (const auto& c : r.fa_md) j["fa_md"].push_back({{"model", c.model}, {"curve", curve_json(c.curve)}});
    j["latency"] = json::array();
    for (const auto& l : r.latency) {
        json e = {{"model", l.model}, {"seconds", l.cdf.seconds}};
        if (!l.cdf.seconds.empty()) {
            e["p50"] = l.cdf.median();
            e["p95"] = l.cdf.p95();
        }
        if (l.cdf.warning) e["warning"] = *l.cdf.warning;
        j["latency"].push_back(e);
    }
    if (r.gain_sweep) {
        json pts = json::array();
        for (const auto& p : r.gain_sweep->points)
            pts.push_back({{"gain_db", p.gain_db},
                           {"linear_gain", p.linear_gain},
                           {"distance_ratio", p.distance_ratio},
                           {"outputs", p.outputs},
                           {"p90", p.p90}});
        j["gain_sweep"] = {{"reference_db", r.gain_sweep->reference_db}, {"points", pts}};
    }
    if (r.pca) j["pca"] = {{"cumulative", r.pca->cumulative}, {"lower", r.pca->lower}, {"upper", r.pca->upper}};
    j["warnings"] = r.warnings;
    return j;
}

}  // namespace

std::string report_to_json(const Report& r, int indent) { return report_json(r).dump(indent); }

Report report_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(std::string("report: invalid JSON: ") + e.what());
    }
    if (!j.is_object() || j.value("format", std::string()) != "jamdet-report-1")
        throw Error("report: missing or unknown format tag");
    Report r;
    try {
        for (const auto& g : j.value("knn", json::array())) r.knn.push_back(grid_from(g));
        for (const auto& s : j.value("svm", json::array()))
            r.svm.push_back({kernel_from_string(s.at("kernel").get<std::string>()), s.at("dims").get<std::size_t>(),
                             s.at("train").get<double>(), s.at("validation").get<double>(), s.at("test").get<double>(),
                             s.at("support_vectors").get<std::size_t>(), s.at("converged").get<bool>()});
        for (const auto& d : j.value("detection", json::array()))
            r.detection.push_back({d.at("model").get<std::string>(), d.at("tau").get<double>(),
                                   d.at("p_fa").get<double>(), d.at("p_md").get<double>(),
                                   d.at("accuracy").get<double>()});
        for (const auto& c : j.value("fa_md", json::array()))
            r.fa_md.push_back({c.at("model").get<std::string>(), curve_from(c.at("curve"))});
        for (const auto& l : j.value("latency", json::array())) {
            LatencySummary s;
            s.model = l.at("model").get<std::string>();
            s.cdf.seconds = l.at("seconds").get<std::vector<double>>();
            if (l.contains("warning")) s.cdf.warning = l.at("warning").get<std::string>();
            r.latency.push_back(std::move(s));
        }
        if (j.contains("gain_sweep")) {
            const auto& g = j.at("gain_sweep");
            GainSweepResult sw;
            sw.reference_db = g.at("reference_db").get<double>();
            for (const auto& p : g.at("points"))
                sw.points.push_back({p.at("gain_db").get<double>(), p.at("linear_gain").get<double>(),
                                     p.at("distance_ratio").get<double>(), p.at("outputs").get<std::vector<double>>(),
                                     p.at("p90").get<double>()});
            r.gain_sweep = std::move(sw);
        }
        if (j.contains("pca")) {
            const auto& p = j.at("pca");
            r.pca = PcaCurve{p.at("cumulative").get<std::vector<double>>(), p.at("lower").get<std::vector<double>>(),
                             p.at("upper").get<std::vector<double>>()};
        }
        r.warnings = j.value("warnings", std::vector<std::string>{});
    } catch (const json::exception& e) {
        throw Error(std::string("report: malformed section: ") + e.what());
    }
    return r;
}

bool operator==(const Report& a, const Report& b) { return report_json(a) == report_json(b); }

// ---- human-readable summary ----

void write_summary(std::ostream& os, const Report& r) {
    const auto flags = os.flags();
    os << std::fixed << std::setprecision(3);
    if (!r.knn.empty()) {
        os << "KNN accuracy (%)\n  k";
        for (const auto& g : r.knn) os << " | " << to_string(g.mode) << " train/val/test";
        os << '\n';
        for (std::size_t i = 0; i < r.knn.front().rows.size(); ++i) {
            os << "  " << std::setw(2) << r.knn.front().rows[i].k;
            for (const auto& g : r.knn) {
                if (i >= g.rows.size()) continue;
                const auto& row = g.rows[i];
                os << " | " << row.train << ' ' << row.validation << ' ' << row.test;
            }
            os << '\n';
        }
        for (const auto& g : r.knn) os << "  best k (" << to_string(g.mode) << "): " << g.best_k << '\n';
    }
    if (!r.svm.empty()) {
        os << "SVM accuracy (%)\n";
        for (const auto& s : r.svm) {
            os << "  " << std::setw(10) << std::left << to_string(s.kernel) << std::right << " dims "
               << std::setw(4) << (s.dims == 0 ? std::string("full") : std::to_string(s.dims)) << "  " << s.train
               << ' ' << s.validation << ' ' << s.test << "  SVs " << s.support_vectors
               << (s.converged ? "" : "  (not converged)") << '\n';
        }
    }
    for (const auto& d : r.detection)
        os << "Detection " << d.model << " @ tau " << d.tau << ": P_FA " << d.p_fa << ", P_MD " << d.p_md
           << ", accuracy " << d.accuracy << "%\n";
    for (const auto& c : r.fa_md) os << "FA/MD curve " << c.model << ": " << c.curve.taus.size() << " points\n";
    os << std::setprecision(6);
    for (const auto& l : r.latency) {
        if (l.cdf.seconds.empty()) continue;
        os << "Latency " << l.model << ": p50 " << l.cdf.median() * 1e3 << " ms, p95 " << l.cdf.p95() * 1e3
           << " ms over " << l.cdf.seconds.size() << " trials\n";
        if (l.cdf.warning) os << "  warning: " << *l.cdf.warning << '\n';
    }
    os << std::setprecision(4);
    if (r.gain_sweep) {
        os << "Gain sweep (reference " << r.gain_sweep->reference_db << " dB)\n";
        for (const auto& p : r.gain_sweep->points)
            os << "  " << p.gain_db << " dB  distance x" << p.distance_ratio << "  p90 " << p.p90 << '\n';
    }
    if (r.pca && !r.pca->cumulative.empty()) {
        const auto& c = r.pca->cumulative;
        auto first_at = [&](double level) {
            auto it = std::lower_bound(c.begin(), c.end(), level);
            return it == c.end() ? c.size() : static_cast<std::size_t>(it - c.begin()) + 1;
        };
        os << "PCA components for 90/95/99% variance: " << first_at(0.90) << ' ' << first_at(0.95) << ' '
           << first_at(0.99) << '\n';
    }
    for (const auto& w : r.warnings) os << "warning: " << w << '\n';
    os.flags(flags);
}

// ---- CSV ----

void write_knn_csv(std::ostream& os, std::span<const KnnGrid> grids) {
    os << "k";
    for (const auto& g : grids) {
        const char* m = to_string(g.mode);
        os << ',' << m << "_train," << m << "_validation," << m << "_test";
    }
    os << '\n';
    if (grids.empty()) return;
    os << std::setprecision(10);
    for (std::size_t i = 0; i < grids.front().rows.size(); ++i) {
        os << grids.front().rows[i].k;
        for (const auto& g : grids) {
            if (i >= g.rows.size() || g.rows[i].k != grids.front().rows[i].k)
                throw Error("knn csv: grids use different k lists");
            os << ',' << g.rows[i].train << ',' << g.rows[i].validation << ',' << g.rows[i].test;
        }
        os << '\n';
    }
}

void write_svm_csv(std::ostream& os, std::span<const SvmGridRow> rows) {
    os << "kernel,dims,train,validation,test,support_vectors,converged\n" << std::setprecision(10);
    for (const auto& r : rows)
        os << to_string(r.kernel) << ',' << (r.dims == 0 ? std::string("full") : std::to_string(r.dims)) << ','
           << r.train << ',' << r.validation << ',' << r.test << ',' << r.support_vectors << ','
           << (r.converged ? 1 : 0) << '\n';
}

void write_fa_md_csv(std::ostream& os, const FaMdCurve& curve) {
    os << "tau,p_fa,p_md\n" << std::setprecision(10);
    for (std::size_t i = 0; i < curve.taus.size(); ++i)
        os << curve.taus[i] << ',' << curve.p_fa[i] << ',' << curve.p_md[i] << '\n';
}

void write_latency_csv(std::ostream& os, std::span<const LatencySummary> runs) {
    os << "model,seconds,cdf\n" << std::setprecision(10);
    for (const auto& r : runs) {
        const auto n = r.cdf.seconds.size();
        for (std::size_t i = 0; i < n; ++i)
            os << r.model << ',' << r.cdf.seconds[i] << ',' << static_cast<double>(i + 1) / static_cast<double>(n)
               << '\n';
    }
}

void write_sweep_csv(std::ostream& os, const GainSweepResult& sweep) {
    os << "gain_db,linear_gain,distance_ratio,p90,n\n" << std::setprecision(10);
    for (const auto& p : sweep.points)
        os << p.gain_db << ',' << p.linear_gain << ',' << p.distance_ratio << ',' << p.p90 << ',' << p.outputs.size()
           << '\n';
}

void write_pca_csv(std::ostream& os, const PcaCurve& curve) {
    const bool band = !curve.lower.empty();
    os << "components,cumulative" << (band ? ",lower,upper" : "") << '\n' << std::setprecision(10);
    for (std::size_t i = 0; i < curve.cumulative.size(); ++i) {
        os << i + 1 << ',' << curve.cumulative[i];
        if (band) {
            if (i < curve.lower.size())
                os << ',' << curve.lower[i] << ',' << curve.upper[i];
            else
                os << ",,";
        }
        os << '\n';
    }
}

}  // namespace jamdet
