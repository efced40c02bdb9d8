#include "jamdet/sigsim.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include <json.hpp>

#include "jamdet/common.hpp"
#include "jamdet/fft.hpp"

namespace jamdet {

namespace {

using cplx = std::complex<double>;

enum Stream : std::uint64_t { kOffsets = 0, kData = 1, kJammer = 2, kNoise = 3 };

bool finite_nonneg(double v) { return std::isfinite(v) && v >= 0.0; }

std::size_t wrap_bin(long k, std::size_t n) {
    auto nn = static_cast<long>(n);
    return static_cast<std::size_t>(((k % nn) + nn) % nn);
}

cplx qpsk(std::mt19937_64& rng) {
    constexpr double a = 0.70710678118654752440;
    auto bits = rng();
    return {(bits & 1u) ? a : -a, (bits & 2u) ? a : -a};
}

// Bresenham-style occupancy: exactly floor(duty * s) active symbols among the first s.
bool tdd_active(std::size_t symbol, std::size_t offset, double duty) {
    auto s = static_cast<double>(symbol + offset);
    return std::floor((s + 1.0) * duty) > std::floor(s * duty);
}

}  // namespace

void RadioConfig::validate() const {
    auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
    if (!positive(observation_bandwidth) || !positive(signal_bandwidth) || !positive(subcarrier_spacing) ||
        !positive(sample_rate))
        throw Error("radio config: bandwidths, spacing and sample rate must be positive");
    if (num_subcarriers == 0 || ssb_subcarriers == 0) throw Error("radio config: subcarrier counts must be nonzero");
    if (static_cast<double>(num_subcarriers) * subcarrier_spacing > signal_bandwidth * (1.0 + 1e-12))
        throw Error("radio config: num_subcarriers * subcarrier_spacing exceeds signal_bandwidth");
    if (signal_bandwidth > observation_bandwidth) throw Error("radio config: signal_bandwidth exceeds observation_bandwidth");
    if (ssb_subcarriers >= num_subcarriers) throw Error("radio config: ssb_subcarriers must be below num_subcarriers");
    if (!std::isfinite(ssb_center_offset) ||
        std::abs(ssb_center_offset) + static_cast<double>(ssb_subcarriers) * subcarrier_spacing / 2.0 >
            observation_bandwidth / 2.0 * (1.0 + 1e-12))
        throw Error("radio config: SSB band leaves the observation bandwidth");
    if (beacon_period == 0) throw Error("radio config: beacon_period must be >= 1");
    if (observation_bandwidth / subcarrier_spacing > static_cast<double>(std::size_t{1} << 24))
        throw Error("radio config: synthesis grid too large");
}

std::size_t RadioConfig::grid_size() const {
    return fft::next_power_of_two(static_cast<std::size_t>(std::ceil(observation_bandwidth / subcarrier_spacing - 1e-9)));
}

std::pair<long, long> RadioConfig::signal_bins() const {
    auto half = static_cast<long>(num_subcarriers / 2);
    return {-half, -half + static_cast<long>(num_subcarriers)};
}

std::pair<long, long> RadioConfig::ssb_bins() const {
    auto center = std::lround(ssb_center_offset / subcarrier_spacing);
    auto half = static_cast<long>(ssb_subcarriers / 2);
    return {center - half, center - half + static_cast<long>(ssb_subcarriers)};
}

void ChannelParams::validate() const {
    if (!finite_nonneg(signal_gain) || !finite_nonneg(jammer_gain)) throw Error("channel: gains must be finite and >= 0");
    if (!std::isfinite(noise_power) || noise_power <= 0.0) throw Error("channel: noise_power must be > 0");
}

double ChannelParams::jammer_gain_db() const { return 20.0 * std::log10(jammer_gain); }

void ChannelParams::set_jammer_gain_db(double db) { jammer_gain = gain_db_to_linear(db); }

double gain_db_to_linear(double gain_db) { return std::pow(10.0, gain_db / 20.0); }

const char* to_string(CaseLabel c) {
    switch (c) {
        case CaseLabel::EmptyChannel: return "EmptyChannel";
        case CaseLabel::OngoingTransmission: return "OngoingTransmission";
        case CaseLabel::Jammed: return "Jammed";
    }
    return "?";
}

CaseLabel case_from_int(int v) {
    if (v < 0 || v > 2) throw Error("invalid case id " + std::to_string(v));
    return static_cast<CaseLabel>(v);
}

FrameComponents synthesize_components(const RadioConfig& config, const ChannelParams& channel, CaseLabel label,
                                      double duty_cycle, std::uint64_t seed, std::size_t min_length) {
    config.validate();
    channel.validate();
    if (!(duty_cycle >= 0.0 && duty_cycle <= 1.0)) throw Error("duty_cycle must lie in [0, 1]");
    if (min_length == 0 || min_length > kMaxFrameLength) throw Error("requested frame length out of range");

    const std::size_t n_fft = config.grid_size();
    const std::size_t n_sym = (min_length + n_fft - 1) / n_fft;
    const std::size_t len = n_sym * n_fft;
    const double scale = 1.0 / std::sqrt(static_cast<double>(n_fft));

    std::mt19937_64 offsets_rng(derive_seed(seed, {kOffsets}));
    std::mt19937_64 data_rng(derive_seed(seed, {kData}));
    std::mt19937_64 jam_rng(derive_seed(seed, {kJammer}));
    std::mt19937_64 noise_rng(derive_seed(seed, {kNoise}));

    const std::size_t beacon_offset = offsets_rng() % config.beacon_period;
    const std::size_t tdd_offset = offsets_rng() % 1000;

    const auto [sig_lo, sig_hi] = config.signal_bins();
    const auto [ssb_lo, ssb_hi] = config.ssb_bins();

    FrameComponents out;
    out.signal.assign(len, cplx{});
    out.jammer.assign(len, cplx{});
    out.noise.resize(len);

    std::vector<cplx> grid(n_fft);
    std::vector<cplx> time(n_fft);

    std::normal_distribution<double> gauss(0.0, std::sqrt(0.5));
    std::uniform_real_distribution<double> unif(-std::sqrt(1.5), std::sqrt(1.5));

    for (std::size_t s = 0; s < n_sym; ++s) {
        const bool beacon = (s + beacon_offset) % config.beacon_period == 0;
        const bool data = label == CaseLabel::OngoingTransmission && tdd_active(s, tdd_offset, duty_cycle);

        if (beacon || data) {
            std::fill(grid.begin(), grid.end(), cplx{});
            if (data) {
                for (long k = sig_lo; k < sig_hi; ++k) grid[wrap_bin(k, n_fft)] = channel.signal_gain * qpsk(data_rng);
            }
            if (beacon) {
                for (long k = ssb_lo; k < ssb_hi; ++k) grid[wrap_bin(k, n_fft)] = channel.signal_gain * qpsk(data_rng);
            }
            fft::inverse(grid, time);
            for (std::size_t t = 0; t < n_fft; ++t) out.signal[s * n_fft + t] = time[t] * scale;
        }

        if (label == CaseLabel::Jammed) {
            std::fill(grid.begin(), grid.end(), cplx{});
            for (long k = ssb_lo; k < ssb_hi; ++k) {
                cplx v = channel.jammer_noise == JammerNoise::Gaussian ? cplx{gauss(jam_rng), gauss(jam_rng)}
                                                                         : cplx{unif(jam_rng), unif(jam_rng)};
                grid[wrap_bin(k, n_fft)] = channel.jammer_gain * v;
            }
            fft::inverse(grid, time);
            for (std::size_t t = 0; t < n_fft; ++t) out.jammer[s * n_fft + t] = time[t] * scale;
        }
    }

    const double sigma = std::sqrt(channel.noise_power / 2.0);
    std::normal_distribution<double> awgn(0.0, sigma);
    for (auto& w : out.noise) w = {awgn(noise_rng), awgn(noise_rng)};
    return out;
}

IqFrame generate_frame(const RadioConfig& config, const ChannelParams& channel, CaseLabel label, double duty_cycle,
                       std::uint64_t seed, std::size_t min_length) {
    auto parts = synthesize_components(config, channel, label, duty_cycle, seed, min_length);
    IqFrame frame;
    frame.sample_rate = config.sample_rate;
    frame.label = label;
    frame.seed = seed;
    frame.samples = std::move(parts.signal);
    for (std::size_t i = 0; i < frame.samples.size(); ++i) frame.samples[i] = frame.samples[i] + parts.jammer[i] + parts.noise[i];
    return frame;
}

void write_raw_iq(const IqFrame& frame, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot open " + path.string() + " for writing");
    for (const auto& v : frame.samples) {
        binio::write_pod(os, static_cast<float>(v.real()));
        binio::write_pod(os, static_cast<float>(v.imag()));
    }
    nlohmann::json side = {
        {"format", "cf32_le"},
        {"sample_rate", frame.sample_rate},
        {"case", to_string(frame.label)},
        {"case_id", static_cast<int>(frame.label)},
        {"label", binary_label(frame.label)},
        {"seed", frame.seed},
        {"num_samples", frame.samples.size()},
    };
    std::ofstream js(path.string() + ".json");
    if (!js) throw Error("cannot write sidecar for " + path.string());
    js << side.dump(2) << '\n';
}

IqFrame read_raw_iq(const std::filesystem::path& path) {
    std::ifstream js(path.string() + ".json");
    if (!js) throw Error("missing sidecar " + path.string() + ".json");
    auto side = nlohmann::json::parse(js);
    IqFrame frame;
    frame.sample_rate = side.at("sample_rate").get<double>();
    frame.label = case_from_int(side.at("case_id").get<int>());
    frame.seed = side.at("seed").get<std::uint64_t>();
    auto n = side.at("num_samples").get<std::size_t>();
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot open " + path.string());
    frame.samples.resize(n);
    for (auto& v : frame.samples) {
        float re = binio::read_pod<float>(is);
        float im = binio::read_pod<float>(is);
        v = {re, im};
    }
    return frame;
}

}  // namespace jamdet
