#pragma once

// Synthetic complex-baseband capture of a 5G downlink, optionally hit by a
// narrowband jammer sitting on the synchronization (SSB) subcarriers.
//
// Synthesis works per OFDM symbol on a frequency grid whose bin spacing equals
// the subcarrier spacing. Each symbol is one inverse FFT of that grid; symbols
// are concatenated without cyclic prefix.

#include <complex>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <utility>
#include <string>
#include <vector>

namespace jamdet {

struct RadioConfig {
    double observation_bandwidth = 120e6;
    double signal_bandwidth = 100e6;
    double subcarrier_spacing = 30e3;
    std::size_t num_subcarriers = 3333;
    std::size_t ssb_subcarriers = 240;
    /// f_SSB - f_c. Negative means below the carrier.
    double ssb_center_offset = -40.08e6;
    /// Nominal ADC rate attached to frames as metadata.
    double sample_rate = 128e6;
    /// One beacon symbol on the SSB subcarriers every `beacon_period` symbols.
    std::size_t beacon_period = 20;

    /// Throws Error if any invariant is violated.
    void validate() const;

    /// IFFT size: next power of two >= observation_bandwidth / subcarrier_spacing.
    std::size_t grid_size() const;

    /// Signed grid offsets (relative to DC) of the first and one-past-last
    /// occupied subcarrier of the downlink and of the SSB.
    std::pair<long, long> signal_bins() const;
    std::pair<long, long> ssb_bins() const;
};

enum class JammerNoise : std::uint8_t { Gaussian, Uniform };

struct ChannelParams {
    /// Amplitude of h_s (frequency flat).
    double signal_gain = 17.782794100389228;  // 25 dB above the noise floor
    /// Amplitude of the jammer channel gain (frequency flat).
    double jammer_gain = 31.622776601683793;  // 30 dB above the noise floor
    /// Variance of the circular AWGN per time sample.
    double noise_power = 1.0;
    JammerNoise jammer_noise = JammerNoise::Gaussian;

    void validate() const;

    double jammer_gain_db() const;
    void set_jammer_gain_db(double db);
};

/// Amplitude dB to linear: 10^(db / 20).
double gain_db_to_linear(double gain_db);

enum class CaseLabel : std::uint8_t { EmptyChannel = 0, OngoingTransmission = 1, Jammed = 2 };

/// 1 for Jammed, 0 for the two legitimate cases.
constexpr std::uint8_t binary_label(CaseLabel c) { return c == CaseLabel::Jammed ? 1 : 0; }

const char* to_string(CaseLabel c);
CaseLabel case_from_int(int v);

struct IqFrame {
    std::vector<std::complex<double>> samples;
    double sample_rate = 0.0;
    CaseLabel label = CaseLabel::EmptyChannel;
    std::uint64_t seed = 0;
};

/// The three additive terms of the received signal, kept apart so tests can
/// check the composition.
struct FrameComponents {
    std::vector<std::complex<double>> signal;
    std::vector<std::complex<double>> jammer;
    std::vector<std::complex<double>> noise;
};

inline constexpr std::size_t kDefaultFrameLength = 1024 * 100;
inline constexpr std::size_t kMaxFrameLength = std::size_t{1} << 28;

/// Generates the three components. `duty_cycle` is the fraction of symbols
/// carrying full-band data in the OngoingTransmission case; it is validated
/// but unused otherwise. The output length is the smallest whole number of
/// symbols covering `min_length`.
FrameComponents synthesize_components(const RadioConfig& config, const ChannelParams& channel, CaseLabel label,
                                      double duty_cycle, std::uint64_t seed,
                                      std::size_t min_length = kDefaultFrameLength);

/// signal + jammer + noise.
IqFrame generate_frame(const RadioConfig& config, const ChannelParams& channel, CaseLabel label,
                       double duty_cycle, std::uint64_t seed, std::size_t min_length = kDefaultFrameLength);

/// Writes interleaved little-endian float32 I/Q to `path` and a JSON sidecar
/// (`path` + ".json") holding sample_rate, case and seed.
void write_raw_iq(const IqFrame& frame, const std::filesystem::path& path);
IqFrame read_raw_iq(const std::filesystem::path& path);

}  // namespace jamdet
