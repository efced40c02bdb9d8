#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <initializer_list>
#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace jamdet {

static_assert(std::endian::native == std::endian::little,
              "binary containers are written in host order and assume a little-endian host");

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// splitmix64 finalizer. Used for all seed derivation so serial and parallel
/// generators agree on per-item seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Chains splitmix64 over a list of salts: derive(s, a, b) = sm(sm(sm(s) + a) + b).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> salts) {
    std::uint64_t h = splitmix64(seed);
    for (auto s : salts) h = splitmix64(h + s);
    return h;
}

namespace binio {

template <typename T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw Error("unexpected end of binary stream");
    return v;
}

inline void write_magic(std::ostream& os, std::string_view magic) {
    os.write(magic.data(), static_cast<std::streamsize>(magic.size()));
}

inline void expect_magic(std::istream& is, std::string_view magic) {
    std::string got(magic.size(), '\0');
    is.read(got.data(), static_cast<std::streamsize>(got.size()));
    if (!is || got != magic) throw Error("bad magic: expected " + std::string(magic));
}

inline void write_f32(std::ostream& os, std::span<const float> v) {
    os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size_bytes()));
}

inline void read_f32(std::istream& is, std::span<float> v) {
    is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size_bytes()));
    if (!is) throw Error("unexpected end of binary stream");
}

// Doubles are narrowed to float32 on disk.
template <typename It>
void write_as_f32(std::ostream& os, It first, It last) {
    for (; first != last; ++first) write_pod(os, static_cast<float>(*first));
}

inline std::vector<float> read_f32_vector(std::istream& is, std::size_t n) {
    std::vector<float> v(n);
    read_f32(is, v);
    return v;
}

}  // namespace binio

}  // namespace jamdet
