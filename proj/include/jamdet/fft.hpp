#pragma once

#include <complex>
#include <cstddef>
#include <span>

namespace jamdet::fft {

using cplx = std::complex<double>;

// Unnormalized forward DFT: X[k] = sum_t x[t] e^{-2 pi i k t / n}.
void forward(std::span<const cplx> in, std::span<cplx> out);

// Unnormalized inverse DFT: x[t] = sum_k X[k] e^{+2 pi i k t / n}.
void inverse(std::span<const cplx> in, std::span<cplx> out);

constexpr bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

constexpr std::size_t next_power_of_two(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

}  // namespace jamdet::fft
