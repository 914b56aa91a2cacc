#pragma once

#include <complex>
#include <cstddef>
#include <span>

// Thin FFTW wrapper. Plans are created once per length under a global lock
// (the FFTW planner is not thread-safe) and executed on caller-owned arrays.
namespace wuw::fft {

// n real inputs -> n/2 + 1 complex outputs.
void forward_real(std::span<const double> in, std::span<std::complex<double>> out);

// n/2 + 1 complex inputs -> n real outputs, unnormalized (scaled by n).
void inverse_real(std::span<const std::complex<double>> in, std::span<double> out);

}  // namespace wuw::fft
