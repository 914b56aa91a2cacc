#pragma once

#include <cstddef>
#include <span>

#include "wuw/exec.hpp"

// Data-parallel inner loops shared by the modules. Every kernel has a serial
// reference path selected by Exec::serial; the OpenMP path splits only over
// independent outputs, so the two agree bit for bit.
namespace wuw::kernels {

// y[r] = b[r] + sum_c W[r, c] * x[c], W row-major (rows x cols), summed in
// double.
// b may be empty (treated as zero).
void matvec(std::span<const float> w, std::span<const float> x, std::span<const float> b,
            std::span<float> y, Exec exec = Exec::parallel);

// Double operands, for training-side math.
void matvec(std::span<const double> w, std::span<const double> x, std::span<const double> b,
            std::span<double> y, Exec exec = Exec::parallel);

// Direct linear convolution truncated to y.size() outputs:
// y[n] = sum_k h[k] * x[n - k].
void conv_direct(std::span<const float> x, std::span<const float> h, std::span<float> y,
                 Exec exec = Exec::parallel);

// Minimum output count before a kernel bothers forking threads.
inline constexpr std::size_t kParallelGrain = 64;

}  // namespace wuw::kernels
