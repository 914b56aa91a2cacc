#include "wuw/kernels.hpp"

#include <algorithm>

#include "wuw/error.hpp"

namespace wuw::kernels {
namespace {

// Float operands are summed in double and rounded once at the end.
template <class T>
inline double dot_row(const T* w, const T* x, std::size_t n) {
  double acc = 0;
  for (std::size_t c = 0; c < n; ++c) acc += static_cast<double>(w[c]) * static_cast<double>(x[c]);
  return acc;
}

template <class T>
void matvec_impl(std::span<const T> w, std::span<const T> x, std::span<const T> b, std::span<T> y, Exec exec) {
  const std::size_t rows = y.size();
  const std::size_t cols = x.size();
  if (w.size() != rows * cols || (!b.empty() && b.size() != rows))
    throw Error(Errc::shape_mismatch, "matvec operands disagree");
  const T* wp = w.data();
  const T* xp = x.data();
  const bool parallel = exec == Exec::parallel && rows * cols >= kParallelGrain * kParallelGrain;
#pragma omp parallel for schedule(static) if (parallel)
  for (std::size_t r = 0; r < rows; ++r) {
    const double bias = b.empty() ? 0.0 : static_cast<double>(b[r]);
    y[r] = static_cast<T>(bias + dot_row(wp + r * cols, xp, cols));
  }
}

}  // namespace

void matvec(std::span<const float> w, std::span<const float> x, std::span<const float> b, std::span<float> y,
            Exec exec) {
  matvec_impl(w, x, b, y, exec);
}

void matvec(std::span<const double> w, std::span<const double> x, std::span<const double> b,
            std::span<double> y, Exec exec) {
  matvec_impl(w, x, b, y, exec);
}

void conv_direct(std::span<const float> x, std::span<const float> h, std::span<float> y, Exec exec) {
  const std::size_t n_out = y.size();
  const std::size_t nx = x.size();
  const std::size_t nh = h.size();
  const bool parallel = exec == Exec::parallel && n_out >= kParallelGrain;
#pragma omp parallel for schedule(static) if (parallel)
  for (std::size_t n = 0; n < n_out; ++n) {
    double acc = 0.0;
    const std::size_t k_end = std::min(nh, n + 1);
    for (std::size_t k = 0; k < k_end; ++k) {
      const std::size_t i = n - k;
      if (i < nx) acc += static_cast<double>(h[k]) * x[i];
    }
    y[n] = static_cast<float>(acc);
  }
}

}  // namespace wuw::kernels
