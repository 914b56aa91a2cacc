#include "fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <vector>

#include "wuw/error.hpp"

namespace wuw::fft {
namespace {

struct Plans {
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;
};

std::mutex& planner_mutex() {
  static std::mutex mu;
  return mu;
}

const Plans& plans_for(std::size_t n) {
  static std::map<std::size_t, Plans> cache;
  std::lock_guard lock(planner_mutex());
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  std::vector<double> re(n);
  std::vector<std::complex<double>> cx(n / 2 + 1);
  auto* cxp = reinterpret_cast<fftw_complex*>(cx.data());
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  Plans p;
  p.forward = fftw_plan_dft_r2c_1d(static_cast<int>(n), re.data(), cxp, flags);
  p.inverse = fftw_plan_dft_c2r_1d(static_cast<int>(n), cxp, re.data(), flags | FFTW_DESTROY_INPUT);
  if (!p.forward || !p.inverse) throw Error(Errc::invalid_argument, "fftw planning failed");
  return cache.emplace(n, p).first->second;
}

}  // namespace

void forward_real(std::span<const double> in, std::span<std::complex<double>> out) {
  const std::size_t n = in.size();
  if (n == 0 || out.size() != n / 2 + 1) throw Error(Errc::shape_mismatch, "fft output size");
  const Plans& p = plans_for(n);
  // r2c never writes its input, the cast only satisfies the C signature.
  fftw_execute_dft_r2c(p.forward, const_cast<double*>(in.data()), reinterpret_cast<fftw_complex*>(out.data()));
}

void inverse_real(std::span<const std::complex<double>> in, std::span<double> out) {
  const std::size_t n = out.size();
  if (n == 0 || in.size() != n / 2 + 1) throw Error(Errc::shape_mismatch, "ifft input size");
  const Plans& p = plans_for(n);
  std::vector<std::complex<double>> scratch(in.begin(), in.end());  // c2r clobbers its input
  fftw_execute_dft_c2r(p.inverse, reinterpret_cast<fftw_complex*>(scratch.data()), out.data());
}

}  // namespace wuw::fft
