#pragma once

// Independent reference computations used only by tests. None of these call
// into the library code paths they check.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <numbers>
#include <span>
#include <vector>

#include <boost/multiprecision/cpp_dec_float.hpp>

namespace oracle {

// O(N^2) DFT power of the zero-padded frame, first n/2+1 bins.
inline std::vector<double> naive_power(std::span<const float> frame, std::size_t n) {
  std::vector<double> out(n / 2 + 1);
  for (std::size_t k = 0; k <= n / 2; ++k) {
    long double re = 0, im = 0;
    for (std::size_t t = 0; t < frame.size(); ++t) {
      const long double ang = -2.0L * std::numbers::pi_v<long double> * static_cast<long double>(k * t % n) / n;
      re += frame[t] * std::cos(ang);
      im += frame[t] * std::sin(ang);
    }
    out[k] = static_cast<double>(re * re + im * im);
  }
  return out;
}

// Direct O(N K) convolution truncated to x.size(), in long double.
inline std::vector<double> direct_conv(std::span<const float> x, std::span<const float> h) {
  std::vector<double> y(x.size());
  for (std::size_t n = 0; n < x.size(); ++n) {
    long double acc = 0;
    for (std::size_t k = 0; k < h.size() && k <= n; ++k) acc += static_cast<long double>(h[k]) * x[n - k];
    y[n] = static_cast<double>(acc);
  }
  return y;
}

inline std::vector<double> peak_normalized(std::vector<double> v) {
  double peak = 0;
  for (double s : v) peak = std::max(peak, std::fabs(s));
  if (peak > 0)
    for (double& s : v) s /= peak;
  return v;
}

// y = W x + b, plain double loops.
inline std::vector<double> matvec(const std::vector<double>& w, const std::vector<double>& x,
                                  const std::vector<double>& b) {
  std::vector<double> y(b);
  for (std::size_t r = 0; r < b.size(); ++r)
    for (std::size_t c = 0; c < x.size(); ++c) y[r] += w[r * x.size() + c] * x[c];
  return y;
}

// Element-by-element GRU step with the gates written out separately.
// Weights are the stacked (r, z, n) layout: w_ih (3H x I), w_hh (3H x H).
inline std::vector<double> gru_step(const std::vector<float>& x, const std::vector<float>& h,
                                    const std::vector<float>& w_ih, const std::vector<float>& w_hh,
                                    const std::vector<float>& b_ih, const std::vector<float>& b_hh) {
  const std::size_t H = h.size(), I = x.size();
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  std::vector<double> out(H);
  for (std::size_t j = 0; j < H; ++j) {
    double xr = b_ih[j], xz = b_ih[H + j], xn = b_ih[2 * H + j];
    double hr = b_hh[j], hz = b_hh[H + j], hn = b_hh[2 * H + j];
    for (std::size_t i = 0; i < I; ++i) {
      xr += w_ih[j * I + i] * x[i];
      xz += w_ih[(H + j) * I + i] * x[i];
      xn += w_ih[(2 * H + j) * I + i] * x[i];
    }
    for (std::size_t i = 0; i < H; ++i) {
      hr += w_hh[j * H + i] * h[i];
      hz += w_hh[(H + j) * H + i] * h[i];
      hn += w_hh[(2 * H + j) * H + i] * h[i];
    }
    const double r = sig(xr + hr), z = sig(xz + hz);
    const double n = std::tanh(xn + r * hn);
    out[j] = (1 - z) * n + z * h[j];
  }
  return out;
}

// Central differences of f at p with step delta.
inline std::vector<double> finite_diff(const std::function<double(std::span<const double>)>& f,
                                       std::vector<double> p, double delta = 1e-4) {
  std::vector<double> g(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double keep = p[i];
    p[i] = keep + delta;
    const double up = f(p);
    p[i] = keep - delta;
    const double down = f(p);
    p[i] = keep;
    g[i] = (up - down) / (2 * delta);
  }
  return g;
}

// ||a - b||_2 / max(||a||_2, ||b||_2, tiny)
inline double rel_error(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(d) / std::max({std::sqrt(na), std::sqrt(nb), 1e-12});
}

// Kolmogorov-Smirnov statistic of samples against U(lo, hi).
inline double ks_uniform(std::vector<double> xs, double lo, double hi) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double cdf = (xs[i] - lo) / (hi - lo);
    d = std::max({d, (i + 1) / n - cdf, cdf - i / n});
  }
  return d;
}

// Mel grid FFT-bin indices computed in 50-digit decimal arithmetic.
inline std::vector<std::size_t> mel_grid_bins_mp(int n_filters, int fft_len, int rate) {
  using mp = boost::multiprecision::cpp_dec_float_50;
  const mp nyq = mp(rate) / 2;
  const mp mel_hi = mp(1127) * boost::multiprecision::log(1 + nyq / 700);
  std::vector<std::size_t> bins;
  for (int i = 0; i < n_filters + 2; ++i) {
    const mp mel = mel_hi * i / (n_filters + 1);
    const mp hz = mp(700) * (boost::multiprecision::exp(mel / 1127) - 1);
    bins.push_back(static_cast<std::size_t>(boost::multiprecision::floor(hz * fft_len / rate)));
  }
  bins.back() = std::min<std::size_t>(bins.back(), static_cast<std::size_t>(fft_len / 2));
  return bins;
}

// Macro-F1 of sign(score) predictions against labels (+1 = positive).
inline double macro_f1(const std::vector<double>& scores, const std::vector<int>& labels) {
  double tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= 0, pos = labels[i] == 1;
    if (pred && pos) ++tp;
    else if (pred) ++fp;
    else if (pos) ++fn;
    else ++tn;
  }
  auto f = [](double a, double b, double c) { return 2 * a + b + c == 0 ? 0.0 : 2 * a / (2 * a + b + c); };
  return 0.5 * (f(tp, fp, fn) + f(tn, fn, fp));
}

}  // namespace oracle
