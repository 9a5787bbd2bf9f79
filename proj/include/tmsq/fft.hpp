#pragma once

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <mutex>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

namespace tmsq {

// Thin FFTW wrappers. Plans are created once per size under a lock
// (FFTW planning is not thread-safe; executions on distinct buffers are) and
// cached for the process lifetime. FFTW_UNALIGNED lets plans run on plain
// std::vector storage; FFTW_ESTIMATE picks the same algorithm for the same
// size every time, which keeps results bit-identical across runs.
//
// Convention: forward transform X[k] = sum_n x[n] e^{-i 2 pi k n / N};
// the inverse here includes the 1/N factor, so inverse(forward(x)) == x.

namespace detail {

inline std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}

inline fftw_plan acquire_r2c(std::size_t n) {
  static std::unordered_map<std::size_t, fftw_plan> cache;
  std::lock_guard lock(plan_mutex());
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  std::vector<double> in(n);
  std::vector<std::complex<double>> out(n / 2 + 1);
  fftw_plan p = fftw_plan_dft_r2c_1d(
      static_cast<int>(n), in.data(),
      reinterpret_cast<fftw_complex*>(out.data()),
      FFTW_ESTIMATE | FFTW_UNALIGNED);
  if (!p) throw std::runtime_error("fft: r2c planning failed");
  cache.emplace(n, p);
  return p;
}

inline fftw_plan acquire_c2r(std::size_t n) {
  static std::unordered_map<std::size_t, fftw_plan> cache;
  std::lock_guard lock(plan_mutex());
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  std::vector<std::complex<double>> in(n / 2 + 1);
  std::vector<double> out(n);
  fftw_plan p = fftw_plan_dft_c2r_1d(
      static_cast<int>(n), reinterpret_cast<fftw_complex*>(in.data()),
      out.data(), FFTW_ESTIMATE | FFTW_UNALIGNED);
  if (!p) throw std::runtime_error("fft: c2r planning failed");
  cache.emplace(n, p);
  return p;
}

}  // namespace detail

// Touch the plan cache for size n from a serial context so worker threads
// only ever execute.
inline void fft_prepare(std::size_t n) {
  detail::acquire_r2c(n);
  detail::acquire_c2r(n);
}

inline void fft_r2c(std::span<const double> x,
                    std::vector<std::complex<double>>& out) {
  const std::size_t n = x.size();
  if (n == 0) throw std::invalid_argument("fft: empty input");
  out.resize(n / 2 + 1);
  fftw_plan p = detail::acquire_r2c(n);
  fftw_execute_dft_r2c(p, const_cast<double*>(x.data()),
                       reinterpret_cast<fftw_complex*>(out.data()));
}

inline std::vector<std::complex<double>> fft_r2c(std::span<const double> x) {
  std::vector<std::complex<double>> out;
  fft_r2c(x, out);
  return out;
}

// Inverse real transform of a half spectrum (n/2+1 bins), scaled by 1/n.
// The input is copied internally (FFTW c2r clobbers its input).
inline void fft_c2r(std::span<const std::complex<double>> half, std::size_t n,
                    std::vector<double>& out) {
  if (half.size() != n / 2 + 1)
    throw std::invalid_argument("fft: half spectrum size does not match n");
  std::vector<std::complex<double>> scratch(half.begin(), half.end());
  out.resize(n);
  fftw_plan p = detail::acquire_c2r(n);
  fftw_execute_dft_c2r(p, reinterpret_cast<fftw_complex*>(scratch.data()),
                       out.data());
  const double inv = 1.0 / static_cast<double>(n);
  for (double& v : out) v *= inv;
}

inline std::vector<double> fft_c2r(std::span<const std::complex<double>> half,
                                   std::size_t n) {
  std::vector<double> out;
  fft_c2r(half, n, out);
  return out;
}

}  // namespace tmsq
