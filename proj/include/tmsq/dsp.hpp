#pragma once

#include <bit>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "tmsq/fft.hpp"
#include "tmsq/parallel.hpp"

namespace tmsq {

enum class Window { rect, hann };

// One-sided spectra on the grid f_j = j * fs / segment. Values are
// power densities in the units of the input samples squared per Hz.
struct Spectrum {
  std::vector<double> frequency;
  std::vector<double> value;

  std::size_t size() const { return frequency.size(); }
};

struct CrossSpectrum {
  std::vector<double> frequency;
  std::vector<std::complex<double>> value;

  std::size_t size() const { return frequency.size(); }
};

namespace detail {

inline void check_welch_args(std::size_t n, double fs, std::size_t segment,
                             double overlap) {
  if (!(fs > 0.0)) throw std::invalid_argument("psd: fs must be positive");
  if (segment < 16 || !std::has_single_bit(segment))
    throw std::invalid_argument("psd: segment must be a power of two >= 16");
  if (n < segment)
    throw std::invalid_argument("psd: record shorter than one segment");
  if (!(overlap >= 0.0 && overlap < 1.0))
    throw std::invalid_argument("psd: overlap must be in [0, 1)");
}

inline std::vector<double> make_window(Window w, std::size_t segment) {
  std::vector<double> win(segment, 1.0);
  if (w == Window::hann) {
    constexpr double k_two_pi = 2.0 * std::numbers::pi;
    for (std::size_t i = 0; i < segment; ++i)
      win[i] = 0.5 - 0.5 * std::cos(k_two_pi * static_cast<double>(i) /
                                    static_cast<double>(segment));
  }
  return win;
}

// Averaged segment cross-spectrum mean(X_k * conj(Y_k)) with one-sided PSD
// normalization. When x and y alias the same buffer only one FFT runs per
// segment. Segments are reduced in fixed chunk order so the result does not
// depend on the worker count.
inline CrossSpectrum welch_complex(std::span<const double> x, std::span<const double> y,
                                   double fs, std::size_t segment, Window w,
                                   double overlap) {
  check_welch_args(x.size(), fs, segment, overlap);
  if (x.size() != y.size())
    throw std::invalid_argument("psd: records differ in length");
  const bool same = x.data() == y.data();

  const std::vector<double> win = make_window(w, segment);
  double wsum2 = 0.0;
  for (double v : win) wsum2 += v * v;

  const auto hop = static_cast<std::size_t>(
      std::llround(static_cast<double>(segment) * (1.0 - overlap)));
  const std::size_t step = hop == 0 ? 1 : hop;
  const std::size_t nseg = (x.size() - segment) / step + 1;
  const std::size_t nbins = segment / 2 + 1;

  fft_prepare(segment);

  constexpr std::size_t k_chunk = 64;
  const std::size_t nchunks = (nseg + k_chunk - 1) / k_chunk;
  std::vector<std::vector<std::complex<double>>> partial(nchunks);

  parallel_chunks(nseg, k_chunk, [&](std::size_t chunk, std::size_t b, std::size_t e) {
    std::vector<std::complex<double>> acc(nbins, {0.0, 0.0});
    std::vector<double> bufx(segment), bufy;
    std::vector<std::complex<double>> fx, fy;
    for (std::size_t s = b; s < e; ++s) {
      const std::size_t off = s * step;
      for (std::size_t i = 0; i < segment; ++i) bufx[i] = x[off + i] * win[i];
      fft_r2c(bufx, fx);
      if (same) {
        for (std::size_t k = 0; k < nbins; ++k) acc[k] += fx[k] * std::conj(fx[k]);
      } else {
        bufy.resize(segment);
        for (std::size_t i = 0; i < segment; ++i) bufy[i] = y[off + i] * win[i];
        fft_r2c(bufy, fy);
        for (std::size_t k = 0; k < nbins; ++k) acc[k] += fx[k] * std::conj(fy[k]);
      }
    }
    partial[chunk] = std::move(acc);
  });

  CrossSpectrum out;
  out.frequency.resize(nbins);
  out.value.assign(nbins, {0.0, 0.0});
  for (std::size_t c = 0; c < nchunks; ++c)
    for (std::size_t k = 0; k < nbins; ++k) out.value[k] += partial[c][k];

  const double norm = 2.0 / (fs * wsum2 * static_cast<double>(nseg));
  for (std::size_t k = 0; k < nbins; ++k) {
    out.frequency[k] = static_cast<double>(k) * fs / static_cast<double>(segment);
    out.value[k] *= norm;
  }
  out.value[0] *= 0.5;
  out.value[nbins - 1] *= 0.5;
  return out;
}

}  // namespace detail

inline Spectrum psd_welch(std::span<const double> x, double fs, std::size_t segment,
                          Window w = Window::rect, double overlap = 0.0) {
  const CrossSpectrum cs = detail::welch_complex(x, x, fs, segment, w, overlap);
  Spectrum out;
  out.frequency = cs.frequency;
  out.value.resize(cs.value.size());
  for (std::size_t k = 0; k < cs.value.size(); ++k) out.value[k] = cs.value[k].real();
  return out;
}

inline CrossSpectrum cross_psd(std::span<const double> x, std::span<const double> y,
                               double fs, std::size_t segment,
                               Window w = Window::rect, double overlap = 0.0) {
  return detail::welch_complex(x, y, fs, segment, w, overlap);
}

// PSD from the averaged biased autocorrelation of non-overlapping segments.
// Each segment is zero-padded to 2L so the circular autocorrelation equals
// the linear one; the transform of the averaged autocorrelation, sampled at
// even bins, lands on the same grid as rect-window Welch and matches it to
// FFT rounding.
inline Spectrum psd_autocorr(std::span<const double> x, double fs, std::size_t segment) {
  detail::check_welch_args(x.size(), fs, segment, 0.0);
  const std::size_t L = segment;
  const std::size_t n2 = 2 * L;
  const std::size_t nseg = x.size() / L;
  fft_prepare(n2);

  constexpr std::size_t k_chunk = 64;
  const std::size_t nchunks = (nseg + k_chunk - 1) / k_chunk;
  std::vector<std::vector<double>> partial(nchunks);

  parallel_chunks(nseg, k_chunk, [&](std::size_t chunk, std::size_t b, std::size_t e) {
    std::vector<double> acc(n2, 0.0), buf(n2, 0.0), lag;
    std::vector<std::complex<double>> spec, power(n2 / 2 + 1);
    for (std::size_t s = b; s < e; ++s) {
      const std::size_t off = s * L;
      for (std::size_t i = 0; i < L; ++i) buf[i] = x[off + i];
      for (std::size_t i = L; i < n2; ++i) buf[i] = 0.0;
      fft_r2c(buf, spec);
      for (std::size_t k = 0; k < power.size(); ++k)
        power[k] = {std::norm(spec[k]), 0.0};
      fft_c2r(power, n2, lag);
      for (std::size_t i = 0; i < n2; ++i) acc[i] += lag[i];
    }
    partial[chunk] = std::move(acc);
  });

  std::vector<double> acbar(n2, 0.0);
  for (std::size_t c = 0; c < nchunks; ++c)
    for (std::size_t i = 0; i < n2; ++i) acbar[i] += partial[c][i];
  const double scale = 1.0 / (static_cast<double>(nseg) * static_cast<double>(L));
  for (double& v : acbar) v *= scale;

  std::vector<std::complex<double>> full = fft_r2c(acbar);

  const std::size_t nbins = L / 2 + 1;
  Spectrum out;
  out.frequency.resize(nbins);
  out.value.resize(nbins);
  for (std::size_t j = 0; j < nbins; ++j) {
    out.frequency[j] = static_cast<double>(j) * fs / static_cast<double>(L);
    out.value[j] = full[2 * j].real() * 2.0 / fs;
  }
  out.value[0] *= 0.5;
  out.value[nbins - 1] *= 0.5;
  return out;
}

// Circularly delays x by tau seconds (positive tau shifts content later in
// time) via a frequency-domain phase ramp. The Nyquist bin takes the real
// projection of its ramp so the output stays real.
inline void apply_delay(std::vector<double>& x, double fs, double tau) {
  const std::size_t n = x.size();
  if (n == 0 || n % 2 != 0)
    throw std::invalid_argument("delay: record length must be even and nonzero");
  if (!(fs > 0.0)) throw std::invalid_argument("delay: fs must be positive");
  if (!(std::isfinite(tau)) || std::abs(tau) > static_cast<double>(n) / fs)
    throw std::invalid_argument("delay: |tau| exceeds the record duration");
  if (tau == 0.0) return;

  constexpr double k_two_pi = 2.0 * std::numbers::pi;
  const double df = fs / static_cast<double>(n);
  std::vector<std::complex<double>> half = fft_r2c(x);
  for (std::size_t k = 1; k < n / 2; ++k) {
    const double phase = -k_two_pi * df * static_cast<double>(k) * tau;
    half[k] *= std::complex<double>(std::cos(phase), std::sin(phase));
  }
  half[n / 2] *= std::cos(k_two_pi * (fs / 2.0) * tau);
  fft_c2r(half, n, x);
}

// Ideal (non-causal) band selection: zeroes every FFT bin outside
// [f_lo, f_hi]. Band edges get a tiny guard so edges that land exactly on a
// bin keep that bin. Returns the effective noise bandwidth of the kept band
// (df per interior bin, df/2 for DC and Nyquist). Idempotent.
inline double bandpass_square(std::vector<double>& x, double fs, double f_lo,
                              double f_hi) {
  const std::size_t n = x.size();
  if (n == 0 || n % 2 != 0)
    throw std::invalid_argument("bandpass: record length must be even and nonzero");
  if (!(fs > 0.0)) throw std::invalid_argument("bandpass: fs must be positive");
  if (!(f_lo >= 0.0) || !(f_hi >= f_lo))
    throw std::invalid_argument("bandpass: need 0 <= f_lo <= f_hi");
  const double df = fs / static_cast<double>(n);
  const double eps = df * 1e-9;
  if (f_hi > fs / 2.0 + eps)
    throw std::invalid_argument("bandpass: band extends beyond the Nyquist frequency");

  std::vector<std::complex<double>> half = fft_r2c(x);
  double weff = 0.0;
  for (std::size_t k = 0; k <= n / 2; ++k) {
    const double f = df * static_cast<double>(k);
    if (f >= f_lo - eps && f <= f_hi + eps)
      weff += (k == 0 || k == n / 2) ? df / 2.0 : df;
    else
      half[k] = {0.0, 0.0};
  }
  fft_c2r(half, n, x);
  return weff;
}

struct BinCovariance {
  double value = 0.0;      // sample covariance of the two series
  double std_error = 0.0;  // leave-one-block-out jackknife
  double bandwidth = 0.0;  // effective noise bandwidth of the x-channel bin
};

// Covariance with a jackknife standard error over contiguous blocks.
// Inputs are used as-is (no filtering); means are subtracted.
inline BinCovariance covariance_jackknife(std::span<const double> x,
                                          std::span<const double> y,
                                          std::size_t blocks = 32) {
  const std::size_t n = x.size();
  if (n == 0 || y.size() != n)
    throw std::invalid_argument("covariance: records must be nonempty and equal length");
  if (blocks < 2) throw std::invalid_argument("covariance: need at least 2 blocks");
  if (blocks > n) blocks = n;

  std::vector<double> sx(blocks, 0.0), sy(blocks, 0.0), sxy(blocks, 0.0);
  std::vector<std::size_t> count(blocks, 0);
  for (std::size_t j = 0; j < blocks; ++j) {
    const std::size_t b = j * n / blocks;
    const std::size_t e = (j + 1) * n / blocks;
    double ax = 0.0, ay = 0.0, axy = 0.0;
    for (std::size_t i = b; i < e; ++i) {
      ax += x[i];
      ay += y[i];
      axy += x[i] * y[i];
    }
    sx[j] = ax;
    sy[j] = ay;
    sxy[j] = axy;
    count[j] = e - b;
  }
  double tx = 0.0, ty = 0.0, txy = 0.0;
  for (std::size_t j = 0; j < blocks; ++j) {
    tx += sx[j];
    ty += sy[j];
    txy += sxy[j];
  }
  const double nd = static_cast<double>(n);
  const double cov = txy / nd - (tx / nd) * (ty / nd);

  std::vector<double> theta(blocks);
  double tbar = 0.0;
  for (std::size_t j = 0; j < blocks; ++j) {
    const double m = nd - static_cast<double>(count[j]);
    const double mx = (tx - sx[j]) / m;
    const double my = (ty - sy[j]) / m;
    theta[j] = (txy - sxy[j]) / m - mx * my;
    tbar += theta[j];
  }
  tbar /= static_cast<double>(blocks);
  double ss = 0.0;
  for (double t : theta) ss += (t - tbar) * (t - tbar);
  const double bd = static_cast<double>(blocks);
  BinCovariance out;
  out.value = cov;
  out.std_error = std::sqrt((bd - 1.0) / bd * ss);
  return out;
}

// Covariance of two channels restricted to (possibly different) frequency
// bins of equal width. The bandwidth reported is that of the x-channel bin.
inline BinCovariance bin_covariance(std::span<const double> x, std::span<const double> y,
                                    double fs, double f_center_x, double f_center_y,
                                    double width, std::size_t blocks = 32) {
  if (!(width > 0.0)) throw std::invalid_argument("covariance: width must be positive");
  std::vector<double> cx(x.begin(), x.end());
  std::vector<double> cy(y.begin(), y.end());
  const double wx = bandpass_square(cx, fs, f_center_x - width / 2.0, f_center_x + width / 2.0);
  bandpass_square(cy, fs, f_center_y - width / 2.0, f_center_y + width / 2.0);
  BinCovariance out = covariance_jackknife(cx, cy, blocks);
  out.bandwidth = wx;
  return out;
}

}  // namespace tmsq
