#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "tmsq/dsp.hpp"
#include "tmsq/fft.hpp"
#include "tmsq/trace.hpp"

namespace tmsq {

enum class CombineMode { difference, sum };

struct SpectrumOptions {
  CombineMode mode = CombineMode::difference;
  double t_extra = 0.0;  // extra delay applied to the conjugate arm
  std::size_t segment = 1024;
  Window window = Window::rect;
  double overlap = 0.0;
  bool subtract_dark = false;
};

// Ratio in dB, floored at -60 dB. The caller guarantees den > 0.
inline double ratio_db(double num, double den) {
  const double r = num / den;
  return 10.0 * std::log10(r > 1e-6 ? r : 1e-6);
}

inline std::vector<double> combine_channels(std::span<const double> a,
                                            std::span<const double> b,
                                            CombineMode mode) {
  if (a.size() != b.size())
    throw std::invalid_argument("combine: channels differ in length");
  constexpr double inv_sqrt2 = std::numbers::sqrt2 / 2.0;
  std::vector<double> out(a.size());
  if (mode == CombineMode::difference)
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = (a[i] - b[i]) * inv_sqrt2;
  else
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = (a[i] + b[i]) * inv_sqrt2;
  return out;
}

// Indices of grid frequencies inside [f_lo, f_hi]; edges that land exactly
// on a bin are kept.
inline std::vector<std::size_t> band_bins(std::span<const double> freq, double f_lo,
                                          double f_hi) {
  if (!(f_lo >= 0.0) || !(f_hi >= f_lo))
    throw std::invalid_argument("band: need 0 <= f_lo <= f_hi");
  const double eps = freq.size() > 1 ? (freq[1] - freq[0]) * 1e-9 : 0.0;
  std::vector<std::size_t> idx;
  for (std::size_t j = 0; j < freq.size(); ++j)
    if (freq[j] >= f_lo - eps && freq[j] <= f_hi + eps) idx.push_back(j);
  return idx;
}

namespace detail {

inline void require_vacuum(const TraceSet& ts) {
  if (!ts.has_vacuum())
    throw std::invalid_argument("analysis: vacuum reference channels required");
}

}  // namespace detail

struct SqueezingSpectrum {
  std::vector<double> frequency;
  std::vector<double> db;             // NaN where invalid
  std::vector<std::uint8_t> valid;    // 0 where shot (minus dark) <= 0
  std::vector<double> signal_psd;     // Welch averages before subtraction
  std::vector<double> shot_psd;
  std::vector<double> dark_psd;       // empty when no dark channels
};

// Noise spectrum of the combined quadrature relative to the shot level:
// delay the conjugate, combine, estimate the PSD, and do the same to the
// vacuum (and dark) channels so every record sees an identical pipeline.
inline SqueezingSpectrum squeezing_spectrum(const TraceSet& ts,
                                            const SpectrumOptions& opt) {
  validate(ts);
  detail::require_vacuum(ts);
  if (opt.subtract_dark && !ts.has_dark())
    throw std::invalid_argument("spectrum: dark channels required for subtraction");

  const auto run = [&](const std::vector<double>& p, const std::vector<double>& c) {
    std::vector<double> cd = c;
    apply_delay(cd, ts.fs, opt.t_extra);
    const std::vector<double> comb = combine_channels(p, cd, opt.mode);
    return psd_welch(comb, ts.fs, opt.segment, opt.window, opt.overlap);
  };

  Spectrum sig = run(ts.probe, ts.conjugate);
  Spectrum shot = run(ts.vacuum_probe, ts.vacuum_conjugate);
  Spectrum dark;
  if (ts.has_dark()) dark = run(ts.dark_probe, ts.dark_conjugate);

  SqueezingSpectrum out;
  const std::size_t nb = sig.size();
  out.frequency = std::move(sig.frequency);
  out.db.resize(nb);
  out.valid.resize(nb);
  for (std::size_t j = 0; j < nb; ++j) {
    const double d = opt.subtract_dark ? dark.value[j] : 0.0;
    const double num = sig.value[j] - d;
    const double den = shot.value[j] - d;
    if (den > 0.0) {
      out.valid[j] = 1;
      out.db[j] = ratio_db(num, den);
    } else {
      out.valid[j] = 0;
      out.db[j] = std::numeric_limits<double>::quiet_NaN();
    }
  }
  out.signal_psd = std::move(sig.value);
  out.shot_psd = std::move(shot.value);
  out.dark_psd = std::move(dark.value);
  return out;
}

namespace detail {

// Auto and cross spectra of a channel pair, from which the combined-
// quadrature PSD at any conjugate delay follows algebraically:
//   S_comb(f; tau) = (S_pp + S_cc)/2 -+ Re(S_pc * e^{+i 2 pi f tau}).
// Evaluating delays this way avoids re-filtering and re-averaging the full
// record for every candidate.
struct PairSpectra {
  std::vector<double> frequency;
  std::vector<double> pp, cc;
  std::vector<std::complex<double>> pc;
};

inline PairSpectra pair_spectra(std::span<const double> p, std::span<const double> c,
                                double fs, const SpectrumOptions& opt) {
  PairSpectra out;
  Spectrum a = psd_welch(p, fs, opt.segment, opt.window, opt.overlap);
  Spectrum b = psd_welch(c, fs, opt.segment, opt.window, opt.overlap);
  CrossSpectrum x = cross_psd(p, c, fs, opt.segment, opt.window, opt.overlap);
  out.frequency = std::move(a.frequency);
  out.pp = std::move(a.value);
  out.cc = std::move(b.value);
  out.pc = std::move(x.value);
  return out;
}

inline double combined_bin(const PairSpectra& s, std::size_t j, CombineMode mode,
                           double tau) {
  constexpr double k_two_pi = 2.0 * std::numbers::pi;
  const double ph = k_two_pi * s.frequency[j] * tau;
  const double cross =
      (s.pc[j] * std::complex<double>(std::cos(ph), std::sin(ph))).real();
  const double base = 0.5 * (s.pp[j] + s.cc[j]);
  return mode == CombineMode::difference ? base - cross : base + cross;
}

struct TrioSpectra {
  PairSpectra sig, vac, dark;
  bool use_dark = false;
};

inline TrioSpectra trio_spectra(const TraceSet& ts, const SpectrumOptions& opt) {
  validate(ts);
  require_vacuum(ts);
  if (opt.subtract_dark && !ts.has_dark())
    throw std::invalid_argument("spectrum: dark channels required for subtraction");
  TrioSpectra t;
  t.sig = pair_spectra(ts.probe, ts.conjugate, ts.fs, opt);
  t.vac = pair_spectra(ts.vacuum_probe, ts.vacuum_conjugate, ts.fs, opt);
  if (opt.subtract_dark) {
    t.dark = pair_spectra(ts.dark_probe, ts.dark_conjugate, ts.fs, opt);
    t.use_dark = true;
  }
  return t;
}

// Band-mean level in dB at conjugate delay tau. Bins whose shot reference
// is not positive are skipped.
inline double trio_mean_db(const TrioSpectra& t, const std::vector<std::size_t>& bins,
                           CombineMode mode, double tau) {
  double acc = 0.0;
  std::size_t m = 0;
  for (std::size_t j : bins) {
    double num = combined_bin(t.sig, j, mode, tau);
    double den = combined_bin(t.vac, j, mode, tau);
    if (t.use_dark) {
      const double d = combined_bin(t.dark, j, mode, tau);
      num -= d;
      den -= d;
    }
    if (den <= 0.0) continue;
    acc += ratio_db(num, den);
    ++m;
  }
  if (m == 0) return std::numeric_limits<double>::infinity();
  return acc / static_cast<double>(m);
}

}  // namespace detail

struct DelayScanResult {
  double best_delay = 0.0;  // seconds
  double best_db = 0.0;     // band-mean level at the optimum
  std::vector<double> scan_delay;
  std::vector<double> scan_db;
};

// Finds the conjugate delay that extremizes the band-mean level: a coarse
// grid over [t_min, t_max] followed by a golden-section refinement around
// the best grid point (to 0.05 ns). Minimizes by default; pass maximize
// for branches where the combined quadrature is antisqueezed.
inline DelayScanResult optimize_delay(const TraceSet& ts, double f_lo, double f_hi,
                                      double t_min, double t_max,
                                      const SpectrumOptions& opt,
                                      bool maximize = false) {
  if (!(t_min < t_max))
    throw std::invalid_argument("delayscan: need t_min < t_max");
  const detail::TrioSpectra trio = detail::trio_spectra(ts, opt);
  const std::vector<std::size_t> bins = band_bins(trio.sig.frequency, f_lo, f_hi);
  if (bins.empty()) throw std::invalid_argument("delayscan: band contains no bins");

  const auto mean_db = [&](double tau) {
    return detail::trio_mean_db(trio, bins, opt.mode, tau);
  };
  const double sign = maximize ? -1.0 : 1.0;
  const auto objective = [&](double tau) { return sign * mean_db(tau); };

  constexpr double k_step = 1e-9;
  constexpr double k_tol = 0.05e-9;

  DelayScanResult out;
  const auto npts =
      static_cast<std::size_t>(std::floor((t_max - t_min) / k_step + 1e-9)) + 1;
  out.scan_delay.reserve(npts + 1);
  for (std::size_t i = 0; i < npts; ++i)
    out.scan_delay.push_back(t_min + static_cast<double>(i) * k_step);
  if (out.scan_delay.back() < t_max - k_step * 1e-6) out.scan_delay.push_back(t_max);

  std::size_t best = 0;
  double best_obj = std::numeric_limits<double>::infinity();
  out.scan_db.reserve(out.scan_delay.size());
  for (std::size_t i = 0; i < out.scan_delay.size(); ++i) {
    const double v = mean_db(out.scan_delay[i]);
    out.scan_db.push_back(v);
    const double obj = sign * v;
    if (obj < best_obj) {
      best_obj = obj;
      best = i;
    }
  }

  double a = best > 0 ? out.scan_delay[best - 1] : out.scan_delay[best];
  double b = best + 1 < out.scan_delay.size() ? out.scan_delay[best + 1]
                                              : out.scan_delay[best];
  if (!(a < b)) {
    a = std::max(t_min, out.scan_delay[best] - k_step);
    b = std::min(t_max, out.scan_delay[best] + k_step);
  }

  constexpr double invphi = 0.61803398874989484820;
  double x1 = b - invphi * (b - a);
  double x2 = a + invphi * (b - a);
  double f1 = objective(x1);
  double f2 = objective(x2);
  while (b - a > k_tol) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - invphi * (b - a);
      f1 = objective(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + invphi * (b - a);
      f2 = objective(x2);
    }
  }
  out.best_delay = 0.5 * (a + b);
  out.best_db = mean_db(out.best_delay);
  return out;
}

struct EnvelopeResult {
  std::vector<double> frequency;     // band bins only
  std::vector<double> db;            // level at the given t_extra
  std::vector<double> env_lo;        // min/max over one delay cycle
  std::vector<double> env_hi;
  double period = 0.0;               // Hz, from the fringe phase slope
  std::vector<double> minima_freq;   // raw-curve minima (envelope drags these
                                     // slightly below the harmonic points)
};

// Characterizes the spectral fringes a residual delay imprints on the
// combined quadrature. The envelope sweeps the conjugate delay over one
// full cycle of the lowest band frequency and records per-bin extrema; the
// fringe period comes from the spacing of local minima (parabolically
// refined), requiring at least three of them. A minimum must be the lowest
// point of its 7-bin neighborhood and rise by at least min_prominence_db on
// both sides before the curve drops below it again, which keeps estimator
// ripple on flat stretches from registering as fringes.
inline EnvelopeResult oscillation_envelope(const TraceSet& ts, double f_lo, double f_hi,
                                           const SpectrumOptions& opt,
                                           std::size_t dither_points = 1024,
                                           double min_prominence_db = 0.05) {
  if (!(f_lo > 0.0)) throw std::invalid_argument("envelope: f_lo must be positive");
  if (dither_points < 16)
    throw std::invalid_argument("envelope: need at least 16 dither points");
  const detail::TrioSpectra trio = detail::trio_spectra(ts, opt);
  const std::vector<std::size_t> bins = band_bins(trio.sig.frequency, f_lo, f_hi);
  if (bins.size() < 8) throw std::invalid_argument("envelope: band too narrow");

  const auto level = [&](std::size_t j, double tau) {
    double num = detail::combined_bin(trio.sig, j, opt.mode, tau);
    double den = detail::combined_bin(trio.vac, j, opt.mode, tau);
    if (trio.use_dark) {
      const double d = detail::combined_bin(trio.dark, j, opt.mode, tau);
      num -= d;
      den -= d;
    }
    if (den <= 0.0) return std::numeric_limits<double>::quiet_NaN();
    return ratio_db(num, den);
  };

  EnvelopeResult out;
  out.frequency.reserve(bins.size());
  out.db.reserve(bins.size());
  for (std::size_t j : bins) {
    out.frequency.push_back(trio.sig.frequency[j]);
    out.db.push_back(level(j, opt.t_extra));
  }

  out.env_lo.assign(bins.size(), std::numeric_limits<double>::infinity());
  out.env_hi.assign(bins.size(), -std::numeric_limits<double>::infinity());
  const double cycle = 1.0 / f_lo;
  for (std::size_t m = 0; m < dither_points; ++m) {
    const double tau =
        opt.t_extra + cycle * static_cast<double>(m) / static_cast<double>(dither_points);
    for (std::size_t i = 0; i < bins.size(); ++i) {
      const double v = level(bins[i], tau);
      out.env_lo[i] = std::min(out.env_lo[i], v);
      out.env_hi[i] = std::max(out.env_hi[i], v);
    }
  }

  // Detect fringe minima on a lightly smoothed copy: the 5-bin average spans
  // a small fraction of any resolvable half fringe but cuts the per-bin
  // estimator ripple enough that the prominence gate separates real fringes
  // from noise valleys. Refinement below still uses the raw bins.
  std::vector<double> smooth(bins.size());
  for (std::size_t i = 0; i < bins.size(); ++i) {
    const std::size_t w = std::min({std::size_t{2}, i, bins.size() - 1 - i});
    double acc = 0.0;
    for (std::size_t j = i - w; j <= i + w; ++j) acc += out.db[j];
    smooth[i] = acc / static_cast<double>(2 * w + 1);
  }

  constexpr std::size_t k_win = 3;
  const auto is_window_min = [&](std::size_t i) {
    const std::size_t lo = i > k_win ? i - k_win : 0;
    const std::size_t hi = std::min(i + k_win, bins.size() - 1);
    for (std::size_t j = lo; j < i; ++j)
      if (smooth[j] <= smooth[i]) return false;
    for (std::size_t j = i + 1; j <= hi; ++j)
      if (smooth[j] < smooth[i]) return false;
    return true;
  };
  const auto prominence = [&](std::size_t i) {
    double left = -std::numeric_limits<double>::infinity();
    for (std::size_t j = i; j-- > 0;) {
      if (smooth[j] < smooth[i]) break;
      left = std::max(left, smooth[j]);
    }
    double right = -std::numeric_limits<double>::infinity();
    for (std::size_t j = i + 1; j < bins.size(); ++j) {
      if (smooth[j] < smooth[i]) break;
      right = std::max(right, smooth[j]);
    }
    return std::min(left, right) - smooth[i];
  };
  std::vector<std::size_t> idx;
  for (std::size_t i = 1; i + 1 < bins.size(); ++i)
    if (is_window_min(i) && prominence(i) >= min_prominence_db) idx.push_back(i);
  if (idx.size() < 3)
    throw std::invalid_argument("envelope: fewer than 3 fringe minima in band");

  // Fringe period from the phase slope. Dither each bin over exactly one of
  // its own fringe cycles: the fundamental DFT phase is then 2 pi f tau_res
  // mod 2 pi, independent of how the envelope varies across the band, and a
  // line fit of the unwrapped phase over all bins measures the residual
  // delay far better than the minima positions alone (which are dragged off
  // the harmonic points wherever the envelope has slope).
  {
    constexpr std::size_t k_phase_points = 64;
    std::vector<double> pf, phi;
    pf.reserve(bins.size());
    for (std::size_t i = 0; i < bins.size(); ++i) {
      const double f = out.frequency[i];
      std::complex<double> c{0.0, 0.0};
      bool ok = true;
      for (std::size_t m = 0; m < k_phase_points; ++m) {
        const double frac =
            static_cast<double>(m) / static_cast<double>(k_phase_points);
        const double y = level(bins[i], opt.t_extra + frac / f);
        if (std::isnan(y)) {
          ok = false;
          break;
        }
        const double ang = -2.0 * std::numbers::pi * frac;
        c += y * std::complex<double>(std::cos(ang), std::sin(ang));
      }
      if (!ok || std::abs(c) == 0.0) continue;
      pf.push_back(f);
      phi.push_back(std::arg(-c));
    }
    for (std::size_t i = 1; i < phi.size(); ++i) {
      double d = phi[i] - phi[i - 1];
      d -= 2.0 * std::numbers::pi * std::round(d / (2.0 * std::numbers::pi));
      phi[i] = phi[i - 1] + d;
    }
    double fm = 0.0, pm = 0.0;
    for (std::size_t i = 0; i < pf.size(); ++i) {
      fm += pf[i];
      pm += phi[i];
    }
    fm /= static_cast<double>(pf.size());
    pm /= static_cast<double>(pf.size());
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < pf.size(); ++i) {
      sxx += (pf[i] - fm) * (pf[i] - fm);
      sxy += (pf[i] - fm) * (phi[i] - pm);
    }
    const double tau = sxx > 0.0 ? sxy / sxx / (2.0 * std::numbers::pi) : 0.0;
    if (tau != 0.0) out.period = 1.0 / std::abs(tau);
  }
  const bool have_phase_period = out.period > 0.0;

  // Refine each minimum with a least-squares parabola. Near a fringe bottom
  // the curvature per bin can be comparable to the estimator ripple, so a
  // window that scales with the fringe spacing (but stays well inside a
  // half period) beats the three-point vertex by a wide margin.
  const double df = out.frequency[1] - out.frequency[0];
  const std::size_t spacing_bins =
      (idx.back() - idx.front()) / (idx.size() - 1);
  const std::size_t w0 = std::max<std::size_t>(1, spacing_bins / 10);
  for (const std::size_t i : idx) {
    const std::size_t w =
        std::min({w0, i, bins.size() - 1 - i});
    double s2 = 0.0, s4 = 0.0, sy = 0.0, sxy = 0.0, sx2y = 0.0;
    for (std::size_t j = i - w; j <= i + w; ++j) {
      const double x = static_cast<double>(j) - static_cast<double>(i);
      const double y = out.db[j];
      s2 += x * x;
      s4 += x * x * x * x;
      sy += y;
      sxy += x * y;
      sx2y += x * x * y;
    }
    const double m = static_cast<double>(2 * w + 1);
    const double a2 = (m * sx2y - s2 * sy) / (m * s4 - s2 * s2);
    const double a1 = sxy / s2;
    double shift = a2 > 0.0 ? -a1 / (2.0 * a2) : 0.0;
    shift = std::clamp(shift, -static_cast<double>(w), static_cast<double>(w));
    out.minima_freq.push_back(out.frequency[i] + shift * df);
  }
  if (!have_phase_period)
    out.period = (out.minima_freq.back() - out.minima_freq.front()) /
                 static_cast<double>(out.minima_freq.size() - 1);
  return out;
}

struct CovarianceScan {
  std::vector<double> spacing;    // in units of the bin width
  std::vector<double> value;      // cov / (bandwidth * shot level)
  std::vector<double> std_error;  // jackknife, same normalization
  double bin_width = 0.0;         // Hz
  double probe_center = 0.0;      // Hz
  double shot_level = 0.0;        // dark-corrected PSD used for normalization
  double dark_level = 0.0;
};

// Probe/conjugate covariance versus spectral separation: fix one bin on the
// probe, slide an equal bin across the conjugate, and normalize each
// covariance to the bin bandwidth and the shot level measured in the same
// bin of the vacuum difference. t_extra compensates the group delay so the
// cross term is real at zero spacing.
inline CovarianceScan qumode_scan(const TraceSet& ts, double probe_center,
                                  double bin_width, double max_spacing, double t_extra,
                                  double spacing_step = 0.25, std::size_t blocks = 32) {
  validate(ts);
  detail::require_vacuum(ts);
  if (!(bin_width > 0.0)) throw std::invalid_argument("qumode: bin width must be positive");
  if (!(probe_center > 0.0))
    throw std::invalid_argument("qumode: probe center must be positive");
  if (!(max_spacing >= 0.0) || !(spacing_step > 0.0))
    throw std::invalid_argument("qumode: bad spacing grid");

  const double fs = ts.fs;
  const double hw = bin_width / 2.0;

  std::vector<double> conj = ts.conjugate;
  apply_delay(conj, fs, t_extra);
  std::vector<double> vconj = ts.vacuum_conjugate;
  apply_delay(vconj, fs, t_extra);

  std::vector<double> probe = ts.probe;
  const double weff = bandpass_square(probe, fs, probe_center - hw, probe_center + hw);
  if (!(weff > 0.0)) throw std::invalid_argument("qumode: probe bin contains no bins");

  std::vector<double> vd = combine_channels(ts.vacuum_probe, vconj, CombineMode::difference);
  bandpass_square(vd, fs, probe_center - hw, probe_center + hw);
  double shot = covariance_jackknife(vd, vd, blocks).value / weff;

  double dark_level = 0.0;
  if (ts.has_dark()) {
    std::vector<double> dconj = ts.dark_conjugate;
    apply_delay(dconj, fs, t_extra);
    std::vector<double> dd =
        combine_channels(ts.dark_probe, dconj, CombineMode::difference);
    bandpass_square(dd, fs, probe_center - hw, probe_center + hw);
    dark_level = covariance_jackknife(dd, dd, blocks).value / weff;
    shot -= dark_level;
  }
  if (!(shot > 0.0)) throw std::invalid_argument("qumode: shot level not positive");

  CovarianceScan out;
  out.bin_width = bin_width;
  out.probe_center = probe_center;
  out.shot_level = shot;
  out.dark_level = dark_level;
  const double norm = 1.0 / (weff * shot);
  for (double s = 0.0; s <= max_spacing + spacing_step * 1e-9; s += spacing_step) {
    const double center = probe_center + s * bin_width;
    std::vector<double> cf = conj;
    bandpass_square(cf, fs, center - hw, center + hw);
    const BinCovariance cj = covariance_jackknife(probe, cf, blocks);
    out.spacing.push_back(s);
    out.value.push_back(cj.value * norm);
    out.std_error.push_back(cj.std_error * norm);
  }
  return out;
}

struct LowFreqSpectrum {
  std::vector<double> frequency;
  std::vector<double> db;           // NaN where invalid
  std::vector<std::uint8_t> valid;
  double dark_level = 0.0;          // scalar dark correction applied
};

// Squeezing at very low Fourier frequencies from one long record: a single
// full-length periodogram of the combined difference, normalized bin by bin
// against the vacuum reference (which shares the underlying draws, so the
// per-bin scatter divides out). Requires at least 10 seconds of data.
inline LowFreqSpectrum lowfreq_spectrum(const TraceSet& ts, double t_extra,
                                        double f_max, bool subtract_dark) {
  validate(ts);
  detail::require_vacuum(ts);
  if (subtract_dark && !ts.has_dark())
    throw std::invalid_argument("lowfreq: dark channels required for subtraction");
  if (!(f_max > 0.0)) throw std::invalid_argument("lowfreq: f_max must be positive");
  const double duration = ts.duration();
  if (duration < 10.0 * (1.0 - 1e-12))
    throw std::invalid_argument("lowfreq: record shorter than 10 seconds");

  const std::size_t n = ts.n();
  const double fs = ts.fs;
  const double df = fs / static_cast<double>(n);
  const double norm = 2.0 / (fs * static_cast<double>(n));

  const auto periodogram = [&](const std::vector<double>& p,
                               const std::vector<double>& c) {
    std::vector<double> cd = c;
    apply_delay(cd, fs, t_extra);
    const std::vector<double> comb = combine_channels(p, cd, CombineMode::difference);
    return fft_r2c(comb);
  };

  const std::vector<std::complex<double>> xs = periodogram(ts.probe, ts.conjugate);
  const std::vector<std::complex<double>> xv =
      periodogram(ts.vacuum_probe, ts.vacuum_conjugate);

  auto jmax = static_cast<std::size_t>(std::floor(f_max / df + 1e-9));
  jmax = std::min(jmax, n / 2);
  if (jmax < 1) throw std::invalid_argument("lowfreq: f_max below the first bin");

  LowFreqSpectrum out;
  if (subtract_dark && ts.has_dark()) {
    const std::vector<std::complex<double>> xd =
        periodogram(ts.dark_probe, ts.dark_conjugate);
    double acc = 0.0;
    for (std::size_t j = 1; j <= jmax; ++j) acc += std::norm(xd[j]) * norm;
    out.dark_level = acc / static_cast<double>(jmax);
  }

  out.frequency.reserve(jmax);
  out.db.reserve(jmax);
  out.valid.reserve(jmax);
  for (std::size_t j = 1; j <= jmax; ++j) {
    const double num = std::norm(xs[j]) * norm - out.dark_level;
    const double den = std::norm(xv[j]) * norm - out.dark_level;
    out.frequency.push_back(df * static_cast<double>(j));
    if (den > 0.0) {
      out.valid.push_back(1);
      out.db.push_back(ratio_db(num, den));
    } else {
      out.valid.push_back(0);
      out.db.push_back(std::numeric_limits<double>::quiet_NaN());
    }
  }
  return out;
}

}  // namespace tmsq
