#pragma once

#include <bit>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "tmsq/fft.hpp"
#include "tmsq/model.hpp"
#include "tmsq/parallel.hpp"
#include "tmsq/rng.hpp"
#include "tmsq/trace.hpp"
#include "tmsq/util.hpp"

namespace tmsq {

// Counter-RNG stream ids. Keyed by role, not by channel, so that the
// squeezed joint quadrature uses the same draws regardless of lock point.
enum : std::uint64_t {
  k_stream_squeezed = 0,
  k_stream_antisqueezed = 1,
  k_stream_elec_probe = 2,
  k_stream_elec_conjugate = 3,
  k_stream_vacuum_elec_probe = 4,
  k_stream_vacuum_elec_conjugate = 5,
  k_stream_dark_elec_probe = 6,
  k_stream_dark_elec_conjugate = 7,
};

// Mid-tread quantizer. In-range samples land on the lattice
// step*round(x/step); samples beyond +-fullscale saturate to exactly
// +-fullscale (off-lattice) and are counted. Returns the clip count.
inline std::size_t quantize_inplace(std::span<double> x, int bits, double fullscale) {
  if (bits < 1 || bits > 15)
    throw std::invalid_argument("quantize: bits must be in [1, 15]");
  if (!(fullscale > 0.0))
    throw std::invalid_argument("quantize: fullscale must be positive");
  const double step = adc_step(bits, fullscale);
  std::size_t clips = 0;
  for (double& v : x) {
    if (v >= fullscale) {
      if (v > fullscale) ++clips;
      v = fullscale;
    } else if (v <= -fullscale) {
      if (v < -fullscale) ++clips;
      v = -fullscale;
    } else {
      v = step * std::nearbyint(v / step);
    }
  }
  return clips;
}

struct QuantizeResult {
  std::vector<double> samples;
  std::size_t clipped = 0;
};

inline QuantizeResult quantize(std::span<const double> x, int bits, double fullscale) {
  QuantizeResult r;
  r.samples.assign(x.begin(), x.end());
  r.clipped = quantize_inplace(r.samples, bits, fullscale);
  return r;
}

namespace detail {

// One complex Gaussian draw with unit variance per component.
inline std::complex<double> gauss_bin(std::uint64_t seed, std::uint64_t stream, std::uint64_t k) {
  const GaussPair g = gaussian_pair(seed, stream, k);
  return {g.z0, g.z1};
}

}  // namespace detail

// Generates a correlated two-mode record plus its vacuum-reference and
// dark companions. All channels share one synthesis pass:
//
//   joint quadratures -> probe/conjugate pair (conjugate advanced by
//   t_group) -> high-pass filter -> electronic noise -> quantizer.
//
// The vacuum pair reuses the signal's quadrature draws with the squeezer
// off (unit variance), so ratios of signal to vacuum spectra cancel the
// statistical fluctuation of the underlying draws bin by bin. Dark
// channels carry electronic noise alone. n must be a power of two and at
// least 2^14 so records segment cleanly.
inline TraceSet synthesize(const SqueezerParams& p, double fs, std::size_t n,
                           std::uint64_t seed) {
  validate(p);
  if (!(fs > 0.0) || !std::isfinite(fs))
    throw std::invalid_argument("synthesize: fs must be positive and finite");
  if (n < (std::size_t{1} << 14) || !std::has_single_bit(n))
    throw std::invalid_argument("synthesize: n must be a power of two >= 16384");

  constexpr double k_two_pi = 2.0 * std::numbers::pi;
  const std::size_t half = n / 2;
  const std::size_t nbins = half + 1;
  const double df = fs / static_cast<double>(n);
  const double amp_norm = std::sqrt(static_cast<double>(n) / 2.0);

  fft_prepare(n);

  // Raw unit draws for the two joint-quadrature branches, plus the model
  // variances of the difference-like (d) and sum-like (s) channels.
  std::vector<std::complex<double>> raw_sq(nbins), raw_as(nbins);
  std::vector<double> var_minus(nbins), var_plus(nbins);
  parallel_chunks(half - 1, 65536, [&](std::size_t, std::size_t b, std::size_t e) {
    for (std::size_t j = b; j < e; ++j) {
      const std::size_t k = j + 1;
      raw_sq[k] = detail::gauss_bin(seed, k_stream_squeezed, k);
      raw_as[k] = detail::gauss_bin(seed, k_stream_antisqueezed, k);
      const detail::JointCoeffs jc = detail::joint_coeffs(p, df * static_cast<double>(k));
      var_minus[k] = jc.a - jc.c;
      var_plus[k] = jc.a + jc.c;
    }
  });
  raw_sq[0] = raw_as[0] = {0.0, 0.0};
  raw_sq[half] = raw_as[half] = {0.0, 0.0};
  var_minus[0] = var_plus[0] = var_minus[half] = var_plus[half] = 0.0;

  // With an X lock the difference quadrature is squeezed; with a P lock
  // the sum quadrature is. The draw follows the role, the variance
  // follows the channel.
  const bool x_lock = (p.lock == Quadrature::X);
  const auto& raw_d = x_lock ? raw_sq : raw_as;
  const auto& raw_s = x_lock ? raw_as : raw_sq;
  const std::vector<double>& var_d = x_lock ? var_minus : var_plus;
  const std::vector<double>& var_s = x_lock ? var_plus : var_minus;

  const bool filtered = p.f_hp > 0.0;
  const bool has_elec = p.s_elec > 0.0;
  const double elec_amp = has_elec ? std::sqrt(p.s_elec) * amp_norm : 0.0;
  constexpr double inv_sqrt2 = std::numbers::sqrt2 / 2.0;

  std::vector<std::complex<double>> spectrum(nbins);

  // One light channel: probe combines (s + d)/sqrt2, conjugate combines
  // (s - d)/sqrt2 and is advanced by t_group (it leads the probe).
  const auto build_light = [&](bool is_probe, bool vacuum, std::uint64_t elec_stream,
                               std::vector<double>& out) {
    parallel_chunks(half - 1, 65536, [&](std::size_t, std::size_t b, std::size_t e) {
      for (std::size_t j = b; j < e; ++j) {
        const std::size_t k = j + 1;
        const double f = df * static_cast<double>(k);
        const double sd = vacuum ? 1.0 : var_s[k];
        const double dd = vacuum ? 1.0 : var_d[k];
        const std::complex<double> s_part = std::sqrt(sd) * amp_norm * raw_s[k];
        const std::complex<double> d_part = std::sqrt(dd) * amp_norm * raw_d[k];
        std::complex<double> z = is_probe ? (s_part + d_part) * inv_sqrt2
                                          : (s_part - d_part) * inv_sqrt2;
        if (!is_probe) {
          const double th = k_two_pi * f * p.t_group;
          z *= std::complex<double>(std::cos(th), std::sin(th));
        }
        if (filtered) {
          const double x = f / p.f_hp;
          z *= std::complex<double>(0.0, x) / std::complex<double>(1.0, x);
        }
        if (has_elec) z += elec_amp * detail::gauss_bin(seed, elec_stream, k);
        spectrum[k] = z;
      }
    });
    spectrum[0] = spectrum[half] = {0.0, 0.0};
    fft_c2r(spectrum, n, out);
  };

  const auto build_dark = [&](std::uint64_t elec_stream, std::vector<double>& out) {
    if (!has_elec) {
      out.assign(n, 0.0);
      return;
    }
    parallel_chunks(half - 1, 65536, [&](std::size_t, std::size_t b, std::size_t e) {
      for (std::size_t j = b; j < e; ++j) {
        const std::size_t k = j + 1;
        spectrum[k] = elec_amp * detail::gauss_bin(seed, elec_stream, k);
      }
    });
    spectrum[0] = spectrum[half] = {0.0, 0.0};
    fft_c2r(spectrum, n, out);
  };

  TraceSet ts;
  ts.fs = fs;
  build_light(true, false, k_stream_elec_probe, ts.probe);
  build_light(false, false, k_stream_elec_conjugate, ts.conjugate);
  build_light(true, true, k_stream_vacuum_elec_probe, ts.vacuum_probe);
  build_light(false, true, k_stream_vacuum_elec_conjugate, ts.vacuum_conjugate);
  build_dark(k_stream_dark_elec_probe, ts.dark_probe);
  build_dark(k_stream_dark_elec_conjugate, ts.dark_conjugate);

  if (p.adc_bits > 0) {
    const auto clip = [&](std::vector<double>& ch, const char* key) {
      const std::size_t c = quantize_inplace(ch, p.adc_bits, p.adc_fullscale);
      ts.meta[key] = std::to_string(c);
    };
    clip(ts.probe, "clips_probe");
    clip(ts.conjugate, "clips_conjugate");
    clip(ts.vacuum_probe, "clips_vacuum_probe");
    clip(ts.vacuum_conjugate, "clips_vacuum_conjugate");
    clip(ts.dark_probe, "clips_dark_probe");
    clip(ts.dark_conjugate, "clips_dark_conjugate");
  }

  ts.meta["seed"] = std::to_string(seed);
  ts.meta["fs"] = format_double(fs);
  ts.meta["n"] = std::to_string(n);
  ts.meta["r0"] = format_double(p.r0);
  ts.meta["f_b"] = format_double(p.f_b);
  ts.meta["eta_p"] = format_double(p.eta_p);
  ts.meta["eta_c"] = format_double(p.eta_c);
  ts.meta["t_group"] = format_double(p.t_group);
  ts.meta["lock"] = x_lock ? "X" : "P";
  ts.meta["s_elec"] = format_double(p.s_elec);
  ts.meta["f_hp"] = format_double(p.f_hp);
  ts.meta["adc_bits"] = std::to_string(p.adc_bits);
  ts.meta["adc_fullscale"] = format_double(p.adc_fullscale);
  ts.meta["lock_phase_rms"] = format_double(p.lock_phase_rms);

  validate(ts);
  return ts;
}

}  // namespace tmsq
