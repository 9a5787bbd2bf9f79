#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace tmsq {

enum class Quadrature { X, P };
enum class Branch { squeezed, antisqueezed };

// Two-mode squeezer plus measurement chain. All noise levels are in shot
// units: a vacuum-seeded homodyne channel has unit sample variance, i.e. a
// flat one-sided PSD of 2/fs.
//
// Chain order per channel: squeezed light (conjugate leads probe by t_group)
// -> first-order high-pass at f_hp -> additive white electronic noise of PSD
// s_elec (digitizer-referred, not filtered) -> mid-tread quantizer.
struct SqueezerParams {
  // r0 anchors the compensated squeezed branch exactly 5 dB below shot at low
  // frequency for the default efficiencies; f_b puts that branch within
  // 0.21 dB of shot at 15 MHz.
  double r0 = 0.81593870856836948;
  double f_b = 2.8e6;          // Hz, Lorentzian corner of r(f)
  double eta_p = 0.85;         // probe detection efficiency
  double eta_c = 0.85;         // conjugate detection efficiency
  double t_group = 10.4e-9;    // s, conjugate leads probe
  Quadrature lock = Quadrature::X;
  double s_elec = 0.1;         // electronic-noise PSD per channel, shot units
  double f_hp = 300e3;         // Hz, measurement-chain high-pass cutoff
  int adc_bits = 8;            // 0 disables quantization
  double adc_fullscale = 8.0;  // shot sigma
  double lock_phase_rms = 0.0; // rad, residual quadrature-lock jitter
};

inline void validate(const SqueezerParams& p) {
  auto fail = [](const std::string& m) { throw std::invalid_argument("params: " + m); };
  if (!(p.r0 >= 0.0) || !std::isfinite(p.r0)) fail("r0 must be finite and >= 0");
  if (!(p.f_b > 0.0)) fail("f_b must be > 0");
  if (!(p.eta_p >= 0.0 && p.eta_p <= 1.0)) fail("eta_p must be in [0, 1]");
  if (!(p.eta_c >= 0.0 && p.eta_c <= 1.0)) fail("eta_c must be in [0, 1]");
  if (!std::isfinite(p.t_group)) fail("t_group must be finite");
  if (!(p.s_elec >= 0.0)) fail("s_elec must be >= 0");
  if (!(p.f_hp >= 0.0)) fail("f_hp must be >= 0");
  if (p.adc_bits < 0 || p.adc_bits > 15) fail("adc_bits must be in [0, 15]");
  if (p.adc_bits > 0 && !(p.adc_fullscale > 0.0)) fail("adc_fullscale must be > 0");
  if (!(p.lock_phase_rms >= 0.0)) fail("lock_phase_rms must be >= 0");
}

// Frequency-dependent squeeze parameter, Lorentzian in f.
inline double squeeze_profile(const SqueezerParams& p, double f) {
  if (!(f >= 0.0) || !std::isfinite(f)) throw std::invalid_argument("squeeze_profile: f must be finite and >= 0");
  const double x = f / p.f_b;
  return p.r0 / (1.0 + x * x);
}

namespace detail {

struct JointCoeffs {
  double a;  // common level
  double c;  // correlation amplitude
};

inline JointCoeffs joint_coeffs(const SqueezerParams& p, double f) {
  const double r = squeeze_profile(p, f);
  const double ebar = 0.5 * (p.eta_p + p.eta_c);
  const double g = std::sqrt(p.eta_p * p.eta_c);
  const double jitter = std::exp(-2.0 * p.lock_phase_rms * p.lock_phase_rms);
  return {ebar * std::cosh(2.0 * r) + 1.0 - ebar,
          g * std::sinh(2.0 * r) * jitter};
}

}  // namespace detail

// Variance of the joint quadrature at analysis frequency f when the
// measurement compensates the arrival-time difference by t_extra.
inline double joint_variance(const SqueezerParams& p, double f, double t_extra,
                             Branch branch) {
  const auto [a, c] = detail::joint_coeffs(p, f);
  const double phase = 2.0 * std::numbers::pi * f * (p.t_group - t_extra);
  const double corr = c * std::cos(phase);
  return branch == Branch::squeezed ? a - corr : a + corr;
}

// Cross-PSD between the probe and compensated-conjugate channels, shot units.
inline double cross_spectrum(const SqueezerParams& p, double f,
                             double t_extra = 0.0) {
  const auto [a, c] = detail::joint_coeffs(p, f);
  (void)a;
  const double phase = 2.0 * std::numbers::pi * f * (p.t_group - t_extra);
  return c * std::cos(phase);
}

// |H(f)|^2 of the first-order high-pass; 1 when f_hp == 0.
inline double highpass_gain2(const SqueezerParams& p, double f) {
  if (p.f_hp <= 0.0) return 1.0;
  const double x2 = (f / p.f_hp) * (f / p.f_hp);
  return x2 / (1.0 + x2);
}

inline double adc_step(int bits, double fullscale) {
  return 2.0 * fullscale / (static_cast<double>((1 << bits) - 1));
}

// Flat quantization-noise PSD in shot units (step^2/12 spread over the
// Nyquist band, which carries unit shot variance).
inline double quant_noise_psd(const SqueezerParams& p) {
  if (p.adc_bits <= 0) return 0.0;
  const double step = adc_step(p.adc_bits, p.adc_fullscale);
  return step * step / 12.0;
}

// Expected one-sided PSD (shot units) of the combined channel as digitized:
// filtered light plus the unfiltered digitizer floor.
inline double measured_psd(const SqueezerParams& p, double f, double t_extra,
                           Branch branch) {
  return highpass_gain2(p, f) * joint_variance(p, f, t_extra, branch) +
         p.s_elec + quant_noise_psd(p);
}

inline double measured_shot_psd(const SqueezerParams& p, double f) {
  return highpass_gain2(p, f) + p.s_elec + quant_noise_psd(p);
}

inline double measured_dark_psd(const SqueezerParams& p) {
  return p.s_elec + quant_noise_psd(p);
}

}  // namespace tmsq
