#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "tmsq/dsp.hpp"
#include "tmsq/rng.hpp"

using namespace tmsq;

namespace {

std::vector<double> white_gaussian(std::size_t n, std::uint64_t seed, double sigma = 1.0) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n / 2; ++i) {
    const GaussPair g = gaussian_pair(seed, 0, i);
    x[2 * i] = sigma * g.z0;
    x[2 * i + 1] = sigma * g.z1;
  }
  return x;
}

double mean_square(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s / static_cast<double>(x.size());
}

}  // namespace

TEST(Dsp, WelchSatisfiesParseval) {
  const std::size_t n = 1 << 14;
  const double fs = 2.0e6;
  const std::vector<double> x = white_gaussian(n, 5);
  const Spectrum s = psd_welch(x, fs, 512);
  const double df = fs / 512.0;
  double total = 0.0;
  for (double v : s.value) total += v * df;
  EXPECT_NEAR(total / mean_square(x), 1.0, 1e-12);
}

TEST(Dsp, AutocorrelationPathMatchesWelch) {
  const std::size_t n = 1 << 14;
  const double fs = 1.0e6;
  const std::vector<double> x = white_gaussian(n, 6);
  const Spectrum a = psd_welch(x, fs, 1024);
  const Spectrum b = psd_autocorr(x, fs, 1024);
  ASSERT_EQ(a.size(), b.size());
  double peak = 0.0;
  for (double v : a.value) peak = std::max(peak, std::abs(v));
  for (std::size_t j = 0; j < a.size(); ++j) {
    EXPECT_EQ(a.frequency[j], b.frequency[j]);
    EXPECT_NEAR(a.value[j], b.value[j], 1e-10 * peak) << "bin " << j;
  }
}

TEST(Dsp, SineLandsInItsBinWithTheRightPower) {
  const std::size_t n = 1 << 12;
  const double fs = 4096.0;
  const std::size_t segment = 512;
  const double df = fs / static_cast<double>(segment);
  const double f0 = 2.0 * df;
  const double amp = 2.0;
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i)
    x[i] = amp * std::sin(2.0 * std::numbers::pi * f0 * static_cast<double>(i) / fs);
  const Spectrum s = psd_welch(x, fs, segment);
  EXPECT_NEAR(s.value[2] * df, amp * amp / 2.0, 1e-10);
  EXPECT_NEAR(s.value[1], 0.0, 1e-10);
  EXPECT_NEAR(s.value[3], 0.0, 1e-10);
}

TEST(Dsp, HannWindowKeepsTheWhiteLevel) {
  const std::size_t n = 1 << 16;
  const double fs = 2.0;
  const std::vector<double> x = white_gaussian(n, 7);
  const Spectrum rect = psd_welch(x, fs, 512, Window::rect);
  const Spectrum hann = psd_welch(x, fs, 512, Window::hann, 0.5);
  const auto band_mean = [](const Spectrum& s) {
    double acc = 0.0;
    for (std::size_t j = 1; j + 1 < s.size(); ++j) acc += s.value[j];
    return acc / static_cast<double>(s.size() - 2);
  };
  EXPECT_NEAR(band_mean(rect), 1.0, 0.05);
  EXPECT_NEAR(band_mean(hann), 1.0, 0.05);
}

TEST(Dsp, CrossSpectrumOfDelayedCopyCarriesThePhaseRamp) {
  const std::size_t n = 1 << 12;
  const double fs = 4096.0;
  const std::vector<double> x = white_gaussian(n, 8);
  std::vector<double> y = x;
  const std::size_t m = 3;
  apply_delay(y, fs, static_cast<double>(m) / fs);
  const CrossSpectrum c = cross_psd(x, y, fs, n);
  for (std::size_t k = 2; k <= 12; ++k) {
    const double expect = 2.0 * std::numbers::pi * static_cast<double>(k * m) /
                          static_cast<double>(n);
    EXPECT_NEAR(std::arg(c.value[k]), expect, 1e-9) << "bin " << k;
  }
}

TEST(Dsp, IntegerDelayIsACircularShift) {
  const std::size_t n = 2048;
  const double fs = 1000.0;
  const std::vector<double> x = white_gaussian(n, 9);
  std::vector<double> y = x;
  const std::size_t m = 37;
  apply_delay(y, fs, static_cast<double>(m) / fs);
  for (std::size_t i = 0; i < n; ++i)
    EXPECT_NEAR(y[i], x[(i + n - m) % n], 1e-9) << "i=" << i;
}

TEST(Dsp, DelayRoundTripIsIdentity) {
  const std::size_t n = 4096;
  const double fs = 5e7;
  std::vector<double> x = white_gaussian(n, 10);
  // A fractional delay keeps only the real projection at Nyquist, so the
  // roundtrip is exact on signals without DC or Nyquist content (synthesized
  // records never carry either).
  const double df = fs / static_cast<double>(n);
  bandpass_square(x, fs, df, fs / 2.0 - df);
  std::vector<double> y = x;
  apply_delay(y, fs, 10.4e-9);
  apply_delay(y, fs, -10.4e-9);
  for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(y[i], x[i], 1e-9);
}

TEST(Dsp, DelayRejectsMoreThanTheRecord) {
  std::vector<double> x(1024, 0.0);
  EXPECT_THROW(apply_delay(x, 1000.0, 2.0), std::invalid_argument);
  std::vector<double> odd(1023, 0.0);
  EXPECT_THROW(apply_delay(odd, 1000.0, 1e-3), std::invalid_argument);
}

TEST(Dsp, BandpassKeepsExactlyTheBand) {
  const std::size_t n = 4096;
  const double fs = 4096.0;  // df = 1 Hz
  std::vector<double> x(n);
  const double f_in = 105.0, f_out = 300.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / fs;
    x[i] = std::sin(2.0 * std::numbers::pi * f_in * t) +
           std::sin(2.0 * std::numbers::pi * f_out * t);
  }
  std::vector<double> y = x;
  const double weff = bandpass_square(y, fs, 100.5, 110.5);
  EXPECT_NEAR(weff, 10.0, 1e-12);
  EXPECT_NEAR(mean_square(y), 0.5, 1e-9);  // only the in-band sine survives

  // Idempotent up to FFT roundtrip rounding: the band content is unchanged.
  std::vector<double> z = y;
  bandpass_square(z, fs, 100.5, 110.5);
  for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(z[i], y[i], 1e-12);

  // Edges landing exactly on bins are kept.
  std::vector<double> w = x;
  EXPECT_NEAR(bandpass_square(w, fs, 100.0, 110.0), 11.0, 1e-12);

  EXPECT_THROW(bandpass_square(w, fs, 2000.0, 2100.0), std::invalid_argument);
  EXPECT_THROW(bandpass_square(w, fs, -1.0, 10.0), std::invalid_argument);
}

TEST(Dsp, JackknifeCovariance) {
  const std::size_t n = 1 << 15;
  const std::vector<double> x = white_gaussian(n, 11);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n / 2; ++i) {
    const GaussPair g = gaussian_pair(12, 1, i);
    y[2 * i] = g.z0;
    y[2 * i + 1] = g.z1;
  }
  // Self-covariance equals the sample variance.
  const BinCovariance self = covariance_jackknife(x, x);
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);
  EXPECT_NEAR(self.value, var, 1e-12);
  EXPECT_GT(self.std_error, 0.0);

  // Independent records: covariance consistent with zero.
  const BinCovariance indep = covariance_jackknife(x, y);
  EXPECT_LT(std::abs(indep.value), 5.0 * indep.std_error);

  // Correlated records: strongly significant.
  std::vector<double> z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = 0.8 * x[i] + 0.6 * y[i];
  const BinCovariance corr = covariance_jackknife(x, z);
  EXPECT_GT(corr.value, 10.0 * corr.std_error);
  EXPECT_NEAR(corr.value, 0.8 * var, 0.05);
}

TEST(Dsp, BinCovarianceOfSharedBandIsPositive) {
  const std::size_t n = 1 << 14;
  const double fs = 4096.0;
  const std::vector<double> x = white_gaussian(n, 13);
  const BinCovariance same = bin_covariance(x, x, fs, 500.0, 500.0, 100.0);
  EXPECT_NEAR(same.bandwidth, 100.0, 2.0);
  // The shared band carries its full PSD (2/fs per unit variance, one-sided).
  EXPECT_NEAR(same.value / same.bandwidth, 2.0 / fs, 0.2 * 2.0 / fs);
  // Disjoint bins of one record share no Fourier content at all.
  const BinCovariance disjoint = bin_covariance(x, x, fs, 500.0, 800.0, 100.0);
  EXPECT_NEAR(disjoint.value, 0.0, 1e-12);
}

TEST(Dsp, WelchArgumentValidation) {
  const std::vector<double> x = white_gaussian(1024, 14);
  EXPECT_THROW(psd_welch(x, 1e3, 100), std::invalid_argument);   // not a power of two
  EXPECT_THROW(psd_welch(x, 1e3, 2048), std::invalid_argument);  // longer than record
  EXPECT_THROW(psd_welch(x, 0.0, 256), std::invalid_argument);
  EXPECT_THROW(psd_welch(x, 1e3, 256, Window::rect, 1.0), std::invalid_argument);
  std::vector<double> y(1000, 0.0);
  EXPECT_THROW(cross_psd(x, y, 1e3, 256), std::invalid_argument);
}
