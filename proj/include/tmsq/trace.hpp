#pragma once

#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace tmsq {

// A set of simultaneously acquired homodyne records, planar per channel,
// amplitudes in shot-sigma units (quantized records sit on the ADC lattice).
// Empty vectors mark absent channels. meta holds key=value provenance,
// serialized in key order.
struct TraceSet {
  double fs = 0.0;
  std::vector<double> probe;
  std::vector<double> conjugate;
  std::vector<double> dark_probe;
  std::vector<double> dark_conjugate;
  std::vector<double> vacuum_probe;
  std::vector<double> vacuum_conjugate;
  std::map<std::string, std::string> meta;

  std::size_t n() const { return probe.size(); }
  double duration() const { return fs > 0.0 ? static_cast<double>(n()) / fs : 0.0; }
  bool has_dark() const { return !dark_probe.empty() && !dark_conjugate.empty(); }
  bool has_vacuum() const { return !vacuum_probe.empty() && !vacuum_conjugate.empty(); }
};

inline void validate(const TraceSet& ts) {
  if (!(ts.fs > 0.0)) throw std::invalid_argument("traces: fs must be > 0");
  if (ts.probe.empty() || ts.conjugate.empty())
    throw std::invalid_argument("traces: probe and conjugate channels are required");
  const std::size_t n = ts.probe.size();
  auto check = [n](const std::vector<double>& ch, const char* name) {
    if (!ch.empty() && ch.size() != n)
      throw std::invalid_argument(std::string("traces: channel length mismatch: ") + name);
  };
  check(ts.conjugate, "conjugate");
  check(ts.dark_probe, "dark_probe");
  check(ts.dark_conjugate, "dark_conjugate");
  check(ts.vacuum_probe, "vacuum_probe");
  check(ts.vacuum_conjugate, "vacuum_conjugate");
  if (ts.dark_probe.empty() != ts.dark_conjugate.empty())
    throw std::invalid_argument("traces: dark channels must come as a pair");
  if (ts.vacuum_probe.empty() != ts.vacuum_conjugate.empty())
    throw std::invalid_argument("traces: vacuum channels must come as a pair");
}

}  // namespace tmsq
