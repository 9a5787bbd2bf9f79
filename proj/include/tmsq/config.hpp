#pragma once

#include <cctype>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "tmsq/model.hpp"
#include "tmsq/util.hpp"

namespace tmsq {

// Configuration mistakes (unknown keys, unparsable values, unreadable
// config files) are usage errors, distinct from bad data files.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  SqueezerParams params;
  double fs = 50e6;
  std::size_t n = std::size_t{1} << 23;
};

inline Quadrature parse_quadrature(const std::string& s) {
  if (s == "X" || s == "x") return Quadrature::X;
  if (s == "P" || s == "p") return Quadrature::P;
  throw ConfigError("config: lock must be X or P, got '" + s + "'");
}

// Applies one key=value setting. Keys mirror the synthesizer parameters
// plus the acquisition knobs fs and n.
inline void apply_setting(RunConfig& cfg, const std::string& key,
                          const std::string& value) {
  const auto num = [&] {
    try {
      return parse_double(value);
    } catch (const std::invalid_argument&) {
      throw ConfigError("config: bad value for " + key + ": '" + value + "'");
    }
  };
  const auto integer = [&] {
    try {
      return parse_int(value);
    } catch (const std::invalid_argument&) {
      throw ConfigError("config: bad value for " + key + ": '" + value + "'");
    }
  };

  if (key == "r0") cfg.params.r0 = num();
  else if (key == "f_b") cfg.params.f_b = num();
  else if (key == "eta_p") cfg.params.eta_p = num();
  else if (key == "eta_c") cfg.params.eta_c = num();
  else if (key == "t_group") cfg.params.t_group = num();
  else if (key == "lock") cfg.params.lock = parse_quadrature(value);
  else if (key == "s_elec") cfg.params.s_elec = num();
  else if (key == "f_hp") cfg.params.f_hp = num();
  else if (key == "adc_bits") cfg.params.adc_bits = static_cast<int>(integer());
  else if (key == "adc_fullscale") cfg.params.adc_fullscale = num();
  else if (key == "lock_phase_rms") cfg.params.lock_phase_rms = num();
  else if (key == "fs") cfg.fs = num();
  else if (key == "n") {
    const long long v = integer();
    if (v <= 0) throw ConfigError("config: n must be positive");
    cfg.n = static_cast<std::size_t>(v);
  } else {
    throw ConfigError("config: unknown key '" + key + "'");
  }
}

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

// key = value lines; blank lines and '#' comments are skipped.
inline void load_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const std::size_t eq = body.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: " + path + ":" + std::to_string(lineno) +
                        ": expected key=value");
    try {
      apply_setting(cfg, trim(body.substr(0, eq)), trim(body.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

// Effective settings in a fixed order, for echoing into outputs.
inline std::vector<std::pair<std::string, std::string>> config_items(const RunConfig& c) {
  return {
      {"r0", format_double(c.params.r0)},
      {"f_b", format_double(c.params.f_b)},
      {"eta_p", format_double(c.params.eta_p)},
      {"eta_c", format_double(c.params.eta_c)},
      {"t_group", format_double(c.params.t_group)},
      {"lock", c.params.lock == Quadrature::X ? "X" : "P"},
      {"s_elec", format_double(c.params.s_elec)},
      {"f_hp", format_double(c.params.f_hp)},
      {"adc_bits", std::to_string(c.params.adc_bits)},
      {"adc_fullscale", format_double(c.params.adc_fullscale)},
      {"lock_phase_rms", format_double(c.params.lock_phase_rms)},
      {"fs", format_double(c.fs)},
      {"n", std::to_string(c.n)},
  };
}

}  // namespace tmsq
