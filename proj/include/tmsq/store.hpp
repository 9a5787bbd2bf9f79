#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tmsq/model.hpp"
#include "tmsq/trace.hpp"
#include "tmsq/util.hpp"

namespace tmsq {

static_assert(std::endian::native == std::endian::little,
              "trace files are little-endian; big-endian hosts are not supported");

// Trace container format:
//   "TMSQ" | u16 version | u8 channel_count | u8 sample_format |
//   f64 fs | u64 n | u32 meta_len | meta ("key=value\n" ...) |
//   planar channel data in canonical order.
// Formats: 1 = float64, 2 = float32, 3 = int16 ADC codes (needs adc_bits
// and adc_fullscale in the metadata; the saturation code +-2^(bits-1)
// reconstructs to exactly +-fullscale).
enum class SampleFormat : std::uint8_t { f64 = 1, f32 = 2, i16 = 3 };

struct StoreError : std::runtime_error {
  enum class Kind { io, bad_magic, bad_version, truncated, inconsistent };
  Kind kind;
  StoreError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

namespace detail {

constexpr char k_magic[4] = {'T', 'M', 'S', 'Q'};
constexpr std::uint16_t k_version = 1;

// Canonical channel order in the file.
inline const std::vector<std::string>& channel_names() {
  static const std::vector<std::string> names = {
      "probe", "conjugate", "dark_probe", "dark_conjugate",
      "vacuum_probe", "vacuum_conjugate"};
  return names;
}

inline std::vector<const std::vector<double>*> channel_list(const TraceSet& ts) {
  return {&ts.probe, &ts.conjugate, &ts.dark_probe, &ts.dark_conjugate,
          &ts.vacuum_probe, &ts.vacuum_conjugate};
}

inline std::vector<std::vector<double>*> channel_list(TraceSet& ts) {
  return {&ts.probe, &ts.conjugate, &ts.dark_probe, &ts.dark_conjugate,
          &ts.vacuum_probe, &ts.vacuum_conjugate};
}

template <typename T>
void put(std::string& buf, const T& v) {
  const auto* p = reinterpret_cast<const char*>(&v);
  buf.append(p, sizeof(T));
}

inline std::string serialize_meta(const std::map<std::string, std::string>& meta) {
  std::string out;
  for (const auto& [k, v] : meta) {
    if (k.empty() || k.find('=') != std::string::npos ||
        k.find('\n') != std::string::npos || v.find('\n') != std::string::npos)
      throw std::invalid_argument("store: metadata keys must be nonempty and "
                                  "free of '=' and newlines");
    out += k;
    out += '=';
    out += v;
    out += '\n';
  }
  return out;
}

inline std::map<std::string, std::string> parse_meta(const std::string& text) {
  std::map<std::string, std::string> meta;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    const std::string line = text.substr(pos, nl - pos);
    pos = nl + 1;
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw StoreError(StoreError::Kind::inconsistent,
                       "store: malformed metadata line '" + line + "'");
    meta[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return meta;
}

inline int meta_adc_bits(const std::map<std::string, std::string>& meta) {
  const auto it = meta.find("adc_bits");
  if (it == meta.end())
    throw StoreError(StoreError::Kind::inconsistent,
                     "store: int16 format requires adc_bits metadata");
  return static_cast<int>(parse_int(it->second));
}

inline double meta_adc_fullscale(const std::map<std::string, std::string>& meta) {
  const auto it = meta.find("adc_fullscale");
  if (it == meta.end())
    throw StoreError(StoreError::Kind::inconsistent,
                     "store: int16 format requires adc_fullscale metadata");
  return parse_double(it->second);
}

}  // namespace detail

// Writes atomically: the data goes to a temporary in the same directory and
// is renamed into place.
inline void write_trace(const TraceSet& ts, const std::string& path,
                        SampleFormat format = SampleFormat::f64) {
  validate(ts);
  const std::size_t n = ts.n();

  const auto& names = detail::channel_names();
  const auto channels = detail::channel_list(ts);
  std::vector<std::size_t> present;
  std::string channel_csv;
  for (std::size_t i = 0; i < channels.size(); ++i) {
    if (channels[i]->empty()) continue;
    present.push_back(i);
    if (!channel_csv.empty()) channel_csv += ',';
    channel_csv += names[i];
  }

  std::map<std::string, std::string> meta = ts.meta;
  meta["channels"] = channel_csv;

  int bits = 0;
  double fullscale = 0.0, step = 0.0;
  std::int64_t clip_code = 0;
  if (format == SampleFormat::i16) {
    bits = detail::meta_adc_bits(meta);
    fullscale = detail::meta_adc_fullscale(meta);
    if (bits < 1 || bits > 15 || !(fullscale > 0.0))
      throw std::invalid_argument("store: int16 format needs adc_bits in [1, 15] "
                                  "and a positive adc_fullscale");
    step = adc_step(bits, fullscale);
    clip_code = std::int64_t{1} << (bits - 1);
    meta["adc_step"] = format_double(step);
  }

  std::string head;
  head.append(detail::k_magic, 4);
  detail::put(head, detail::k_version);
  detail::put(head, static_cast<std::uint8_t>(present.size()));
  detail::put(head, static_cast<std::uint8_t>(format));
  detail::put(head, ts.fs);
  detail::put(head, static_cast<std::uint64_t>(n));
  const std::string meta_text = detail::serialize_meta(meta);
  detail::put(head, static_cast<std::uint32_t>(meta_text.size()));
  head += meta_text;

  const std::filesystem::path target(path);
  const std::filesystem::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw StoreError(StoreError::Kind::io, "store: cannot open " + tmp.string());
    out.write(head.data(), static_cast<std::streamsize>(head.size()));

    std::vector<char> buf;
    for (const std::size_t ci : present) {
      const std::vector<double>& ch = *channels[ci];
      switch (format) {
        case SampleFormat::f64:
          out.write(reinterpret_cast<const char*>(ch.data()),
                    static_cast<std::streamsize>(n * sizeof(double)));
          break;
        case SampleFormat::f32: {
          buf.resize(n * sizeof(float));
          auto* p = reinterpret_cast<float*>(buf.data());
          for (std::size_t i = 0; i < n; ++i) p[i] = static_cast<float>(ch[i]);
          out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
          break;
        }
        case SampleFormat::i16: {
          buf.resize(n * sizeof(std::int16_t));
          auto* p = reinterpret_cast<std::int16_t*>(buf.data());
          for (std::size_t i = 0; i < n; ++i) {
            const auto code =
                static_cast<std::int64_t>(std::nearbyint(ch[i] / step));
            if (code > clip_code || code < -clip_code)
              throw std::invalid_argument(
                  "store: sample exceeds the int16 code range for " +
                  names[ci]);
            p[i] = static_cast<std::int16_t>(code);
          }
          out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
          break;
        }
      }
    }
    out.flush();
    if (!out) throw StoreError(StoreError::Kind::io, "store: write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, target, ec);
  if (ec) throw StoreError(StoreError::Kind::io, "store: rename failed: " + ec.message());
}

inline TraceSet read_trace(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StoreError(StoreError::Kind::io, "store: cannot open " + path);

  const auto need = [&](char* dst, std::size_t count, const char* what) {
    in.read(dst, static_cast<std::streamsize>(count));
    if (static_cast<std::size_t>(in.gcount()) != count)
      throw StoreError(StoreError::Kind::truncated,
                       std::string("store: truncated file while reading ") + what);
  };

  char magic[4];
  need(magic, 4, "magic");
  if (std::memcmp(magic, detail::k_magic, 4) != 0)
    throw StoreError(StoreError::Kind::bad_magic, "store: not a trace file: " + path);

  std::uint16_t version = 0;
  need(reinterpret_cast<char*>(&version), sizeof version, "version");
  if (version != detail::k_version)
    throw StoreError(StoreError::Kind::bad_version,
                     "store: unsupported version " + std::to_string(version));

  std::uint8_t channel_count = 0, format_raw = 0;
  need(reinterpret_cast<char*>(&channel_count), 1, "channel count");
  need(reinterpret_cast<char*>(&format_raw), 1, "sample format");
  if (format_raw < 1 || format_raw > 3)
    throw StoreError(StoreError::Kind::inconsistent,
                     "store: unknown sample format " + std::to_string(format_raw));
  const auto format = static_cast<SampleFormat>(format_raw);

  TraceSet ts;
  std::uint64_t n = 0;
  std::uint32_t meta_len = 0;
  need(reinterpret_cast<char*>(&ts.fs), sizeof ts.fs, "sample rate");
  need(reinterpret_cast<char*>(&n), sizeof n, "length");
  need(reinterpret_cast<char*>(&meta_len), sizeof meta_len, "metadata length");
  std::string meta_text(meta_len, '\0');
  if (meta_len > 0) need(meta_text.data(), meta_len, "metadata");
  ts.meta = detail::parse_meta(meta_text);

  const auto cit = ts.meta.find("channels");
  if (cit == ts.meta.end())
    throw StoreError(StoreError::Kind::inconsistent, "store: missing channels metadata");
  std::vector<std::string> listed;
  {
    const std::string& s = cit->second;
    std::size_t pos = 0;
    while (pos <= s.size() && !s.empty()) {
      std::size_t comma = s.find(',', pos);
      if (comma == std::string::npos) comma = s.size();
      listed.push_back(s.substr(pos, comma - pos));
      pos = comma + 1;
      if (pos > s.size()) break;
    }
  }
  if (listed.size() != channel_count)
    throw StoreError(StoreError::Kind::inconsistent,
                     "store: channel count does not match the channels metadata");

  double step = 0.0;
  std::int64_t clip_code = 0;
  double fullscale = 0.0;
  if (format == SampleFormat::i16) {
    const int bits = detail::meta_adc_bits(ts.meta);
    fullscale = detail::meta_adc_fullscale(ts.meta);
    if (bits < 1 || bits > 15 || !(fullscale > 0.0))
      throw StoreError(StoreError::Kind::inconsistent,
                       "store: bad adc metadata for int16 format");
    const auto sit = ts.meta.find("adc_step");
    step = sit != ts.meta.end() ? parse_double(sit->second) : adc_step(bits, fullscale);
    clip_code = std::int64_t{1} << (bits - 1);
  }

  const auto& names = detail::channel_names();
  auto channels = detail::channel_list(ts);
  std::vector<char> buf;
  for (const std::string& name : listed) {
    std::size_t ci = names.size();
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) ci = i;
    if (ci == names.size())
      throw StoreError(StoreError::Kind::inconsistent,
                       "store: unknown channel name '" + name + "'");
    std::vector<double>& ch = *channels[ci];
    if (!ch.empty())
      throw StoreError(StoreError::Kind::inconsistent,
                       "store: duplicate channel '" + name + "'");
    ch.resize(n);
    switch (format) {
      case SampleFormat::f64:
        need(reinterpret_cast<char*>(ch.data()), n * sizeof(double), name.c_str());
        break;
      case SampleFormat::f32: {
        buf.resize(n * sizeof(float));
        need(buf.data(), buf.size(), name.c_str());
        const auto* p = reinterpret_cast<const float*>(buf.data());
        for (std::size_t i = 0; i < n; ++i) ch[i] = static_cast<double>(p[i]);
        break;
      }
      case SampleFormat::i16: {
        buf.resize(n * sizeof(std::int16_t));
        need(buf.data(), buf.size(), name.c_str());
        const auto* p = reinterpret_cast<const std::int16_t*>(buf.data());
        for (std::size_t i = 0; i < n; ++i) {
          const std::int64_t code = p[i];
          if (code > clip_code || code < -clip_code)
            throw StoreError(StoreError::Kind::inconsistent,
                             "store: int16 code out of range in '" + name + "'");
          if (code == clip_code)
            ch[i] = fullscale;
          else if (code == -clip_code)
            ch[i] = -fullscale;
          else
            ch[i] = static_cast<double>(code) * step;
        }
        break;
      }
    }
  }
  // A trailing byte means the header lied about the payload.
  char extra;
  in.read(&extra, 1);
  if (in.gcount() != 0)
    throw StoreError(StoreError::Kind::inconsistent,
                     "store: trailing bytes after the last channel");

  try {
    validate(ts);
  } catch (const std::invalid_argument& e) {
    throw StoreError(StoreError::Kind::inconsistent, e.what());
  }
  return ts;
}

// Simple CSV with optional "# key=value" comment lines, a header row, and
// string cells (numbers are written with %.17g so they round-trip).
struct CsvTable {
  std::vector<std::pair<std::string, std::string>> comments;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

inline void write_csv(const std::string& path, const CsvTable& t) {
  if (t.columns.empty()) throw std::invalid_argument("csv: no columns");
  const std::filesystem::path target(path);
  const std::filesystem::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw StoreError(StoreError::Kind::io, "csv: cannot open " + tmp.string());
    for (const auto& [k, v] : t.comments) out << "# " << k << '=' << v << '\n';
    for (std::size_t i = 0; i < t.columns.size(); ++i) {
      if (i) out << ',';
      out << t.columns[i];
    }
    out << '\n';
    for (const auto& row : t.rows) {
      if (row.size() != t.columns.size())
        throw std::invalid_argument("csv: row width does not match the header");
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out << ',';
        out << row[i];
      }
      out << '\n';
    }
    out.flush();
    if (!out) throw StoreError(StoreError::Kind::io, "csv: write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, target, ec);
  if (ec) throw StoreError(StoreError::Kind::io, "csv: rename failed: " + ec.message());
}

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StoreError(StoreError::Kind::io, "csv: cannot open " + path);
  CsvTable t;
  std::string line;
  bool have_header = false;
  const auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::size_t pos = 0;
    while (true) {
      std::size_t comma = s.find(',', pos);
      if (comma == std::string::npos) {
        cells.push_back(s.substr(pos));
        break;
      }
      cells.push_back(s.substr(pos, comma - pos));
      pos = comma + 1;
    }
    return cells;
  };
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::string body = line.substr(1);
      if (!body.empty() && body[0] == ' ') body.erase(0, 1);
      const std::size_t eq = body.find('=');
      if (eq != std::string::npos)
        t.comments.emplace_back(body.substr(0, eq), body.substr(eq + 1));
      continue;
    }
    if (!have_header) {
      t.columns = split(line);
      have_header = true;
      continue;
    }
    t.rows.push_back(split(line));
  }
  if (!have_header) throw StoreError(StoreError::Kind::truncated, "csv: no header row in " + path);
  return t;
}

}  // namespace tmsq
