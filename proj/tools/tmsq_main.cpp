#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "tmsq/tmsq.hpp"

namespace {

using tmsq::CombineMode;
using tmsq::CsvTable;
using tmsq::RunConfig;
using tmsq::SpectrumOptions;
using tmsq::TraceSet;

struct Global {
  int threads = 0;
  std::string config_path;
  std::vector<std::string> sets;
};

// defaults < config file (explicit path or TMSQ_CONFIG) < --set overrides.
RunConfig effective_config(const Global& g, const std::string& positional = {}) {
  RunConfig cfg;
  if (!positional.empty() && !g.config_path.empty())
    throw tmsq::ConfigError("config: both a positional config and --config given");
  std::string path = !positional.empty() ? positional : g.config_path;
  if (path.empty())
    if (const char* env = std::getenv("TMSQ_CONFIG"); env && *env) path = env;
  if (!path.empty()) tmsq::load_config_file(cfg, path);
  for (const std::string& kv : g.sets) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos)
      throw tmsq::ConfigError("--set expects key=value, got '" + kv + "'");
    tmsq::apply_setting(cfg, tmsq::trim(kv.substr(0, eq)),
                        tmsq::trim(kv.substr(eq + 1)));
  }
  return cfg;
}

CombineMode parse_mode(const std::string& s) {
  if (s == "difference") return CombineMode::difference;
  if (s == "sum") return CombineMode::sum;
  throw tmsq::ConfigError("--mode must be difference or sum, got '" + s + "'");
}

tmsq::Window parse_window(const std::string& s) {
  if (s == "rect") return tmsq::Window::rect;
  if (s == "hann") return tmsq::Window::hann;
  throw tmsq::ConfigError("--window must be rect or hann, got '" + s + "'");
}

std::pair<double, double> parse_band(const std::string& s) {
  const std::size_t colon = s.find(':');
  if (colon == std::string::npos)
    throw tmsq::ConfigError("--band expects lo:hi in Hz, got '" + s + "'");
  try {
    const double lo = tmsq::parse_double(s.substr(0, colon));
    const double hi = tmsq::parse_double(s.substr(colon + 1));
    return {lo, hi};
  } catch (const std::invalid_argument&) {
    throw tmsq::ConfigError("--band expects lo:hi in Hz, got '" + s + "'");
  }
}

// Synthesis settings recorded in a trace, echoed into analysis outputs.
std::vector<std::pair<std::string, std::string>> meta_echo(const TraceSet& ts) {
  static const char* keys[] = {"seed",   "r0",       "f_b",
                               "eta_p",  "eta_c",    "t_group",
                               "lock",   "s_elec",   "f_hp",
                               "adc_bits", "adc_fullscale", "lock_phase_rms",
                               "fs",     "n"};
  std::vector<std::pair<std::string, std::string>> out;
  for (const char* k : keys)
    if (const auto it = ts.meta.find(k); it != ts.meta.end())
      out.emplace_back(k, it->second);
  return out;
}

double meta_t_group(const TraceSet& ts) {
  const auto it = ts.meta.find("t_group");
  return it != ts.meta.end() ? tmsq::parse_double(it->second) : 0.0;
}

TraceSet load_input(const std::string& path) {
  if (!std::filesystem::exists(path))
    throw tmsq::StoreError(tmsq::StoreError::Kind::io, "no such file: " + path);
  return tmsq::read_trace(path);
}

void add_row(CsvTable& t, std::initializer_list<std::string> cells) {
  t.rows.emplace_back(cells);
}

// ---- synth ----------------------------------------------------------------

struct SynthArgs {
  std::string positional_config;
  std::string out = "traces.tmsq";
  std::uint64_t seed = 1;
};

void cmd_synth(const Global& g, const SynthArgs& a) {
  const RunConfig cfg = effective_config(g, a.positional_config);
  const TraceSet ts = tmsq::synthesize(cfg.params, cfg.fs, cfg.n, a.seed);
  const bool codes = cfg.params.adc_bits >= 1 && cfg.params.adc_bits <= 15;
  const auto format = codes ? tmsq::SampleFormat::i16 : tmsq::SampleFormat::f64;
  tmsq::write_trace(ts, a.out, format);
  std::cout << "wrote " << a.out << ": n=" << ts.n() << " fs=" << cfg.fs
            << " format=" << (codes ? "i16" : "f64") << "\n";
}

// ---- spectrum ---------------------------------------------------------------

struct SpectrumArgs {
  std::string in;
  std::string out = "spectrum.csv";
  std::string mode = "difference";
  std::string window = "rect";
  double delay_ns = 0.0;
  double overlap = 0.0;
  std::size_t segment = 1024;
  bool subtract_dark = false;
};

void cmd_spectrum(const SpectrumArgs& a) {
  const TraceSet ts = load_input(a.in);
  SpectrumOptions opt;
  opt.mode = parse_mode(a.mode);
  opt.window = parse_window(a.window);
  opt.t_extra = a.delay_ns * 1e-9;
  opt.overlap = a.overlap;
  opt.segment = a.segment;
  opt.subtract_dark = a.subtract_dark;
  const tmsq::SqueezingSpectrum s = tmsq::squeezing_spectrum(ts, opt);

  CsvTable t;
  t.comments = meta_echo(ts);
  t.comments.emplace_back("mode", a.mode);
  t.comments.emplace_back("delay_ns", tmsq::format_double(a.delay_ns));
  t.comments.emplace_back("segment", std::to_string(a.segment));
  t.comments.emplace_back("window", a.window);
  t.comments.emplace_back("overlap", tmsq::format_double(a.overlap));
  t.comments.emplace_back("subtract_dark", a.subtract_dark ? "1" : "0");
  t.columns = {"frequency_hz", "value", "unit"};
  for (std::size_t j = 0; j < s.frequency.size(); ++j)
    add_row(t, {tmsq::format_double(s.frequency[j]), tmsq::format_double(s.db[j]), "dB"});
  tmsq::write_csv(a.out, t);
  std::cout << "wrote " << a.out << ": " << t.rows.size() << " bins\n";
}

// ---- delayscan --------------------------------------------------------------

struct DelayScanArgs {
  std::string in;
  std::string out = "delayscan.csv";
  std::string band = "0.5e6:15e6";
  std::string mode = "difference";
  double window_ns = 50.0;
  std::size_t segment = 1024;
  bool subtract_dark = false;
  bool maximize = false;
};

void cmd_delayscan(const DelayScanArgs& a) {
  const TraceSet ts = load_input(a.in);
  const auto [lo, hi] = parse_band(a.band);
  if (!(a.window_ns > 0.0))
    throw tmsq::ConfigError("--window must be positive (nanoseconds)");
  SpectrumOptions opt;
  opt.mode = parse_mode(a.mode);
  opt.segment = a.segment;
  opt.subtract_dark = a.subtract_dark;
  const double w = a.window_ns * 1e-9;
  const tmsq::DelayScanResult r =
      tmsq::optimize_delay(ts, lo, hi, -w, w, opt, a.maximize);

  CsvTable t;
  t.comments = meta_echo(ts);
  t.comments.emplace_back("band_lo_hz", tmsq::format_double(lo));
  t.comments.emplace_back("band_hi_hz", tmsq::format_double(hi));
  t.comments.emplace_back("mode", a.mode);
  t.comments.emplace_back("segment", std::to_string(a.segment));
  t.comments.emplace_back("best_delay_s", tmsq::format_double(r.best_delay));
  t.comments.emplace_back("best_db", tmsq::format_double(r.best_db));
  t.columns = {"delay_s", "value", "unit"};
  for (std::size_t i = 0; i < r.scan_delay.size(); ++i)
    add_row(t, {tmsq::format_double(r.scan_delay[i]),
                tmsq::format_double(r.scan_db[i]), "dB"});
  tmsq::write_csv(a.out, t);
  std::cout << "best_delay_ns=" << tmsq::format_double(r.best_delay * 1e9)
            << " best_db=" << tmsq::format_double(r.best_db) << "\n";
}

// ---- binscan ----------------------------------------------------------------

struct BinScanArgs {
  std::string in;
  std::string out = "binscan.csv";
  double probe_center = 1e6;
  double bin_width = 200e3;
  double max_spacing = 2.0;
  double spacing_step = 0.25;
  double delay_ns = 0.0;
  bool delay_given = false;
  std::size_t blocks = 32;
};

void cmd_binscan(const BinScanArgs& a) {
  const TraceSet ts = load_input(a.in);
  // Default to the group delay recorded with the trace so the cross term
  // is compensated.
  const double tau = a.delay_given ? a.delay_ns * 1e-9 : meta_t_group(ts);
  const tmsq::CovarianceScan scan = tmsq::qumode_scan(
      ts, a.probe_center, a.bin_width, a.max_spacing, tau, a.spacing_step, a.blocks);

  CsvTable t;
  t.comments = meta_echo(ts);
  t.comments.emplace_back("probe_center_hz", tmsq::format_double(a.probe_center));
  t.comments.emplace_back("bin_width_hz", tmsq::format_double(a.bin_width));
  t.comments.emplace_back("delay_s", tmsq::format_double(tau));
  t.comments.emplace_back("blocks", std::to_string(a.blocks));
  t.comments.emplace_back("shot_level", tmsq::format_double(scan.shot_level));
  t.comments.emplace_back("dark_level", tmsq::format_double(scan.dark_level));
  t.columns = {"spacing", "value", "unit", "stderr"};
  for (std::size_t i = 0; i < scan.spacing.size(); ++i)
    add_row(t, {tmsq::format_double(scan.spacing[i]), tmsq::format_double(scan.value[i]),
                "normalized", tmsq::format_double(scan.std_error[i])});
  tmsq::write_csv(a.out, t);
  std::cout << "wrote " << a.out << ": " << t.rows.size() << " spacings\n";
}

// ---- lowfreq ----------------------------------------------------------------

struct LowFreqArgs {
  std::string in;
  std::string out = "lowfreq.csv";
  double f_max = 50.0;
  double delay_ns = 0.0;
  bool subtract_dark = false;
};

void cmd_lowfreq(const LowFreqArgs& a) {
  const TraceSet ts = load_input(a.in);
  const tmsq::LowFreqSpectrum s =
      tmsq::lowfreq_spectrum(ts, a.delay_ns * 1e-9, a.f_max, a.subtract_dark);

  CsvTable t;
  t.comments = meta_echo(ts);
  t.comments.emplace_back("f_max_hz", tmsq::format_double(a.f_max));
  t.comments.emplace_back("delay_ns", tmsq::format_double(a.delay_ns));
  t.comments.emplace_back("subtract_dark", a.subtract_dark ? "1" : "0");
  t.comments.emplace_back("dark_level", tmsq::format_double(s.dark_level));
  t.columns = {"frequency_hz", "value", "unit"};
  for (std::size_t j = 0; j < s.frequency.size(); ++j)
    add_row(t, {tmsq::format_double(s.frequency[j]), tmsq::format_double(s.db[j]), "dB"});
  tmsq::write_csv(a.out, t);
  std::cout << "wrote " << a.out << ": " << t.rows.size() << " bins\n";
}

// ---- figure -----------------------------------------------------------------

struct FigureArgs {
  std::string which;
  std::string outdir = ".";
  std::uint64_t seed = 1;
};

std::string join(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

void write_raw_psd_csv(const std::string& path,
                       const std::vector<std::pair<std::string, std::string>>& comments,
                       const std::vector<double>& freq, const std::vector<double>& psd) {
  CsvTable t;
  t.comments = comments;
  t.columns = {"frequency_hz", "value", "unit"};
  for (std::size_t j = 0; j < freq.size(); ++j)
    add_row(t, {tmsq::format_double(freq[j]), tmsq::format_double(psd[j]), "per_hz"});
  tmsq::write_csv(path, t);
}

void write_db_csv(const std::string& path,
                  const std::vector<std::pair<std::string, std::string>>& comments,
                  const std::vector<double>& freq, const std::vector<double>& db) {
  CsvTable t;
  t.comments = comments;
  t.columns = {"frequency_hz", "value", "unit"};
  for (std::size_t j = 0; j < freq.size(); ++j)
    add_row(t, {tmsq::format_double(freq[j]), tmsq::format_double(db[j]), "dB"});
  tmsq::write_csv(path, t);
}

// Raw noise-power spectra: shot level, the combined difference with no
// compensation, at the optimum delay, the antisqueezed sum, and with an
// extra 200 ns that imprints 5 MHz fringes.
void figure_fig2(const FigureArgs& a) {
  const RunConfig cfg;
  const TraceSet ts = tmsq::synthesize(cfg.params, cfg.fs, cfg.n, a.seed);
  const auto base_comments = [&](double delay_s) {
    auto c = meta_echo(ts);
    c.emplace_back("segment", "1024");
    c.emplace_back("delay_s", tmsq::format_double(delay_s));
    return c;
  };
  const auto raw = [&](CombineMode m, double tau) {
    SpectrumOptions o;
    o.mode = m;
    o.t_extra = tau;
    return tmsq::squeezing_spectrum(ts, o);
  };

  const tmsq::SqueezingSpectrum plain = raw(CombineMode::difference, 0.0);
  SpectrumOptions scan_opt;
  const tmsq::DelayScanResult best =
      tmsq::optimize_delay(ts, 0.5e6, 15e6, -50e-9, 50e-9, scan_opt);
  const tmsq::SqueezingSpectrum opt = raw(CombineMode::difference, best.best_delay);
  const tmsq::SqueezingSpectrum anti = raw(CombineMode::sum, best.best_delay);
  const tmsq::SqueezingSpectrum fringe =
      raw(CombineMode::difference, best.best_delay + 200e-9);

  write_raw_psd_csv(join(a.outdir, "fig2_shot.csv"), base_comments(0.0),
                    plain.frequency, plain.shot_psd);
  write_raw_psd_csv(join(a.outdir, "fig2_delay_default.csv"), base_comments(0.0),
                    plain.frequency, plain.signal_psd);
  write_raw_psd_csv(join(a.outdir, "fig2_delay_optimum.csv"),
                    base_comments(best.best_delay), opt.frequency, opt.signal_psd);
  write_raw_psd_csv(join(a.outdir, "fig2_antisqueezing.csv"),
                    base_comments(best.best_delay), anti.frequency, anti.signal_psd);
  write_raw_psd_csv(join(a.outdir, "fig2_delay_200ns.csv"),
                    base_comments(best.best_delay + 200e-9), fringe.frequency,
                    fringe.signal_psd);
}

// Dark-subtracted squeezing and antisqueezing in dB for both lock points.
void figure_fig3(const FigureArgs& a) {
  for (const bool x_lock : {true, false}) {
    RunConfig cfg;
    cfg.params.lock = x_lock ? tmsq::Quadrature::X : tmsq::Quadrature::P;
    const std::uint64_t seed = x_lock ? a.seed : a.seed + 1;
    const TraceSet ts = tmsq::synthesize(cfg.params, cfg.fs, cfg.n, seed);
    const CombineMode squeezed_mode =
        x_lock ? CombineMode::difference : CombineMode::sum;
    const CombineMode anti_mode = x_lock ? CombineMode::sum : CombineMode::difference;

    SpectrumOptions scan_opt;
    scan_opt.mode = squeezed_mode;
    scan_opt.subtract_dark = true;
    const tmsq::DelayScanResult best =
        tmsq::optimize_delay(ts, 0.5e6, 15e6, -50e-9, 50e-9, scan_opt);

    const auto spec = [&](CombineMode m) {
      SpectrumOptions o;
      o.mode = m;
      o.t_extra = best.best_delay;
      o.subtract_dark = true;
      return tmsq::squeezing_spectrum(ts, o);
    };
    const tmsq::SqueezingSpectrum sq = spec(squeezed_mode);
    const tmsq::SqueezingSpectrum anti = spec(anti_mode);

    auto comments = meta_echo(ts);
    comments.emplace_back("delay_s", tmsq::format_double(best.best_delay));
    comments.emplace_back("subtract_dark", "1");
    const std::string prefix = x_lock ? "fig3x" : "fig3p";
    write_db_csv(join(a.outdir, prefix + "_squeezing.csv"), comments, sq.frequency,
                 sq.db);
    write_db_csv(join(a.outdir, prefix + "_antisqueezing.csv"), comments,
                 anti.frequency, anti.db);
  }
}

// Ten-second DC-coupled acquisition analyzed as one periodogram.
void figure_fig4(const FigureArgs& a) {
  RunConfig cfg;
  cfg.fs = 1.6384e6;
  cfg.n = std::size_t{1} << 24;
  cfg.params.f_hp = 0.0;
  cfg.params.s_elec = 0.0;
  cfg.params.adc_bits = 0;
  const TraceSet ts = tmsq::synthesize(cfg.params, cfg.fs, cfg.n, a.seed);
  const tmsq::LowFreqSpectrum s = tmsq::lowfreq_spectrum(ts, 0.0, 50.0, false);
  auto comments = meta_echo(ts);
  comments.emplace_back("f_max_hz", "50");
  write_db_csv(join(a.outdir, "fig4_spectrum.csv"), comments, s.frequency, s.db);
}

// Normalized probe/conjugate covariance versus bin separation, four widths.
void figure_fig5(const FigureArgs& a) {
  const auto write_scan = [&](const TraceSet& ts, double center, double width,
                              const std::string& name) {
    const tmsq::CovarianceScan scan =
        tmsq::qumode_scan(ts, center, width, 2.0, meta_t_group(ts));
    CsvTable t;
    t.comments = meta_echo(ts);
    t.comments.emplace_back("probe_center_hz", tmsq::format_double(center));
    t.comments.emplace_back("bin_width_hz", tmsq::format_double(width));
    t.comments.emplace_back("shot_level", tmsq::format_double(scan.shot_level));
    t.columns = {"spacing", "value", "unit", "stderr"};
    for (std::size_t i = 0; i < scan.spacing.size(); ++i)
      add_row(t, {tmsq::format_double(scan.spacing[i]),
                  tmsq::format_double(scan.value[i]), "normalized",
                  tmsq::format_double(scan.std_error[i])});
    tmsq::write_csv(join(a.outdir, name), t);
  };

  {
    const RunConfig cfg;
    const TraceSet ts = tmsq::synthesize(cfg.params, cfg.fs, cfg.n, a.seed);
    write_scan(ts, 1e6, 200e3, "fig5_200khz.csv");
    write_scan(ts, 1e6, 50e3, "fig5_50khz.csv");
    write_scan(ts, 1e6, 1e3, "fig5_1khz.csv");
  }
  {
    RunConfig cfg;
    cfg.fs = 65536.0;
    cfg.n = std::size_t{1} << 21;
    cfg.params.f_hp = 0.0;
    const TraceSet ts = tmsq::synthesize(cfg.params, cfg.fs, cfg.n, a.seed + 1);
    write_scan(ts, 8000.0, 5.0, "fig5_5hz.csv");
  }
}

void cmd_figure(const FigureArgs& a) {
  std::filesystem::create_directories(a.outdir);
  if (a.which == "fig2") figure_fig2(a);
  else if (a.which == "fig3") figure_fig3(a);
  else if (a.which == "fig4") figure_fig4(a);
  else if (a.which == "fig5") figure_fig5(a);
  else throw tmsq::ConfigError("figure: unknown preset '" + a.which + "'");
  std::cout << "wrote " << a.which << " data to " << a.outdir << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"two-mode squeezed vacuum: synthesis and homodyne analysis"};
  app.require_subcommand(1);
  app.fallthrough();

  Global g;
  app.add_option("--threads", g.threads, "worker threads (0 = auto); never affects results");
  app.add_option("--config", g.config_path, "config file with key=value lines");
  app.add_option("--set", g.sets, "override a config key, e.g. --set r0=0.5")
      ->take_all();

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "generate a trace file");
  c_synth->add_option("config", synth.positional_config, "config file");
  c_synth->add_option("--seed", synth.seed, "RNG seed");
  c_synth->add_option("--out", synth.out, "output trace path");

  SpectrumArgs spec;
  auto* c_spec = app.add_subcommand("spectrum", "squeezing spectrum from a trace");
  c_spec->add_option("--in", spec.in, "input trace")->required();
  c_spec->add_option("--mode", spec.mode, "difference|sum");
  c_spec->add_option("--delay-ns", spec.delay_ns, "extra conjugate delay (ns)");
  c_spec->add_option("--segment", spec.segment, "Welch segment length");
  c_spec->add_option("--window", spec.window, "rect|hann");
  c_spec->add_option("--overlap", spec.overlap, "segment overlap fraction");
  c_spec->add_flag("--subtract-dark", spec.subtract_dark, "subtract the dark spectrum");
  c_spec->add_option("--out", spec.out, "output CSV path");

  DelayScanArgs dscan;
  auto* c_dscan = app.add_subcommand("delayscan", "find the optimum conjugate delay");
  c_dscan->add_option("--in", dscan.in, "input trace")->required();
  c_dscan->add_option("--band", dscan.band, "analysis band lo:hi in Hz");
  c_dscan->add_option("--window", dscan.window_ns, "scan half-width in ns");
  c_dscan->add_option("--mode", dscan.mode, "difference|sum");
  c_dscan->add_option("--segment", dscan.segment, "Welch segment length");
  c_dscan->add_flag("--subtract-dark", dscan.subtract_dark, "subtract the dark spectrum");
  c_dscan->add_flag("--maximize", dscan.maximize, "seek the band-mean maximum");
  c_dscan->add_option("--out", dscan.out, "output CSV path");

  BinScanArgs bscan;
  auto* c_bscan = app.add_subcommand("binscan", "covariance vs bin separation");
  c_bscan->add_option("--in", bscan.in, "input trace")->required();
  c_bscan->add_option("--probe-center", bscan.probe_center, "probe bin center (Hz)");
  c_bscan->add_option("--bin-width", bscan.bin_width, "bin width (Hz)");
  c_bscan->add_option("--max-spacing", bscan.max_spacing, "last spacing, in bin widths");
  c_bscan->add_option("--spacing-step", bscan.spacing_step, "spacing grid step");
  auto* delay_opt =
      c_bscan->add_option("--delay-ns", bscan.delay_ns,
                          "conjugate delay (ns); default: t_group from the trace");
  c_bscan->add_option("--blocks", bscan.blocks, "jackknife blocks");
  c_bscan->add_option("--out", bscan.out, "output CSV path");

  LowFreqArgs lf;
  auto* c_lf = app.add_subcommand("lowfreq", "single-periodogram low-frequency spectrum");
  c_lf->add_option("--in", lf.in, "input trace")->required();
  c_lf->add_option("--fmax", lf.f_max, "highest output frequency (Hz)");
  c_lf->add_option("--delay-ns", lf.delay_ns, "extra conjugate delay (ns)");
  c_lf->add_flag("--subtract-dark", lf.subtract_dark, "subtract the scalar dark level");
  c_lf->add_option("--out", lf.out, "output CSV path");

  FigureArgs fig;
  auto* c_fig = app.add_subcommand("figure", "canned demonstration datasets");
  c_fig->add_option("preset", fig.which, "fig2|fig3|fig4|fig5")
      ->required()
      ->check(CLI::IsMember({"fig2", "fig3", "fig4", "fig5"}));
  c_fig->add_option("--seed", fig.seed, "RNG seed");
  c_fig->add_option("--outdir", fig.outdir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    tmsq::set_worker_count(g.threads);
    bscan.delay_given = delay_opt->count() > 0;
    if (c_synth->parsed()) cmd_synth(g, synth);
    if (c_spec->parsed()) cmd_spectrum(spec);
    if (c_dscan->parsed()) cmd_delayscan(dscan);
    if (c_bscan->parsed()) cmd_binscan(bscan);
    if (c_lf->parsed()) cmd_lowfreq(lf);
    if (c_fig->parsed()) cmd_figure(fig);
    return 0;
  } catch (const tmsq::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const tmsq::StoreError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
