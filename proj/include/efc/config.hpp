#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "efc/loop.hpp"
#include "efc/trace_io.hpp"

namespace efc {

// Flat key = value configuration with dotted section prefixes. Blank
// lines and '#' comments are skipped; unknown keys are hard errors.

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline double parse_num(const std::string& value, const std::string& key) {
  return parse_double(value, key.c_str());
}

inline long parse_long(const std::string& value, const std::string& key) {
  std::size_t pos = 0;
  long v = 0;
  try {
    v = std::stol(value, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument(key + ": bad integer '" + value + "'");
  }
  if (pos != value.size()) {
    throw std::invalid_argument(key + ": bad integer '" + value + "'");
  }
  return v;
}

/// A scalar broadcasts to all channels; otherwise exactly 16
/// comma-separated values.
inline ChannelVector parse_channel_vector(const std::string& value,
                                          const std::string& key) {
  std::vector<double> vals;
  std::stringstream ss(value);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    vals.push_back(parse_num(trim(cell), key));
  }
  if (vals.size() == 1) return ChannelVector::Constant(vals[0]);
  if (vals.size() == kChannelCount) {
    ChannelVector v;
    for (int i = 0; i < kChannelCount; ++i) v[i] = vals[i];
    return v;
  }
  throw std::invalid_argument(key + ": expected 1 or 16 values, got " +
                              std::to_string(vals.size()));
}

struct ParseFlags {
  bool unit_scale_set = false;
};

inline void apply_kv(LoopConfig& cfg, ParseFlags& flags, const std::string& key,
                     const std::string& value) {
  if (key == "dt") {
    cfg.dt = parse_num(value, key);
    if (!(cfg.dt > 0.0) || !std::isfinite(cfg.dt)) {
      throw std::invalid_argument("dt: must be > 0");
    }
  } else if (key == "n_steps") {
    cfg.n_steps = parse_long(value, key);
    if (cfg.n_steps < 1) throw std::invalid_argument("n_steps: must be >= 1");
  } else if (key == "mode") {
    if (value == "float") cfg.mode = LoopMode::floating;
    else if (value == "fixed") cfg.mode = LoopMode::fixed;
    else if (value == "both") cfg.mode = LoopMode::both;
    else throw std::invalid_argument("mode: expected float|fixed|both, got '" + value + "'");
  } else if (key == "seed") {
    try {
      cfg.seed = std::stoull(value);
    } catch (const std::exception&) {
      throw std::invalid_argument("seed: bad integer '" + value + "'");
    }
  } else if (key == "adc.full_scale") {
    cfg.adc.full_scale = parse_num(value, key);
  } else if (key == "adc.stage1_gain") {
    cfg.adc.stage1_gain = parse_num(value, key);
  } else if (key == "adc.stage2_gain") {
    cfg.adc.stage2_gain = parse_num(value, key);
  } else if (key == "adc.noise_rms") {
    cfg.adc.noise_rms = parse_num(value, key);
  } else if (key == "dac.out_min") {
    cfg.dac.out_min = parse_num(value, key);
  } else if (key == "dac.out_max") {
    cfg.dac.out_max = parse_num(value, key);
  } else if (key == "dac.amp_gain_v") {
    cfg.dac.amp_gain_v = parse_num(value, key);
  } else if (key == "matrix.diag") {
    cfg.matrix.diag = parse_num(value, key);
  } else if (key == "matrix.off1") {
    cfg.matrix.off1 = parse_num(value, key);
  } else if (key == "matrix.off2") {
    cfg.matrix.off2 = parse_num(value, key);
  } else if (key == "correction.v") {
    cfg.correction.v = parse_num(value, key);
  } else if (key == "correction.unit_scale") {
    cfg.correction.unit_scale = parse_num(value, key);
    flags.unit_scale_set = true;
  } else if (key == "correction.beta_r") {
    cfg.correction.beta_r = parse_channel_vector(value, key);
  } else if (key == "correction.alpha0") {
    cfg.correction.alpha0 = parse_channel_vector(value, key);
  } else if (key == "pid.kp") {
    cfg.pid.kp = parse_channel_vector(value, key);
  } else if (key == "pid.ti") {
    cfg.pid.ti = parse_channel_vector(value, key);
  } else if (key == "pid.td") {
    cfg.pid.td = parse_channel_vector(value, key);
  } else if (key == "pid.output_min") {
    cfg.pid.output_min = parse_num(value, key);
  } else if (key == "pid.output_max") {
    cfg.pid.output_max = parse_num(value, key);
  } else if (key == "plant.resistance") {
    cfg.plant.resistance = parse_num(value, key);
  } else if (key == "plant.sense_gain") {
    cfg.plant.sense_gain = parse_num(value, key);
  } else if (key == "plant.dist") {
    if (value == "none") cfg.plant.disturbance.kind = DisturbanceKind::none;
    else if (value == "step") cfg.plant.disturbance.kind = DisturbanceKind::step;
    else if (value == "ramp") cfg.plant.disturbance.kind = DisturbanceKind::ramp;
    else if (value == "sine") cfg.plant.disturbance.kind = DisturbanceKind::sine;
    else if (value == "file") cfg.plant.disturbance.kind = DisturbanceKind::file;
    else {
      throw std::invalid_argument(
          "plant.dist: expected none|step|ramp|sine|file, got '" + value + "'");
    }
  } else if (key == "plant.dist_amplitude") {
    cfg.plant.disturbance.amplitude = parse_num(value, key);
  } else if (key == "plant.dist_tstart") {
    cfg.plant.disturbance.t_start = parse_num(value, key);
  } else if (key == "plant.dist_freq") {
    cfg.plant.disturbance.freq_hz = parse_num(value, key);
  } else if (key == "plant.dist_channel") {
    const long ch = parse_long(value, key);
    if (ch < -1 || ch >= kChannelCount) {
      throw std::invalid_argument("plant.dist_channel: must be -1..15");
    }
    cfg.plant.disturbance.channel = static_cast<int>(ch);
  } else if (key == "plant.dist_file") {
    cfg.plant.disturbance.file_path = value;
  } else if (key == "link.bitrate") {
    cfg.link.bitrate = parse_num(value, key);
  } else if (key == "link.fixed_latency") {
    cfg.link.fixed_latency = parse_num(value, key);
  } else if (key == "link.drop_prob") {
    cfg.link.drop_prob = parse_num(value, key);
  } else {
    throw std::invalid_argument("unknown config key '" + key + "'");
  }
}

inline void apply_line(LoopConfig& cfg, ParseFlags& flags,
                       const std::string& raw, const char* where) {
  std::string line = raw;
  const std::size_t hash = line.find('#');
  if (hash != std::string::npos) line.erase(hash);
  line = trim(line);
  if (line.empty()) return;
  const std::size_t eq = line.find('=');
  if (eq == std::string::npos) {
    throw std::invalid_argument(std::string(where) + ": expected key = value, got '" +
                                line + "'");
  }
  apply_kv(cfg, flags, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
}

/// Loads a `t,ch0,...,ch15` disturbance table; rows must be ascending in t.
inline void load_disturbance_file(Disturbance& d) {
  std::ifstream f(d.file_path);
  if (!f) {
    throw std::invalid_argument("plant.dist_file: cannot open '" + d.file_path + "'");
  }
  std::string line;
  if (!std::getline(f, line)) {
    throw std::invalid_argument("plant.dist_file: empty file");
  }
  std::string expect = "t";
  for (int i = 0; i < kChannelCount; ++i) expect += ",ch" + std::to_string(i);
  if (trim(line) != expect) {
    throw std::invalid_argument("plant.dist_file: bad header, expected '" + expect + "'");
  }
  d.file_times.clear();
  d.file_values.clear();
  while (std::getline(f, line)) {
    line = trim(line);
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) {
      row.push_back(parse_num(trim(cell), "plant.dist_file row"));
    }
    if (row.size() != 1 + kChannelCount) {
      throw std::invalid_argument("plant.dist_file: row needs 17 columns");
    }
    if (!d.file_times.empty() && row[0] <= d.file_times.back()) {
      throw std::invalid_argument("plant.dist_file: times must be ascending");
    }
    d.file_times.push_back(row[0]);
    ChannelVector v;
    for (int i = 0; i < kChannelCount; ++i) v[i] = row[1 + i];
    d.file_values.push_back(v);
  }
}

inline void finalize(LoopConfig& cfg, const ParseFlags& flags) {
  if (!flags.unit_scale_set) {
    if (!(cfg.matrix.diag > 0.0)) {
      throw std::invalid_argument(
          "matrix.diag: must be > 0 unless correction.unit_scale is given");
    }
    cfg.correction.unit_scale = 1.0 / cfg.matrix.diag;
  }
  if (cfg.plant.disturbance.kind == DisturbanceKind::file) {
    load_disturbance_file(cfg.plant.disturbance);
  }
  cfg.validate();
}

}  // namespace detail

/// Parses a config file and applies command-line `key=value` overrides on
/// top of it, in order. The file must exist but may be empty.
inline LoopConfig parse_config(const std::string& path,
                               const std::vector<std::string>& overrides = {}) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("config file not found: '" + path + "'");
  LoopConfig cfg;
  detail::ParseFlags flags;
  std::string line;
  while (std::getline(f, line)) {
    detail::apply_line(cfg, flags, line, path.c_str());
  }
  for (const std::string& ov : overrides) {
    detail::apply_line(cfg, flags, ov, "override");
  }
  detail::finalize(cfg, flags);
  return cfg;
}

/// The full default block; feeding this back as a config file reproduces
/// the default run exactly.
inline std::string print_defaults() {
  const LoopConfig d;
  std::ostringstream os;
  const auto num = [](double x) { return format_double(x); };
  os << "# closed-loop defaults; every recognized key with its default value\n";
  os << "dt = " << num(d.dt) << '\n';
  os << "n_steps = " << d.n_steps << '\n';
  os << "mode = float\n";
  os << "seed = " << d.seed << '\n';
  os << '\n';
  os << "adc.full_scale = " << num(d.adc.full_scale) << '\n';
  os << "adc.stage1_gain = " << num(d.adc.stage1_gain) << '\n';
  os << "adc.stage2_gain = " << num(d.adc.stage2_gain) << '\n';
  os << "adc.noise_rms = " << num(d.adc.noise_rms) << '\n';
  os << '\n';
  os << "dac.out_min = " << num(d.dac.out_min) << '\n';
  os << "dac.out_max = " << num(d.dac.out_max) << '\n';
  os << "dac.amp_gain_v = " << num(d.dac.amp_gain_v) << '\n';
  os << '\n';
  os << "matrix.diag = " << num(d.matrix.diag) << '\n';
  os << "matrix.off1 = " << num(d.matrix.off1) << '\n';
  os << "matrix.off2 = " << num(d.matrix.off2) << '\n';
  os << '\n';
  os << "correction.v = " << num(d.correction.v) << '\n';
  os << "correction.unit_scale = " << num(d.correction.unit_scale) << '\n';
  os << "correction.beta_r = " << num(d.correction.beta_r[0]) << '\n';
  os << "correction.alpha0 = " << num(d.correction.alpha0[0]) << '\n';
  os << '\n';
  os << "pid.kp = " << num(d.pid.kp[0]) << '\n';
  os << "pid.ti = " << num(d.pid.ti[0]) << '\n';
  os << "pid.td = " << num(d.pid.td[0]) << '\n';
  os << "pid.output_min = " << num(d.pid.output_min) << '\n';
  os << "pid.output_max = " << num(d.pid.output_max) << '\n';
  os << '\n';
  os << "plant.resistance = " << num(d.plant.resistance) << '\n';
  os << "plant.sense_gain = " << num(d.plant.sense_gain) << '\n';
  os << "plant.dist = none\n";
  os << "plant.dist_amplitude = " << num(d.plant.disturbance.amplitude) << '\n';
  os << "plant.dist_tstart = " << num(d.plant.disturbance.t_start) << '\n';
  os << "plant.dist_freq = " << num(d.plant.disturbance.freq_hz) << '\n';
  os << "plant.dist_channel = " << d.plant.disturbance.channel << '\n';
  os << "# plant.dist_file = <path>  (t,ch0..ch15 table, used when plant.dist = file)\n";
  os << '\n';
  os << "link.bitrate = " << num(d.link.bitrate) << '\n';
  os << "link.fixed_latency = " << num(d.link.fixed_latency) << '\n';
  os << "link.drop_prob = " << num(d.link.drop_prob) << '\n';
  return os.str();
}

}  // namespace efc
