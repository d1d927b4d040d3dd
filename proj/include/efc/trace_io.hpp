#pragma once

#include <array>
#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include "efc/loop.hpp"

namespace efc {

/// Shortest decimal form that parses back to the identical double.
inline std::string format_double(double x) {
  std::array<char, 64> buf;
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  return std::string(buf.data(), res.ptr);
}

inline double parse_double(const std::string& s, const char* what) {
  const char* begin = s.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0') {
    throw std::invalid_argument(std::string(what) + ": bad number '" + s + "'");
  }
  return v;
}

inline const char* trace_csv_header() {
  static const std::string header = [] {
    std::string h = "step,t";
    const char* groups[] = {"i", "v", "adc", "c", "u", "dac", "a"};
    for (const char* g : groups) {
      for (int i = 0; i < kChannelCount; ++i) {
        h += ',';
        h += g;
        h += std::to_string(i);
      }
    }
    h += ",frames_lost,ovf";
    return h;
  }();
  return header.c_str();
}

inline void write_trace_csv(std::ostream& os, const Trace& trace) {
  os << trace_csv_header() << '\n';
  for (const TraceRecord& r : trace) {
    os << r.step << ',' << format_double(r.t);
    for (int i = 0; i < kChannelCount; ++i) os << ',' << format_double(r.currents[i]);
    for (int i = 0; i < kChannelCount; ++i) os << ',' << format_double(r.coil_volts[i]);
    for (int i = 0; i < kChannelCount; ++i) os << ',' << r.adc_codes[i];
    for (int i = 0; i < kChannelCount; ++i) os << ',' << format_double(r.corrected[i]);
    for (int i = 0; i < kChannelCount; ++i) os << ',' << format_double(r.pid_out[i]);
    for (int i = 0; i < kChannelCount; ++i) os << ',' << r.dac_codes[i];
    for (int i = 0; i < kChannelCount; ++i) os << ',' << format_double(r.applied[i]);
    os << ',' << r.frames_lost << ',' << r.overflow << '\n';
  }
}

inline void write_trace_csv(const std::string& path, const Trace& trace) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open trace output '" + path + "'");
  write_trace_csv(f, trace);
  if (!f.good()) throw std::runtime_error("write failed on '" + path + "'");
}

inline Trace read_trace_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::invalid_argument("trace CSV: empty file");
  if (line != trace_csv_header()) {
    throw std::invalid_argument("trace CSV: unexpected header");
  }
  Trace trace;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 2 + 7 * kChannelCount + 2) {
      throw std::invalid_argument("trace CSV: wrong column count");
    }
    TraceRecord r;
    std::size_t c = 0;
    r.step = std::stol(cells[c++]);
    r.t = parse_double(cells[c++], "trace t");
    for (int i = 0; i < kChannelCount; ++i) r.currents[i] = parse_double(cells[c++], "trace i");
    for (int i = 0; i < kChannelCount; ++i) r.coil_volts[i] = parse_double(cells[c++], "trace v");
    for (int i = 0; i < kChannelCount; ++i) {
      r.adc_codes[i] = static_cast<int16_t>(std::stoi(cells[c++]));
    }
    for (int i = 0; i < kChannelCount; ++i) r.corrected[i] = parse_double(cells[c++], "trace c");
    for (int i = 0; i < kChannelCount; ++i) r.pid_out[i] = parse_double(cells[c++], "trace u");
    for (int i = 0; i < kChannelCount; ++i) {
      r.dac_codes[i] = static_cast<uint16_t>(std::stoul(cells[c++]));
    }
    for (int i = 0; i < kChannelCount; ++i) r.applied[i] = parse_double(cells[c++], "trace a");
    r.frames_lost = std::stol(cells[c++]);
    r.overflow = std::stoi(cells[c++]);
    trace.push_back(r);
  }
  return trace;
}

inline Trace read_trace_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open trace '" + path + "'");
  return read_trace_csv(f);
}

// ---------------------------------------------------------------------------
// Summary report. The error signal is the corrected vector (setpoint 0).
// ---------------------------------------------------------------------------

struct ChannelSummary {
  double peak_error = 0.0;
  long settling_step = 0;  ///< n_steps when the channel never settles
  double steady_residual = 0.0;
};

struct TraceSummary {
  std::array<ChannelSummary, kChannelCount> channels{};
  long frames_lost = 0;
  long overflow_steps = 0;
  long n_steps = 0;
};

/// Per-channel peak |error|, first step after which |error| stays below
/// 1% of its peak, and the mean |error| over the final tenth of the run.
inline TraceSummary summarize(const Trace& trace) {
  if (trace.empty()) throw std::invalid_argument("summarize: empty trace");
  TraceSummary s;
  s.n_steps = static_cast<long>(trace.size());
  s.frames_lost = trace.back().frames_lost;
  for (const TraceRecord& r : trace) s.overflow_steps += r.overflow ? 1 : 0;

  const std::size_t tail_start = trace.size() - (trace.size() + 9) / 10;
  for (int ch = 0; ch < kChannelCount; ++ch) {
    ChannelSummary& c = s.channels[ch];
    for (const TraceRecord& r : trace) {
      c.peak_error = std::max(c.peak_error, std::abs(r.corrected[ch]));
    }
    if (c.peak_error > 0.0) {
      const double threshold = 0.01 * c.peak_error;
      long last_violation = -1;
      for (std::size_t k = 0; k < trace.size(); ++k) {
        if (std::abs(trace[k].corrected[ch]) >= threshold) {
          last_violation = static_cast<long>(k);
        }
      }
      c.settling_step = last_violation + 1;  // == n_steps when never settled
    }
    double acc = 0.0;
    for (std::size_t k = tail_start; k < trace.size(); ++k) {
      acc += std::abs(trace[k].corrected[ch]);
    }
    c.steady_residual = acc / static_cast<double>(trace.size() - tail_start);
  }
  return s;
}

inline void print_summary(std::ostream& os, const TraceSummary& s) {
  os << "steps: " << s.n_steps << '\n';
  os << "frames_lost: " << s.frames_lost << '\n';
  os << "overflow_steps: " << s.overflow_steps << '\n';
  os << "channel,peak_error,settling_step,steady_residual\n";
  for (int ch = 0; ch < kChannelCount; ++ch) {
    const ChannelSummary& c = s.channels[ch];
    os << ch << ',' << format_double(c.peak_error) << ',' << c.settling_step
       << ',' << format_double(c.steady_residual) << '\n';
  }
}

/// 16x16 coupling matrix as CSV, row-major, entries in henries.
inline void write_matrix_csv(std::ostream& os, const Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) os << ',';
      os << format_double(m(i, j));
    }
    os << '\n';
  }
}

}  // namespace efc
