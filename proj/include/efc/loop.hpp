#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "efc/channels.hpp"
#include "efc/correction.hpp"
#include "efc/link.hpp"
#include "efc/pid.hpp"
#include "efc/plant.hpp"
#include "efc/signal_model.hpp"

namespace efc {

// Closed-loop scheduler. The two boards are modeled as two pipeline
// stages: the sample stage (sense -> amplify -> ADC -> correction -> PID
// -> frame encode) and the coil stage (frame decode -> DAC -> power
// amplifier), with exactly one frame in flight between them. Actuation
// computed from the measurement at step k takes effect at step
// k + ceil(link_delay/dt) + 1; a lost frame leaves the previous actuator
// value held.

enum class LoopMode { floating, fixed, both };

struct MatrixParams {
  double diag = kDefaultDiagHenries;
  double off1 = kDefaultOff1Henries;
  double off2 = kDefaultOff2Henries;
};

/// Per-channel controller gains; scalar configs broadcast to all 16.
struct PidChannelConfig {
  ChannelVector kp = ChannelVector::Constant(6.0);
  ChannelVector ti = ChannelVector::Constant(5e-4);
  ChannelVector td = ChannelVector::Zero();
  double output_min = -5.0;
  double output_max = 5.0;

  PidGains gains_for(int channel, double dt) const {
    return PidGains{kp[channel], ti[channel], td[channel],
                    dt, output_min, output_max};
  }
};

struct PlantConfig {
  double resistance = 0.62;
  double sense_gain = 1.0;
  Disturbance disturbance;
};

struct LoopConfig {
  double dt = 10e-6;
  long n_steps = 2000;
  LoopMode mode = LoopMode::floating;
  uint64_t seed = 1;
  AdcConfig adc;
  DacConfig dac;
  MatrixParams matrix;
  CorrectionParams correction;
  PidChannelConfig pid;
  PlantConfig plant;
  LinkModel link;

  void validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("dt must be > 0");
    if (n_steps < 1) throw std::invalid_argument("n_steps must be >= 1");
    adc.validate();
    dac.validate();
    correction.validate();
    link.validate();
    if (!(plant.resistance > 0.0)) {
      throw std::invalid_argument("plant.resistance must be > 0");
    }
    if (plant.sense_gain == 0.0 || !std::isfinite(plant.sense_gain)) {
      throw std::invalid_argument("plant.sense_gain must be nonzero");
    }
    for (int i = 0; i < kChannelCount; ++i) {
      pid.gains_for(i, dt).validate();
    }
  }

  /// Steps between a measurement and the actuation derived from it.
  int delay_steps() const {
    return static_cast<int>(std::ceil(link.total_delay() / dt)) + 1;
  }
};

struct TraceRecord {
  long step = 0;
  double t = 0.0;
  ChannelVector currents = ChannelVector::Zero();    // A
  ChannelVector coil_volts = ChannelVector::Zero();  // V, pre-amplifier
  CodeVector adc_codes = CodeVector::Zero();
  ChannelVector corrected = ChannelVector::Zero();   // V
  ChannelVector pid_out = ChannelVector::Zero();     // V
  Eigen::Matrix<uint16_t, kChannelCount, 1> dac_codes =
      Eigen::Matrix<uint16_t, kChannelCount, 1>::Constant(32768);
  ChannelVector applied = ChannelVector::Zero();     // V, during this step
  long frames_lost = 0;
  int overflow = 0;  // fixed-path sticky flag, this step
};

using Trace = std::vector<TraceRecord>;

namespace detail {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// The digital pipeline of the sample stage, float flavor: dequantize,
/// correct, per-channel PID on error = 0 - corrected, quantize to the
/// signed actuation word.
class FloatPipeline {
 public:
  explicit FloatPipeline(const LoopConfig& cfg)
      : adc_(cfg.adc), dac_(cfg.dac), params_(cfg.correction) {
    m_ = build_mutual_matrix(cfg.matrix.diag, cfg.matrix.off1, cfg.matrix.off2);
    for (int i = 0; i < kChannelCount; ++i) {
      gains_[i] = cfg.pid.gains_for(i, cfg.dt);
      states_[i] = PidState{};
    }
  }

  FramePayload process(const CodeVector& codes, ChannelVector& corrected_out,
                       ChannelVector& pid_out,
                       Eigen::Matrix<uint16_t, kChannelCount, 1>& dac_out) {
    const ChannelVector u_in = adc_dequantize(codes, adc_);
    corrected_out = correct(u_in, m_, params_);
    FramePayload words{};
    for (int i = 0; i < kChannelCount; ++i) {
      const auto r = pid_step(states_[i], -corrected_out[i], gains_[i]);
      states_[i] = r.state;
      pid_out[i] = r.u;
      const uint16_t code = dac_voltage_to_code(r.u, dac_);
      dac_out[i] = code;
      words[i] = static_cast<int16_t>(static_cast<int>(code) - 32768);
    }
    return words;
  }

  bool overflow() const { return false; }

 private:
  AdcConfig adc_;
  DacConfig dac_;
  CorrectionParams params_;
  Eigen::MatrixXd m_;
  std::array<PidGains, kChannelCount> gains_{};
  std::array<PidState, kChannelCount> states_{};
};

/// Fixed flavor of the same stage: Q2.30 banded correction on raw codes,
/// Q16.16 PID, output word already in DAC code units.
class FixedPipeline {
 public:
  explicit FixedPipeline(const LoopConfig& cfg)
      : adc_(cfg.adc),
        dac_(cfg.dac),
        qcorr_(cfg.matrix.diag, cfg.matrix.off1, cfg.matrix.off2,
               cfg.correction, cfg.adc.lsb()) {
    const double code_scale = cfg.adc.lsb() / cfg.dac.lsb();
    for (int i = 0; i < kChannelCount; ++i) {
      const PidGains g = cfg.pid.gains_for(i, cfg.dt);
      const double lo =
          std::max(std::round(g.output_min / cfg.dac.lsb()), -32768.0);
      const double hi =
          std::min(std::round(g.output_max / cfg.dac.lsb()), 32767.0);
      qgains_[i] = quantize_pid_gains(g, code_scale, lo, hi);
      states_[i] = PidFixedState{};
    }
  }

  FramePayload process(const CodeVector& codes, ChannelVector& corrected_out,
                       ChannelVector& pid_out,
                       Eigen::Matrix<uint16_t, kChannelCount, 1>& dac_out) {
    const FixedCorrectionResult corr = qcorr_.apply(codes);
    overflow_ = corr.overflow;
    FramePayload words{};
    for (int i = 0; i < kChannelCount; ++i) {
      corrected_out[i] = corr.codes[i] * adc_.lsb();
      const int32_t e = saturate_i16(-static_cast<int64_t>(corr.codes[i]));
      const auto r = pid_step_fixed(states_[i], e, qgains_[i]);
      states_[i] = r.state;
      pid_out[i] = r.u * dac_.lsb();
      dac_out[i] = static_cast<uint16_t>(static_cast<int>(r.u) + 32768);
      words[i] = r.u;
    }
    return words;
  }

  bool overflow() const { return overflow_; }

 private:
  AdcConfig adc_;
  DacConfig dac_;
  QuantizedCorrection qcorr_;
  std::array<QuantizedPidGains, kChannelCount> qgains_{};
  std::array<PidFixedState, kChannelCount> states_{};
  bool overflow_ = false;
};

template <typename Pipeline>
Trace run_loop_impl(const LoopConfig& cfg) {
  Pipeline pipeline(cfg);

  PlantParams plant;
  plant.resistance = cfg.plant.resistance;
  plant.sense_gain = cfg.plant.sense_gain;
  plant.disturbance = cfg.plant.disturbance;
  plant.inductance =
      build_mutual_matrix(cfg.matrix.diag, cfg.matrix.off1, cfg.matrix.off2);
  plant.validate();
  PlantStepper stepper(plant, cfg.dt);

  std::mt19937_64 noise_rng(splitmix64(cfg.seed ^ 0x6E6F697365ULL));
  std::mt19937_64 link_rng(splitmix64(cfg.seed ^ 0x6C696E6BULL));
  const bool with_noise = cfg.adc.noise_rms > 0.0;
  std::normal_distribution<double> noise(0.0, with_noise ? cfg.adc.noise_rms : 1.0);

  const int delay = cfg.delay_steps();
  std::vector<std::optional<FrameBytes>> in_flight(
      static_cast<std::size_t>(cfg.n_steps) + delay + 1);

  SeqTracker tracker;
  ChannelVector held_applied = ChannelVector::Zero();
  PlantState state;
  Trace trace;
  trace.reserve(static_cast<std::size_t>(cfg.n_steps));

  for (long k = 0; k < cfg.n_steps; ++k) {
    // Coil stage: consume the frame arriving this step, if any.
    if (in_flight[k].has_value()) {
      const DecodedFrame f = decode_frame(*in_flight[k]);
      if (f.status == DecodeStatus::ok) {
        tracker.accept(f.seq);
        for (int i = 0; i < kChannelCount; ++i) {
          const int dac_code = static_cast<int>(f.payload[i]) + 32768;
          held_applied[i] = power_amp(dac_code_to_voltage(dac_code, cfg.dac), cfg.dac);
        }
      }
      in_flight[k].reset();
    }

    TraceRecord rec;
    rec.step = k;
    rec.t = state.time;
    rec.currents = state.currents;

    // Sample stage: sense, amplify, digitize.
    rec.coil_volts = sense(state, plant);
    ChannelVector v_meas = amplify(rec.coil_volts, cfg.adc);
    if (with_noise) {
      for (int i = 0; i < kChannelCount; ++i) v_meas[i] += noise(noise_rng);
    }
    rec.adc_codes = adc_quantize(v_meas, cfg.adc);

    const FramePayload words = pipeline.process(rec.adc_codes, rec.corrected,
                                                rec.pid_out, rec.dac_codes);
    rec.overflow = pipeline.overflow() ? 1 : 0;

    // Launch this step's frame toward the coil stage.
    const auto arrival = transmit(cfg.link, state.time, link_rng);
    if (arrival.has_value()) {
      in_flight[k + delay] = encode_frame(words, static_cast<uint8_t>(k & 0xFF));
    }

    rec.applied = held_applied;
    rec.frames_lost = tracker.lost();
    trace.push_back(rec);

    state = stepper.step(state, held_applied);
  }
  return trace;
}

}  // namespace detail

/// Runs the closed loop for n_steps and returns one record per step.
/// Mode `both` returns the fixed-path trace (the datapath that drives
/// the actuators); use run_both() to get the float shadow as well.
inline Trace run_closed_loop(const LoopConfig& cfg) {
  cfg.validate();
  if (cfg.mode == LoopMode::fixed || cfg.mode == LoopMode::both) {
    return detail::run_loop_impl<detail::FixedPipeline>(cfg);
  }
  return detail::run_loop_impl<detail::FloatPipeline>(cfg);
}

struct BothTraces {
  Trace float_trace;
  Trace fixed_trace;
};

/// Runs the float and fixed loops on identical configs and seeds.
inline BothTraces run_both(LoopConfig cfg) {
  cfg.validate();
  BothTraces out;
  cfg.mode = LoopMode::floating;
  out.float_trace = detail::run_loop_impl<detail::FloatPipeline>(cfg);
  cfg.mode = LoopMode::fixed;
  out.fixed_trace = detail::run_loop_impl<detail::FixedPipeline>(cfg);
  return out;
}

/// Unit-step disturbance on a single channel, everything else zero.
inline Trace run_step_response(LoopConfig cfg, int channel) {
  if (channel < 0 || channel >= kChannelCount) {
    throw std::invalid_argument("run_step_response: channel out of range");
  }
  Disturbance d;
  d.kind = DisturbanceKind::step;
  d.amplitude = 1.0;
  d.t_start = 0.0;
  d.channel = channel;
  cfg.plant.disturbance = d;
  return run_closed_loop(cfg);
}

struct LatencyStats {
  double mean_s = 0.0;
  double p99_s = 0.0;
  double variance_s2 = 0.0;
  long iterations = 0;
};

/// Wall-clock cost of one digital pipeline evaluation: quantize ->
/// correction -> PID -> frame encode -> decode -> DAC map. Mode `both`
/// measures the fixed path.
inline LatencyStats measure_pipeline_latency(const LoopConfig& cfg,
                                             long iterations = 100000) {
  cfg.validate();
  if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");

  std::mt19937_64 rng(detail::splitmix64(cfg.seed ^ 0x62656E6368ULL));
  std::uniform_int_distribution<int> dist(-32768, 32767);
  constexpr int kNumInputs = 256;
  std::vector<CodeVector> inputs(kNumInputs);
  for (auto& v : inputs) {
    for (int i = 0; i < kChannelCount; ++i) {
      v[i] = static_cast<int16_t>(dist(rng));
    }
  }

  const bool fixed = cfg.mode != LoopMode::floating;
  detail::FloatPipeline float_pipe(cfg);
  detail::FixedPipeline fixed_pipe(cfg);

  ChannelVector corrected, pid_out;
  Eigen::Matrix<uint16_t, kChannelCount, 1> dac_codes;
  ChannelVector applied;
  uint8_t seq = 0;
  volatile double sink = 0.0;  // keep the dac map from being optimized out

  std::vector<double> samples(static_cast<std::size_t>(iterations));
  using clock = std::chrono::steady_clock;
  for (long it = 0; it < iterations; ++it) {
    const CodeVector& codes = inputs[it & (kNumInputs - 1)];
    const auto t0 = clock::now();
    const FramePayload words =
        fixed ? fixed_pipe.process(codes, corrected, pid_out, dac_codes)
              : float_pipe.process(codes, corrected, pid_out, dac_codes);
    const FrameBytes frame = encode_frame(words, seq++);
    const DecodedFrame decoded = decode_frame(frame);
    double acc = 0.0;
    for (int i = 0; i < kChannelCount; ++i) {
      acc += dac_code_to_voltage(static_cast<int>(decoded.payload[i]) + 32768,
                                 cfg.dac);
    }
    const auto t1 = clock::now();
    sink = acc;
    samples[static_cast<std::size_t>(it)] =
        std::chrono::duration<double>(t1 - t0).count();
  }
  (void)sink;

  LatencyStats stats;
  stats.iterations = iterations;
  double sum = 0.0;
  for (double s : samples) sum += s;
  stats.mean_s = sum / static_cast<double>(iterations);
  double var = 0.0;
  for (double s : samples) var += (s - stats.mean_s) * (s - stats.mean_s);
  stats.variance_s2 = var / static_cast<double>(iterations);
  const auto n99 = static_cast<std::size_t>(
      std::min<double>(static_cast<double>(iterations) - 1.0,
                       std::ceil(0.99 * static_cast<double>(iterations))));
  std::nth_element(samples.begin(), samples.begin() + n99, samples.end());
  stats.p99_s = samples[n99];
  return stats;
}

}  // namespace efc
