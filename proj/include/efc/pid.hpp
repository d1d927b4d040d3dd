#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

#include "efc/fixed_point.hpp"

namespace efc {

// Discrete PID in the incremental (velocity) form: each step adds
//
//   kp * [ (1 + dt/ti + td/dt) e_k  + (-1 - 2 td/dt) e_k1 + (td/dt) e_k2 ]
//
// to the previous output. ti = +inf disables the integral term without
// changing the algebra. The output clamp doubles as anti-windup: the
// clamped value is what the next increment builds on.

struct PidGains {
  double kp = 1.0;
  double ti = std::numeric_limits<double>::infinity();  ///< seconds
  double td = 0.0;                                      ///< seconds
  double dt = 10e-6;                                    ///< sample period
  double output_min = -5.0;
  double output_max = 5.0;

  void validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("pid.dt must be > 0");
    if (!(ti > 0.0)) throw std::invalid_argument("pid.ti must be > 0 (or inf)");
    if (!(td >= 0.0) || !std::isfinite(td)) throw std::invalid_argument("pid.td must be >= 0");
    if (!std::isfinite(kp)) throw std::invalid_argument("pid.kp must be finite");
    if (!(output_min < output_max)) {
      throw std::invalid_argument("pid.output_min must be < pid.output_max");
    }
  }

  /// The three composite error coefficients of the incremental form.
  double c0() const { return kp * (1.0 + dt / ti + td / dt); }
  double c1() const { return kp * (-1.0 - 2.0 * td / dt); }
  double c2() const { return kp * (td / dt); }
};

struct PidState {
  double e_k1 = 0.0;  ///< last error
  double e_k2 = 0.0;  ///< error before last
  double u_k1 = 0.0;  ///< last (clamped) output
  long step_count = 0;
};

inline PidState pid_reset(const PidState& = PidState{}) { return PidState{}; }

struct PidStepResult {
  double u = 0.0;
  PidState state;
};

inline PidStepResult pid_step(const PidState& state, double e_k,
                              const PidGains& g) {
  if (!std::isfinite(e_k)) throw std::domain_error("pid_step: non-finite error");
  const double u_raw =
      state.u_k1 + g.c0() * e_k + g.c1() * state.e_k1 + g.c2() * state.e_k2;
  const double u = std::clamp(u_raw, g.output_min, g.output_max);
  return {u, PidState{e_k, state.e_k1, u, state.step_count + 1}};
}

// ---------------------------------------------------------------------------
// Fixed-point path. Coefficients in signed Q16.16 (the composites exceed
// unity whenever td/dt is large), errors as signed 16-bit codes, output
// accumulator held wide in Q16.16 code units so small increments do not
// vanish between steps.
// ---------------------------------------------------------------------------

struct QuantizedPidGains {
  int32_t c0 = 0;  // Q16.16
  int32_t c1 = 0;
  int32_t c2 = 0;
  int64_t out_min_q = 0;  // clamp window, Q16.16 code units
  int64_t out_max_q = 0;
};

/// Quantizes the gain composites. code_scale converts the volt-domain
/// composites to the code domain (input-code LSB over output-code LSB);
/// out_{min,max}_codes bound the output in output-code units.
inline QuantizedPidGains quantize_pid_gains(const PidGains& g,
                                            double code_scale,
                                            double out_min_codes,
                                            double out_max_codes) {
  g.validate();
  QuantizedPidGains q;
  q.c0 = to_q16(g.c0() * code_scale, "pid c0");
  q.c1 = to_q16(g.c1() * code_scale, "pid c1");
  q.c2 = to_q16(g.c2() * code_scale, "pid c2");
  if (!(out_min_codes < out_max_codes)) {
    throw std::invalid_argument("pid output clamp window is empty");
  }
  q.out_min_q = static_cast<int64_t>(std::llround(out_min_codes)) << kQ16Shift;
  q.out_max_q = static_cast<int64_t>(std::llround(out_max_codes)) << kQ16Shift;
  return q;
}

struct PidFixedState {
  int32_t e_k1 = 0;
  int32_t e_k2 = 0;
  int64_t u_acc = 0;  // Q16.16 code units, clamped
  long step_count = 0;
};

struct PidFixedStepResult {
  int16_t u = 0;
  PidFixedState state;
};

inline PidFixedStepResult pid_step_fixed(const PidFixedState& state,
                                         int32_t e_k,
                                         const QuantizedPidGains& g) {
  int64_t acc = state.u_acc;
  acc += static_cast<int64_t>(g.c0) * e_k;
  acc += static_cast<int64_t>(g.c1) * state.e_k1;
  acc += static_cast<int64_t>(g.c2) * state.e_k2;
  acc = std::clamp(acc, g.out_min_q, g.out_max_q);

  PidFixedStepResult out;
  out.u = static_cast<int16_t>(saturate_i16(round_shift_even(acc, kQ16Shift)));
  out.state = PidFixedState{e_k, state.e_k1, acc, state.step_count + 1};
  return out;
}

}  // namespace efc
