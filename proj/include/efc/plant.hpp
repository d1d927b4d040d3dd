#pragma once

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "efc/channels.hpp"
#include "efc/correction.hpp"

namespace efc {

// Lumped plant: 16 eddy-current channels in the shell near the gap,
// coupled through the mutual-inductance matrix and driven by the applied
// correction voltages plus a disturbance source,
//
//   L di/dt + R i = u(t) + d(t)
//
// advanced by backward Euler. L is symmetric positive definite (the
// measured matrix is diagonally dominant), so the step solve is an LLT.

enum class DisturbanceKind { none, step, ramp, sine, file };

/// Deterministic per-channel voltage source. `channel` = -1 drives all
/// channels; file-driven sources are zero-order-held between rows.
struct Disturbance {
  DisturbanceKind kind = DisturbanceKind::none;
  double amplitude = 0.0;  ///< volts (ramp: volts per second)
  double t_start = 0.0;
  double freq_hz = 0.0;  ///< sine only
  int channel = -1;
  std::string file_path;
  std::vector<double> file_times;               // ascending
  std::vector<ChannelVector> file_values;

  ChannelVector at(double t) const {
    ChannelVector d = ChannelVector::Zero();
    switch (kind) {
      case DisturbanceKind::none:
        break;
      case DisturbanceKind::step:
        if (t >= t_start) fill(d, amplitude);
        break;
      case DisturbanceKind::ramp:
        if (t >= t_start) fill(d, amplitude * (t - t_start));
        break;
      case DisturbanceKind::sine:
        if (t >= t_start) {
          fill(d, amplitude * std::sin(2.0 * std::numbers::pi * freq_hz *
                                       (t - t_start)));
        }
        break;
      case DisturbanceKind::file: {
        // last row with time <= t, zero before the first row
        const auto it = std::upper_bound(file_times.begin(), file_times.end(), t);
        if (it != file_times.begin()) {
          d = file_values[static_cast<std::size_t>(it - file_times.begin()) - 1];
        }
        break;
      }
    }
    return d;
  }

 private:
  void fill(ChannelVector& d, double value) const {
    if (channel < 0) {
      d.setConstant(value);
    } else {
      d[channel] = value;
    }
  }
};

struct PlantParams {
  double resistance = 0.62;  ///< ohms, uniform per channel
  ChannelMatrix inductance =
      build_mutual_matrix<double>().topLeftCorner<kChannelCount, kChannelCount>();
  double sense_gain = 1.0;  ///< volts per amp
  Disturbance disturbance;

  void validate() const {
    if (!(resistance > 0.0)) throw std::invalid_argument("plant.resistance must be > 0");
    if (!(sense_gain != 0.0) || !std::isfinite(sense_gain)) {
      throw std::invalid_argument("plant.sense_gain must be nonzero");
    }
    if (!inductance.isApprox(inductance.transpose())) {
      throw std::invalid_argument("plant.inductance must be symmetric");
    }
    Eigen::LLT<ChannelMatrix> llt(inductance);
    if (llt.info() != Eigen::Success) {
      throw std::invalid_argument("plant.inductance must be positive definite");
    }
  }
};

struct PlantState {
  ChannelVector currents = ChannelVector::Zero();
  double time = 0.0;
};

/// One backward-Euler step: solves (L/dt + R I) i' = (L/dt) i + u + d(t+dt).
/// The applied voltage is held constant across the step.
inline PlantState plant_step(const PlantState& state,
                             const ChannelVector& applied,
                             const PlantParams& params, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("plant_step: dt must be > 0");
  require_finite(applied, "plant_step");

  const double t_next = state.time + dt;
  const ChannelMatrix l_over_dt = params.inductance / dt;
  const ChannelMatrix a =
      l_over_dt + params.resistance * ChannelMatrix::Identity();
  const ChannelVector rhs =
      l_over_dt * state.currents + applied + params.disturbance.at(t_next);

  Eigen::LLT<ChannelMatrix> llt(a);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("plant_step: singular step matrix");
  }
  return {llt.solve(rhs), t_next};
}

/// Integrated Rogowski transduction: volts proportional to channel current.
inline ChannelVector sense(const PlantState& state, const PlantParams& params) {
  return params.sense_gain * state.currents;
}

/// Step solver with the factorization cached for a fixed dt; what the
/// loop uses so the 16x16 LLT is not redone every sample.
class PlantStepper {
 public:
  PlantStepper(const PlantParams& params, double dt)
      : params_(params), dt_(dt), l_over_dt_(params.inductance / dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("PlantStepper: dt must be > 0");
    llt_.compute(l_over_dt_ +
                 params.resistance * ChannelMatrix::Identity());
    if (llt_.info() != Eigen::Success) {
      throw std::runtime_error("PlantStepper: singular step matrix");
    }
  }

  PlantState step(const PlantState& state, const ChannelVector& applied) const {
    const double t_next = state.time + dt_;
    const ChannelVector rhs = l_over_dt_ * state.currents + applied +
                              params_.disturbance.at(t_next);
    return {llt_.solve(rhs), t_next};
  }

 private:
  PlantParams params_;
  double dt_;
  ChannelMatrix l_over_dt_;
  Eigen::LLT<ChannelMatrix> llt_;
};

}  // namespace efc
