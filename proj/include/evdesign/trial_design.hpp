#pragma once

#include <cmath>
#include <limits>
#include <string>

#include "evdesign/error.hpp"
#include "evdesign/stochastic_models.hpp"

namespace evdesign {

/// Two-arm, event-driven design under proportional hazards.
///
/// The experimental arm's hazard is `hazard_ratio` times the control hazard
/// at every time. Accrual is uniform over `accrual_duration` months;
/// `events` is the target d at which the trial is analysed.
struct TrialDesign {
  PiecewiseExponential control = PiecewiseExponential::exponential(std::log(2.0) / 12.0);
  double hazard_ratio = 1.0;
  PiecewiseExponential dropout = PiecewiseExponential::from_loss_probability(0.01, 12.0);
  double allocation_ratio = 1.0;  // phi, experimental:control
  double accrual_duration = 12.0;
  int patients = 100;
  int events = 50;
  double alpha = 0.025;  // one-sided
  double target_power = 0.8;

  double log_hazard_ratio() const { return std::log(hazard_ratio); }
  double allocation_fraction() const { return allocation_ratio / (1.0 + allocation_ratio); }
  double accrual_rate() const {
    return accrual_duration > 0.0 ? patients / accrual_duration
                                  : std::numeric_limits<double>::infinity();
  }
  UniformAccrual accrual() const { return {accrual_duration, patients}; }

  PiecewiseExponential survival(Arm arm) const {
    return arm == Arm::experimental ? control.scaled(hazard_ratio) : control;
  }

  ArmModel arm_model(Arm arm) const {
    const double pi = allocation_fraction();
    return {arm, survival(arm), arm == Arm::experimental ? pi : 1.0 - pi};
  }

  /// Expected-value arm size n*pi (real valued).
  double expected_arm_size(Arm arm) const {
    const double pi = allocation_fraction();
    return patients * (arm == Arm::experimental ? pi : 1.0 - pi);
  }

  /// Integer arm sizes used by the simulator: n_e = round(n*pi), n_c = n - n_e.
  int simulated_arm_size(Arm arm) const {
    const int n_e = static_cast<int>(std::lround(patients * allocation_fraction()));
    return arm == Arm::experimental ? n_e : patients - n_e;
  }

  TrialDesign with_allocation_ratio(double phi) const {
    TrialDesign d = *this;
    d.allocation_ratio = phi;
    return d;
  }
  TrialDesign with_events(int d_) const {
    TrialDesign d = *this;
    d.events = d_;
    return d;
  }

  friend bool operator==(const TrialDesign&, const TrialDesign&) = default;
};

inline void validate(const TrialDesign& design) {
  if (!(design.hazard_ratio > 0.0) || !std::isfinite(design.hazard_ratio)) {
    throw InvalidArgument("hazard ratio must be positive and finite");
  }
  if (!(design.allocation_ratio > 0.0) || !std::isfinite(design.allocation_ratio)) {
    throw InvalidArgument("allocation ratio must be positive and finite");
  }
  if (!(design.accrual_duration >= 0.0) || !std::isfinite(design.accrual_duration)) {
    throw InvalidArgument("accrual duration must be finite and nonnegative");
  }
  if (design.patients <= 0) throw InvalidArgument("number of patients must be positive");
  if (design.events <= 0 || design.events > design.patients) {
    throw InvalidArgument("target events must lie in [1, patients]");
  }
  if (!(design.alpha > 0.0 && design.alpha < 0.5)) {
    throw InvalidArgument("one-sided alpha must lie in (0, 0.5)");
  }
  if (!(design.target_power > design.alpha && design.target_power < 1.0)) {
    throw InvalidArgument("target power must lie in (alpha, 1)");
  }
}

}  // namespace evdesign
