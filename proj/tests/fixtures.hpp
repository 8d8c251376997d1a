#pragma once

#include "evdesign/trial_design.hpp"

namespace fixtures {

/// The nivolumab versus docetaxel lung cancer design used as a case study:
/// medians 7.0 vs 11.4 months, 186 patients at 22/month, 133 events,
/// 5% dropout every 12 months, one-sided alpha 0.025, 80% power.
inline evdesign::TrialDesign cm017() {
  evdesign::TrialDesign d;
  d.control = evdesign::PiecewiseExponential::from_median(7.0);
  d.hazard_ratio = 7.0 / 11.4;
  d.dropout = evdesign::PiecewiseExponential::from_loss_probability(0.05, 12.0);
  d.allocation_ratio = 1.0;
  d.patients = 186;
  d.accrual_duration = 186.0 / 22.0;
  d.events = 133;
  d.alpha = 0.025;
  d.target_power = 0.8;
  return d;
}

}  // namespace fixtures
