#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "evdesign/design_studio.hpp"
#include "evdesign/event_dynamics.hpp"
#include "evdesign/power_engine.hpp"
#include "evdesign/trial_simulator.hpp"

// Invariant suites that can be run against a build without the test
// harness. Each check reports what it measured next to the bound it needs.

namespace evdesign::properties {

struct Check {
  std::string suite;
  std::string name;
  double measured = 0.0;
  double bound = 0.0;
  bool pass = false;
};

namespace detail {

inline Check at_most(std::string suite, std::string name, double measured, double bound) {
  return {std::move(suite), std::move(name), measured, bound, measured <= bound};
}

inline double relative_error(double value, double reference) {
  return std::abs(value / reference - 1.0);
}

}  // namespace detail

/// Short- and long-trial limits of the expected event ratio for random
/// exponential designs.
inline std::vector<Check> limits_suite(std::uint64_t seed, int draws = 20) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> lambda(0.02, 0.2), hr(0.4, 1.5), eta(0.001, 0.05),
      phi(0.5, 3.0);
  double worst_short = 0.0;
  double worst_long = 0.0;
  for (int i = 0; i < draws; ++i) {
    TrialDesign d;
    const double lc = lambda(gen);
    d.control = PiecewiseExponential::exponential(lc);
    d.hazard_ratio = hr(gen);
    const double e = eta(gen);
    d.dropout = PiecewiseExponential::exponential(e);
    d.allocation_ratio = phi(gen);
    d.patients = 300;
    d.events = 150;
    d.accrual_duration = 12.0;
    const auto limits = event_ratio_limits(lc * d.hazard_ratio, lc, e, d.allocation_ratio);
    worst_short = std::max(worst_short, detail::relative_error(
                                            expected_events_by_arm(d, 1e-4).ratio(), limits.short_trial));
    worst_long = std::max(worst_long, detail::relative_error(expected_events_by_arm(d, 1e4).ratio(),
                                                             limits.long_trial));
  }
  return {detail::at_most("limits", "ratio at t=1e-4 vs phi*exp(theta)", worst_short, 1e-3),
          detail::at_most("limits", "ratio at t=1e4 vs event-fraction limit", worst_long, 1e-3)};
}

/// Closed-form optima and the balance property of the Rubinstein optimum.
inline std::vector<Check> optima_suite(const TrialDesign& design) {
  std::vector<Check> out;
  const double d = design.events;
  out.push_back(detail::at_most("optima", "Schoenfeld phi* = 1",
                                std::abs(optimal_rr(ApproxMethod::schoenfeld, design, d).phi_star - 1.0),
                                0.0));
  for (double hr : {0.5, 2.0 / 3.0}) {
    TrialDesign v = design;
    v.hazard_ratio = hr;
    out.push_back(detail::at_most(
        "optima", hr == 0.5 ? "Freedman phi* = 1/HR at HR 0.5" : "Freedman phi* = 1/HR at HR 2/3",
        std::abs(optimal_rr(ApproxMethod::freedman, v, d).phi_star - 1.0 / hr), 1e-9));
  }
  const auto rubinstein = optimal_rr(ApproxMethod::rubinstein, design, d);
  out.push_back(detail::at_most("optima", "Rubinstein phi* balances expected events",
                                std::abs(rubinstein.achieved_balance - 1.0), 1e-6));
  // At balance E_e = E_c = d/2, so mu_R equals the 1:1 Schoenfeld mean.
  const double mu_r =
      mu_for_design(ApproxMethod::rubinstein, design.with_allocation_ratio(rubinstein.phi_star), d).mu;
  const double mu_s = mu_schoenfeld(design.log_hazard_ratio(), d, 1.0).mu;
  out.push_back(detail::at_most("optima", "mu_R at balance equals 1:1 mu_S",
                                detail::relative_error(mu_r, mu_s), 1e-9));
  return out;
}

/// Expected-event balance at the piecewise optimum over the single-knot
/// grid (knot at 4 months, control hazard log 2 / 12 before it).
inline std::vector<Check> single_knot_suite() {
  const double base = std::log(2.0) / 12.0;
  double lowest = INFINITY;
  double highest = -INFINITY;
  for (double hr : {0.5, 0.6, 0.7, 0.8}) {
    for (double dn : {0.5, 0.6, 0.7, 0.8}) {
      for (double ratio : {0.5, 2.0 / 3.0, 1.0, 1.5, 2.0}) {
        const PiecewiseExponential control({4.0}, {base, base * ratio});
        const TrialDesign g =
            build_grid_design(hr, 12.0, dn, 0.025, 0.8, std::nullopt, control);
        const auto sol = optimal_rr(ApproxMethod::piecewise_mle, g, g.events);
        lowest = std::min(lowest, sol.achieved_balance);
        highest = std::max(highest, sol.achieved_balance);
      }
    }
  }
  return {{"single_knot", "smallest balance at piecewise optimum (> 0.97)", lowest, 0.97, lowest > 0.97},
          {"single_knot", "largest balance at piecewise optimum (< 1.03)", highest, 1.03, highest < 1.03}};
}

/// One-interval MLE identities and logrank antisymmetry on simulated trials.
inline std::vector<Check> dataset_suite(const TrialDesign& design, std::uint64_t seed,
                                        int datasets = 50) {
  double worst_lambda = 0.0;
  double worst_events = 0.0;
  double worst_variance = 0.0;
  double worst_swap = 0.0;
  for (int r = 0; r < datasets; ++r) {
    TrialDataset data = simulate_trial(design, design.events, seed, static_cast<std::uint64_t>(r));
    const MleFit fit = fit_piecewise_mle(data, {});
    const double d0 = fit.interval_events[0][0], d1 = fit.interval_events[1][0];
    const double r0 = fit.interval_exposure[0][0], r1 = fit.interval_exposure[1][0];
    worst_lambda = std::max(worst_lambda, std::abs(fit.lambda_hat[0] - d0 / r0));
    worst_events = std::max(worst_events, std::abs(fit.psi_hat * fit.lambda_hat[0] * r1 - d1));
    worst_variance = std::max(worst_variance, std::abs(fit.var_log_psi - (1.0 / d1 + 1.0 / d0)));

    const double z = logrank_statistic(data);
    for (auto& o : data.records) {
      o.arm = o.arm == Arm::experimental ? Arm::control : Arm::experimental;
    }
    worst_swap = std::max(worst_swap, std::abs(logrank_statistic(data) + z));
  }
  return {detail::at_most("mle", "lambda_hat equals D0/R0", worst_lambda, 1e-10),
          detail::at_most("mle", "psi_hat * lambda_hat * R1 equals D1", worst_events, 1e-10),
          detail::at_most("mle", "Wald variance equals 1/D1 + 1/D0", worst_variance, 1e-12),
          detail::at_most("logrank", "swapping arms negates Z", worst_swap, 1e-12)};
}

/// Closed form against quadrature for exponential arms.
inline std::vector<Check> quadrature_suite(const TrialDesign& design) {
  double worst = 0.0;
  for (Arm arm : {Arm::experimental, Arm::control}) {
    const EventCurveInputs in = event_curve_inputs(design, arm);
    for (double t : {0.1, 1.0, 5.0, 10.0, 25.0, 100.0}) {
      worst = std::max(worst, detail::relative_error(expected_events_quadrature(in, t),
                                                     expected_events_closed_form(in, t)));
    }
  }
  return {detail::at_most("quadrature", "quadrature vs closed form (relative)", worst, 1e-6)};
}

inline std::vector<Check> run_all(TrialDesign design, std::uint64_t seed) {
  if (design.control.intervals() != 1) {
    design.control = PiecewiseExponential::exponential(design.control.hazards()[0]);
  }
  std::vector<Check> out;
  for (auto&& suite : {limits_suite(seed), optima_suite(design), single_knot_suite(),
                       dataset_suite(design, seed), quadrature_suite(design)}) {
    out.insert(out.end(), suite.begin(), suite.end());
  }
  return out;
}

}  // namespace evdesign::properties
