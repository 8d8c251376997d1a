#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "evdesign/detail/parallel.hpp"
#include "evdesign/error.hpp"
#include "evdesign/event_dynamics.hpp"
#include "evdesign/numerics.hpp"
#include "evdesign/power_engine.hpp"
#include "evdesign/trial_design.hpp"
#include "evdesign/trial_simulator.hpp"

namespace evdesign {

enum class EdgeCase { prolonged_trial, accelerated_accrual, increased_enrollment };

inline std::string_view to_string(EdgeCase e) {
  switch (e) {
    case EdgeCase::prolonged_trial: return "prolonged_trial";
    case EdgeCase::accelerated_accrual: return "accelerated_accrual";
    case EdgeCase::increased_enrollment: return "increased_enrollment";
  }
  return "unknown";
}

/// Where the event size of an unequal-allocation variant comes from.
enum class EventSource { empirical, rubinstein, schoenfeld };

inline std::string_view to_string(EventSource s) {
  switch (s) {
    case EventSource::empirical: return "empirical";
    case EventSource::rubinstein: return "rubinstein";
    case EventSource::schoenfeld: return "schoenfeld";
  }
  return "unknown";
}

inline EventSource parse_event_source(std::string_view s) {
  if (s == "empirical" || s == "E") return EventSource::empirical;
  if (s == "rubinstein" || s == "R") return EventSource::rubinstein;
  if (s == "schoenfeld" || s == "S") return EventSource::schoenfeld;
  throw InvalidArgument("unknown event source '" + std::string(s) + "'");
}

struct SimulationSettings {
  int replicates = 10000;
  std::uint64_t seed = 20240101;
};

/// Accrual rule of the HR x d/n grid: 20 patients/month at HR 0.5 rising
/// linearly to 50 at HR 0.8.
inline double grid_accrual_rate(double hazard_ratio) {
  return 20.0 + (50.0 - 20.0) * (hazard_ratio - 0.5) / (0.8 - 0.5);
}

inline PiecewiseExponential grid_dropout() {
  return PiecewiseExponential::from_loss_probability(0.01, 12.0);
}

/// 1:1 grid design: d from the tabulated-quantile Schoenfeld ceiling,
/// n = ceil(d / (d/n)), exponential control survival with the given median.
inline TrialDesign build_grid_design(double hazard_ratio, double control_median,
                                     double event_patient_ratio, double alpha = 0.025,
                                     double power = 0.8,
                                     std::optional<PiecewiseExponential> dropout = std::nullopt,
                                     std::optional<PiecewiseExponential> control = std::nullopt) {
  if (!(hazard_ratio > 0.0 && hazard_ratio < 1.0)) {
    throw InvalidArgument("grid hazard ratio must lie in (0, 1)");
  }
  if (!(event_patient_ratio > 0.0 && event_patient_ratio <= 1.0)) {
    throw InvalidArgument("event-patient ratio must lie in (0, 1]");
  }
  const double rate = grid_accrual_rate(hazard_ratio);
  if (!(rate > 0.0)) throw InvalidArgument("grid accrual rule gives a non-positive rate");

  TrialDesign design;
  design.control = control ? *control : PiecewiseExponential::from_median(control_median);
  design.hazard_ratio = hazard_ratio;
  design.dropout = dropout ? *dropout : grid_dropout();
  design.allocation_ratio = 1.0;
  design.alpha = alpha;
  design.target_power = power;
  design.events = schoenfeld_events(std::log(hazard_ratio), 1.0, alpha, power,
                                    QuantileConvention::tabulated);
  design.patients = static_cast<int>(std::ceil(design.events / event_patient_ratio - 1e-9));
  design.accrual_duration = design.patients / rate;
  return design;
}

/// Event size keeping the target power when switching `base` to ratio phi.
inline int variant_events(const TrialDesign& base, double phi, EventSource source,
                          const SimulationSettings& sim = {}) {
  if (phi == base.allocation_ratio) return base.events;
  const TrialDesign v = base.with_allocation_ratio(phi);
  switch (source) {
    case EventSource::rubinstein:
      return required_events(ApproxMethod::rubinstein, v, base.target_power);
    case EventSource::schoenfeld:
      return required_events(ApproxMethod::schoenfeld, v, base.target_power);
    case EventSource::empirical:
      return calibrate_events(v, base.target_power, base.alpha, sim.replicates, sim.seed).events;
  }
  throw InvalidArgument("unknown event source");
}

struct DesignComparison {
  TrialDesign base;
  TrialDesign variant;
  double phi = 1.0;
  EdgeCase edge_case = EdgeCase::prolonged_trial;
  /// Trial duration (prolonged), accrual duration (accelerated) or n (increased).
  double solved_value = 0.0;
  int d_variant = 0;
  bool feasible = true;
  double base_duration = 0.0;     // expected t_d of the base
  double variant_duration = 0.0;  // expected t_d of the variant
  double events_change = 0.0;     // percent vs base
  /// Percent change of duration (prolonged), accrual rate (accelerated) or n (increased).
  double relative_change = 0.0;
};

namespace detail {

inline double percent_change(double value, double reference) {
  return (value / reference - 1.0) * 100.0;
}

inline double duration_or_inf(const TrialDesign& design, double d) {
  try {
    return trial_duration(design, d);
  } catch (const Unreachable&) {
    return std::numeric_limits<double>::infinity();
  }
}

inline DesignComparison start_comparison(const TrialDesign& base, double phi, int d_variant,
                                         EdgeCase edge) {
  DesignComparison c;
  c.base = base;
  c.variant = base.with_allocation_ratio(phi).with_events(d_variant);
  c.phi = phi;
  c.edge_case = edge;
  c.d_variant = d_variant;
  c.base_duration = trial_duration(base, base.events);
  c.events_change = percent_change(d_variant, base.events);
  return c;
}

}  // namespace detail

/// Same n and accrual rate; the trial simply runs longer.
inline DesignComparison edge_case_prolonged(const TrialDesign& base, double phi, int d_variant) {
  auto c = detail::start_comparison(base, phi, d_variant, EdgeCase::prolonged_trial);
  c.variant_duration = trial_duration(c.variant, d_variant);
  c.solved_value = c.variant_duration;
  c.relative_change = detail::percent_change(c.variant_duration, c.base_duration);
  return c;
}

/// Same n; accrual sped up until the expected duration equals
/// `fixed_duration`. Infeasible when even near-instantaneous accrual
/// (1e-6 months) overshoots; then the variant carries accrual duration 0.
inline DesignComparison edge_case_accelerated(const TrialDesign& base, double phi, int d_variant,
                                              double fixed_duration) {
  auto c = detail::start_comparison(base, phi, d_variant, EdgeCase::accelerated_accrual);
  constexpr double instantaneous = 1e-6;
  const auto with_accrual = [&](double r) {
    TrialDesign v = c.variant;
    v.accrual_duration = r;
    return v;
  };
  const auto overshoot = [&](double r) {
    return trial_duration(with_accrual(r), d_variant) - fixed_duration;
  };

  const double f_min = overshoot(instantaneous);
  if (f_min > 0.0) {
    c.feasible = false;
    c.variant.accrual_duration = 0.0;
    c.variant_duration = f_min + fixed_duration;
    c.solved_value = 0.0;
    c.relative_change = std::numeric_limits<double>::infinity();
    return c;
  }
  double hi = std::max(base.accrual_duration, 1.0);
  double f_hi = overshoot(hi);
  while (f_hi < 0.0) {
    if (hi > fixed_duration) {
      // Accrual can stretch to the whole target window and events still
      // arrive early; report the longest sensible accrual.
      break;
    }
    hi *= 2.0;
    f_hi = overshoot(hi);
  }
  const double r = f_hi < 0.0 ? hi : solve_bracketed(overshoot, instantaneous, hi, f_min, f_hi);
  c.variant.accrual_duration = r;
  c.variant_duration = trial_duration(c.variant, d_variant);
  c.solved_value = r;
  c.relative_change = detail::percent_change(c.variant.accrual_rate(), base.accrual_rate());
  return c;
}

/// Same accrual rate; the smallest n whose expected duration does not
/// exceed `fixed_duration`. Infeasible when even accruing for the whole
/// window cannot produce d_variant events in time.
inline DesignComparison edge_case_increased_n(const TrialDesign& base, double phi, int d_variant,
                                              double fixed_duration) {
  auto c = detail::start_comparison(base, phi, d_variant, EdgeCase::increased_enrollment);
  const double rate = base.accrual_rate();
  if (!std::isfinite(rate)) throw InvalidArgument("increased enrollment needs a finite accrual rate");
  const auto with_n = [&](int n) {
    TrialDesign v = c.variant;
    v.patients = n;
    v.accrual_duration = n / rate;
    return v;
  };
  const auto fits = [&](int n) {
    return detail::duration_or_inf(with_n(n), d_variant) <= fixed_duration;
  };

  // Patients entering after fixed_duration cannot contribute events by then.
  const int cap = std::max(d_variant, static_cast<int>(std::ceil(rate * fixed_duration)) + 1);
  if (!fits(cap)) {
    c.feasible = false;
    c.variant = with_n(cap);
    c.variant_duration = detail::duration_or_inf(c.variant, d_variant);
    c.solved_value = cap;
    c.relative_change = std::numeric_limits<double>::infinity();
    return c;
  }
  int lo = d_variant - 1;  // does not fit (or is below the event count)
  int hi = cap;
  while (hi - lo > 1) {
    const int mid = lo + (hi - lo) / 2;
    (mid >= d_variant && fits(mid) ? hi : lo) = mid;
  }
  while (hi - 1 >= d_variant && fits(hi - 1)) --hi;
  c.variant = with_n(hi);
  c.variant_duration = trial_duration(c.variant, d_variant);
  c.solved_value = hi;
  c.relative_change = detail::percent_change(hi, base.patients);
  return c;
}

/// Convenience overloads that derive d_variant from `source`.
inline DesignComparison edge_case_prolonged(const TrialDesign& base, double phi,
                                            EventSource source = EventSource::rubinstein,
                                            const SimulationSettings& sim = {}) {
  return edge_case_prolonged(base, phi, variant_events(base, phi, source, sim));
}

inline DesignComparison edge_case_accelerated(const TrialDesign& base, double phi,
                                              double fixed_duration,
                                              EventSource source = EventSource::rubinstein,
                                              const SimulationSettings& sim = {}) {
  return edge_case_accelerated(base, phi, variant_events(base, phi, source, sim), fixed_duration);
}

inline DesignComparison edge_case_increased_n(const TrialDesign& base, double phi,
                                              double fixed_duration,
                                              EventSource source = EventSource::rubinstein,
                                              const SimulationSettings& sim = {}) {
  return edge_case_increased_n(base, phi, variant_events(base, phi, source, sim), fixed_duration);
}

/// All three edge cases for each ratio in `phis`, d_variant computed once
/// per ratio and shared by the three cases.
inline std::vector<DesignComparison> compare_designs(const TrialDesign& base,
                                                     const std::vector<double>& phis,
                                                     EventSource source,
                                                     const SimulationSettings& sim = {}) {
  const double fixed = trial_duration(base, base.events);
  std::vector<DesignComparison> out;
  for (double phi : phis) {
    const int d = variant_events(base, phi, source, sim);
    out.push_back(edge_case_prolonged(base, phi, d));
    out.push_back(edge_case_accelerated(base, phi, d, fixed));
    out.push_back(edge_case_increased_n(base, phi, d, fixed));
  }
  return out;
}

struct GridConfig {
  std::vector<double> hazard_ratios{0.5, 0.6, 0.7, 0.8};
  std::vector<double> control_medians{6.0, 12.0, 24.0};
  std::vector<double> event_patient_ratios{0.5, 0.6, 0.7, 0.8};
  std::vector<double> allocation_ratios{1.5, 2.0};
  double alpha = 0.025;
  double power = 0.8;
  PiecewiseExponential dropout = grid_dropout();
  EventSource source = EventSource::rubinstein;
  SimulationSettings simulation;
};

struct GridRow {
  double hazard_ratio;
  double control_median;
  double event_patient_ratio;
  double phi;
  EdgeCase edge_case;
  std::optional<DesignComparison> comparison;
  std::string error;  // set when the cell could not be evaluated
};

/// One row per (HR, CM, d/n, phi, edge case), in that nesting order.
inline std::vector<GridRow> summarize_grid(const GridConfig& config) {
  struct Cell {
    double hr, cm, dn, phi;
  };
  std::vector<Cell> cells;
  for (double hr : config.hazard_ratios)
    for (double cm : config.control_medians)
      for (double dn : config.event_patient_ratios)
        for (double phi : config.allocation_ratios) cells.push_back({hr, cm, dn, phi});

  constexpr EdgeCase cases[] = {EdgeCase::prolonged_trial, EdgeCase::accelerated_accrual,
                                EdgeCase::increased_enrollment};
  std::vector<GridRow> rows(cells.size() * 3);
  detail::parallel_for(cells.size(), [&](std::size_t i) {
    const Cell& cell = cells[i];
    for (std::size_t k = 0; k < 3; ++k) {
      rows[i * 3 + k] = {cell.hr, cell.cm, cell.dn, cell.phi, cases[k], std::nullopt, {}};
    }
    try {
      const TrialDesign base = build_grid_design(cell.hr, cell.cm, cell.dn, config.alpha,
                                                 config.power, config.dropout);
      SimulationSettings sim = config.simulation;
      sim.seed = derive_seed(config.simulation.seed, i);
      const int d = variant_events(base, cell.phi, config.source, sim);
      const double fixed = trial_duration(base, base.events);
      rows[i * 3 + 0].comparison = edge_case_prolonged(base, cell.phi, d);
      rows[i * 3 + 1].comparison = edge_case_accelerated(base, cell.phi, d, fixed);
      rows[i * 3 + 2].comparison = edge_case_increased_n(base, cell.phi, d, fixed);
    } catch (const std::exception& e) {
      for (std::size_t k = 0; k < 3; ++k) {
        if (!rows[i * 3 + k].comparison) rows[i * 3 + k].error = e.what();
      }
    }
  });
  return rows;
}

/// Monte Carlo mean of the calendar time of the d-th event.
inline double simulated_mean_duration(const TrialDesign& design, const SimulationSettings& sim) {
  return empirical_power(design, design.events, design.alpha, sim.replicates, sim.seed)
      .mean_duration;
}

}  // namespace evdesign
