#pragma once

#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "evdesign/config.hpp"
#include "evdesign/design_studio.hpp"
#include "evdesign/power_engine.hpp"
#include "evdesign/properties.hpp"
#include "evdesign/report.hpp"
#include "evdesign/trial_simulator.hpp"

namespace evdesign::cli {

enum ExitCode : int { ok = 0, config_error = 1, infeasible_only = 2, numeric_failure = 3 };

struct CommandResult {
  report::Table table;
  std::optional<report::Table> curve;  // optimal-rr plot data
  int exit_code = ok;
};

inline constexpr int default_bias_grid_replicates = 5000;
inline constexpr int default_replicates = 10000;

namespace detail {

inline const TrialDesign& require_design(const ScenarioConfig& c) {
  if (!c.design) throw ConfigError("this command needs a 'design' block");
  return *c.design;
}

inline int replicates(const ScenarioConfig& c, int fallback) {
  return c.run.replicates.value_or(fallback);
}

/// "3:2" style label for ratios with a small denominator.
inline std::string ratio_label(double phi) {
  for (int q = 1; q <= 10; ++q) {
    const double p = phi * q;
    if (std::abs(p - std::round(p)) < 1e-9) {
      return std::to_string(static_cast<long>(std::round(p))) + ":" + std::to_string(q);
    }
  }
  return report::format_number(phi) + ":1";
}

inline bool is_analytic(ApproxMethod m) { return m != ApproxMethod::empirical; }

inline bool is_infeasibility(const std::exception& e) {
  return dynamic_cast<const Unreachable*>(&e) != nullptr;
}

}  // namespace detail

/// Power of the configured design under each requested method.
inline CommandResult cmd_power(const ScenarioConfig& config) {
  const TrialDesign& design = detail::require_design(config);
  CommandResult out;
  out.table.columns = {"method", "rr", "phi", "events", "mu", "power", "mc_se", "replicates",
                       "mean_duration", "status"};
  const report::Null null;
  int failures = 0;
  for (ApproxMethod m : config.run.methods) {
    const std::string name(to_string(m));
    try {
      if (detail::is_analytic(m)) {
        const MuValue mu = mu_for_design(m, design, design.events);
        out.table.add({name, detail::ratio_label(design.allocation_ratio), design.allocation_ratio,
                       design.events, mu.mu, power_from_mu(mu, design.alpha), null, null, null, "ok"});
      } else {
        const auto est = empirical_power(design, design.events, design.alpha,
                                         detail::replicates(config, default_replicates),
                                         config.run.seed);
        out.table.add({name, detail::ratio_label(design.allocation_ratio), design.allocation_ratio,
                       design.events, null, est.power, est.mc_se, est.replicates, est.mean_duration,
                       "ok"});
      }
    } catch (const std::exception& e) {
      if (!detail::is_infeasibility(e)) throw;
      ++failures;
      out.table.add({name, detail::ratio_label(design.allocation_ratio), design.allocation_ratio,
                     design.events, null, null, null, null, null, e.what()});
    }
  }
  if (failures > 0 && failures == static_cast<int>(out.table.rows.size())) {
    out.exit_code = infeasible_only;
  }
  return out;
}

/// Bias of each analytic method against simulation over the grid; the
/// event size is the 1:1 grid value at every ratio.
inline CommandResult cmd_bias_grid(const ScenarioConfig& config) {
  std::vector<ApproxMethod> methods;
  for (ApproxMethod m : config.run.methods) {
    if (detail::is_analytic(m)) methods.push_back(m);
  }
  if (methods.empty()) throw ConfigError("bias-grid needs at least one analytic method");
  const double alpha = config.design ? config.design->alpha : 0.025;
  const double power = config.design ? config.design->target_power : 0.8;
  const int reps = detail::replicates(config, default_bias_grid_replicates);
  const GridSpec& g = config.grid;

  CommandResult out;
  out.table.columns = {"hazard_ratio", "control_median", "event_patient_ratio", "rr", "phi",
                       "events", "patients", "method", "power_method", "power_empirical", "bias",
                       "mc_se", "replicates", "status"};
  const report::Null null;
  std::uint64_t cell = 0;
  int analysed = 0;
  for (double hr : g.hazard_ratios) {
    for (double cm : g.control_medians) {
      for (double dn : g.event_patient_ratios) {
        for (double phi : g.allocation_ratios) {
          const std::uint64_t seed = derive_seed(config.run.seed, cell++);
          TrialDesign design;
          std::optional<PowerEstimate> est;
          std::string failure;
          try {
            design = build_grid_design(hr, cm, dn, alpha, power).with_allocation_ratio(phi);
            est = empirical_power(design, design.events, alpha, reps, seed);
          } catch (const InvalidArgument& e) {
            throw ConfigError(e.what());
          } catch (const std::exception& e) {
            failure = e.what();
          }
          for (ApproxMethod m : methods) {
            std::vector<report::Cell> row{hr, cm, dn, detail::ratio_label(phi), phi,
                                          design.events, design.patients, std::string(to_string(m))};
            if (!est) {
              row.insert(row.end(), {null, null, null, null, null, failure});
              out.table.add(std::move(row));
              continue;
            }
            try {
              const double p = analytic_power(m, design, design.events);
              row.insert(row.end(), {p, est->power, p - est->power, est->mc_se, est->replicates, "ok"});
              ++analysed;
            } catch (const std::exception& e) {
              row.insert(row.end(), {null, est->power, null, est->mc_se, est->replicates, e.what()});
            }
            out.table.add(std::move(row));
          }
        }
      }
    }
  }
  if (analysed == 0) out.exit_code = infeasible_only;
  return out;
}

/// Power-maximizing ratio per method, plus an optional power-vs-ratio curve.
inline CommandResult cmd_optimal_rr(const ScenarioConfig& config, bool with_curve) {
  const TrialDesign& design = detail::require_design(config);
  const double d = design.events;
  const int reps = detail::replicates(config, default_replicates);
  CommandResult out;
  out.table.columns = {"method", "phi_star", "balance", "power_at_phi_star", "power_at_1_1",
                       "power_gain", "status"};
  const report::Null null;
  std::optional<double> rubinstein_phi;
  bool wants_empirical = false;
  int solved = 0;
  for (ApproxMethod m : config.run.methods) {
    if (!detail::is_analytic(m)) {
      wants_empirical = true;
      continue;
    }
    const std::string name(to_string(m));
    try {
      const AllocationSolution sol = optimal_rr(m, design, d);
      if (m == ApproxMethod::rubinstein) rubinstein_phi = sol.phi_star;
      const double at_star = analytic_power(m, design.with_allocation_ratio(sol.phi_star), d);
      const double at_one = analytic_power(m, design.with_allocation_ratio(1.0), d);
      out.table.add({name, sol.phi_star, sol.achieved_balance, at_star, at_one, at_star - at_one, "ok"});
      ++solved;
    } catch (const BracketFailure& e) {
      out.table.add({name, null, null, null, null, null, e.what()});
    } catch (const Unreachable& e) {
      out.table.add({name, null, null, null, null, null, e.what()});
    }
  }
  if (wants_empirical) {
    // Simulated power at the Rubinstein optimum against 1:1.
    try {
      const double phi = rubinstein_phi ? *rubinstein_phi
                                        : optimal_rr(ApproxMethod::rubinstein, design, d).phi_star;
      const auto at_star = empirical_power(design.with_allocation_ratio(phi), design.events,
                                           design.alpha, reps, config.run.seed);
      const auto at_one = empirical_power(design.with_allocation_ratio(1.0), design.events,
                                          design.alpha, reps, config.run.seed);
      out.table.add({"empirical", phi, evdesign::detail::balance_or_nan(design, phi, d), at_star.power,
                     at_one.power, at_star.power - at_one.power, "ok"});
      ++solved;
    } catch (const BracketFailure& e) {
      out.table.add({"empirical", null, null, null, null, null, e.what()});
    } catch (const Unreachable& e) {
      out.table.add({"empirical", null, null, null, null, null, e.what()});
    }
  }
  if (solved == 0) out.exit_code = infeasible_only;

  if (with_curve) {
    const CurveSpec spec = config.run.curve.value_or(CurveSpec{});
    report::Table curve;
    curve.columns = {"phi", "power_rubinstein", "power_empirical", "mc_se", "balance"};
    const int steps = static_cast<int>(std::floor((spec.to - spec.from) / spec.step + 1e-9));
    for (int i = 0; i <= steps; ++i) {
      const double phi = spec.from + i * spec.step;
      const TrialDesign v = design.with_allocation_ratio(phi);
      report::Cell analytic = null, balance = null;
      try {
        analytic = analytic_power(ApproxMethod::rubinstein, v, d);
        balance = evdesign::detail::balance_at(design, phi, d);
      } catch (const Unreachable&) {
      }
      const auto est = empirical_power(v, design.events, design.alpha, reps, config.run.seed);
      curve.add({phi, analytic, est.power, est.mc_se, balance});
    }
    out.curve = std::move(curve);
  }
  return out;
}

/// Base design plus three edge cases per ratio. Durations are simulated
/// means; values held at the base design are flagged.
inline CommandResult cmd_design_compare(const ScenarioConfig& config) {
  const TrialDesign& base = detail::require_design(config);
  if (base.allocation_ratio != 1.0) throw ConfigError("design-compare needs a 1:1 base design");
  const SimulationSettings sim{detail::replicates(config, default_replicates), config.run.seed};
  const auto rows = compare_designs(base, config.run.allocation_ratios, config.run.event_source, sim);

  CommandResult out;
  out.table.columns = {"alt", "rr", "design", "events", "patients", "accrual_duration",
                       "trial_duration", "expected_duration", "accrual_rate", "feasible", "fixed"};
  const report::Null null;
  out.table.add({"base", "1:1", "base design", base.events, base.patients, base.accrual_duration,
                 simulated_mean_duration(base, sim), trial_duration(base, base.events),
                 base.accrual_rate(), 1, ""});
  int feasible = 0;
  int alt = 0;
  for (const DesignComparison& c : rows) {
    const TrialDesign& v = c.variant;
    const std::string label = "alt" + std::to_string(++alt);
    std::string description = detail::ratio_label(c.phi) + " ";
    report::Cell n = v.patients, accrual = v.accrual_duration, duration = null,
                 expected = c.variant_duration, rate = v.accrual_rate();
    // Increased enrollment at an infeasible window has no meaningful design.
    if (c.feasible || c.edge_case == EdgeCase::accelerated_accrual) {
      duration = simulated_mean_duration(v, sim);
    }
    if (!c.feasible && c.edge_case == EdgeCase::increased_enrollment) {
      n = null;
      accrual = null;
      rate = null;
      expected = null;
    }
    std::string fixed;
    switch (c.edge_case) {
      case EdgeCase::prolonged_trial:
        description += "prolonged trial";
        n = report::fixed(n);
        accrual = report::fixed(accrual);
        fixed = "patients;accrual_duration";
        break;
      case EdgeCase::accelerated_accrual:
        description += "accelerated accrual";
        n = report::fixed(n);
        fixed = "patients";
        if (c.feasible) {
          duration = report::fixed(duration);
          fixed += ";trial_duration";
        }
        break;
      case EdgeCase::increased_enrollment:
        description += "increased enrollment";
        if (c.feasible) {
          duration = report::fixed(duration);
          fixed = "trial_duration";
        }
        break;
    }
    if (!c.feasible) description += " (infeasible)";
    feasible += c.feasible ? 1 : 0;
    out.table.add({label, detail::ratio_label(c.phi), description, c.d_variant, n, accrual, duration,
                   expected, rate, c.feasible ? 1 : 0, fixed});
  }
  if (!rows.empty() && feasible == 0) out.exit_code = infeasible_only;
  return out;
}

/// Edge cases over the HR x CM x d/n grid, one row per cell and edge case.
inline CommandResult cmd_design_grid(const ScenarioConfig& config) {
  GridConfig grid;
  grid.hazard_ratios = config.grid.hazard_ratios;
  grid.control_medians = config.grid.control_medians;
  grid.event_patient_ratios = config.grid.event_patient_ratios;
  grid.allocation_ratios = config.grid.allocation_ratios;
  grid.source = config.run.event_source;
  grid.simulation = {detail::replicates(config, default_replicates), config.run.seed};
  if (config.design) {
    grid.alpha = config.design->alpha;
    grid.power = config.design->target_power;
  }
  std::vector<GridRow> rows;
  try {
    rows = summarize_grid(grid);
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }

  CommandResult out;
  out.table.columns = {"hazard_ratio", "control_median", "event_patient_ratio", "rr", "edge_case",
                       "base_events", "events", "events_change", "base_patients", "patients",
                       "accrual_duration", "base_duration", "trial_duration", "relative_change",
                       "feasible", "status"};
  const report::Null null;
  int feasible = 0;
  for (const GridRow& r : rows) {
    std::vector<report::Cell> row{r.hazard_ratio, r.control_median, r.event_patient_ratio,
                                  detail::ratio_label(r.phi), std::string(to_string(r.edge_case))};
    if (!r.comparison) {
      row.insert(row.end(), {null, null, null, null, null, null, null, null, null, 0, r.error});
    } else {
      const DesignComparison& c = *r.comparison;
      feasible += c.feasible ? 1 : 0;
      row.insert(row.end(), {c.base.events, c.d_variant, c.events_change, c.base.patients,
                             c.variant.patients, c.variant.accrual_duration, c.base_duration,
                             c.variant_duration, c.relative_change, c.feasible ? 1 : 0, "ok"});
    }
    out.table.add(std::move(row));
  }
  if (feasible == 0) out.exit_code = infeasible_only;
  return out;
}

/// Runs the invariant suites; any failing check makes the command fail.
inline CommandResult cmd_validate(const ScenarioConfig& config) {
  const TrialDesign design =
      config.design ? *config.design : build_grid_design(0.5, 12.0, 0.5);
  CommandResult out;
  out.table.columns = {"suite", "check", "measured", "bound", "result"};
  for (const auto& c : properties::run_all(design, config.run.seed)) {
    out.table.add({c.suite, c.name, c.measured, c.bound, c.pass ? "pass" : "fail"});
    if (!c.pass) out.exit_code = numeric_failure;
  }
  return out;
}

}  // namespace evdesign::cli
