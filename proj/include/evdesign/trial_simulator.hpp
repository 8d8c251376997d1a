#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "evdesign/detail/parallel.hpp"
#include "evdesign/error.hpp"
#include "evdesign/event_dynamics.hpp"
#include "evdesign/numerics.hpp"
#include "evdesign/power_engine.hpp"
#include "evdesign/random.hpp"
#include "evdesign/trial_data.hpp"
#include "evdesign/trial_design.hpp"

namespace evdesign {

/// Latent patients of one replicate. Arms are fixed counts (experimental
/// first), and each patient's three uniforms are addressed by
/// (seed, replicate, patient, purpose), so the draws do not depend on d.
inline std::vector<PatientRecord> simulate_patients(const TrialDesign& design, std::uint64_t seed,
                                                    std::uint64_t replicate) {
  const int n_e = design.simulated_arm_size(Arm::experimental);
  const PiecewiseExponential experimental = design.survival(Arm::experimental);
  const UniformAccrual accrual = design.accrual();
  std::vector<PatientRecord> patients;
  patients.reserve(static_cast<std::size_t>(design.patients));
  for (int p = 0; p < design.patients; ++p) {
    const Arm arm = p < n_e ? Arm::experimental : Arm::control;
    const auto id = static_cast<std::uint64_t>(p);
    CounterStream entry({seed, replicate, id, Purpose::entry});
    CounterStream event({seed, replicate, id, Purpose::event});
    CounterStream dropout({seed, replicate, id, Purpose::dropout});
    patients.push_back({arm, sample_accrual(accrual, entry),
                        sample_time(arm == Arm::experimental ? experimental : design.control, event),
                        sample_time(design.dropout, dropout)});
  }
  return patients;
}

/// Data cutoff at the d-th calendar event. With fewer than d events ever,
/// the replicate is flagged and analysed once everybody is fully observed.
inline TrialDataset apply_cutoff(std::span<const PatientRecord> patients, int d) {
  if (d < 1) throw InvalidArgument("cutoff needs at least one event");
  std::vector<double> event_times;
  event_times.reserve(patients.size());
  for (const auto& p : patients) {
    if (p.has_event()) event_times.push_back(p.calendar_event());
  }

  TrialDataset out;
  out.events_requested = d;
  if (static_cast<int>(event_times.size()) >= d) {
    std::nth_element(event_times.begin(), event_times.begin() + (d - 1), event_times.end());
    out.cutoff = event_times[static_cast<std::size_t>(d - 1)];
  } else {
    out.undersupplied = true;
    for (const auto& p : patients) {
      out.cutoff = std::max(out.cutoff, p.entry + std::min(p.latent_event, p.latent_dropout));
    }
  }

  out.records.reserve(patients.size());
  for (const auto& p : patients) {
    if (p.entry >= out.cutoff) continue;
    const double window = out.cutoff - p.entry;
    // Compare calendar times: cutoff - entry can round below latent_event
    // for the patient who defines the cutoff.
    const bool event = p.has_event() && p.calendar_event() <= out.cutoff;
    const double time = std::min({p.latent_event, p.latent_dropout, window});
    out.records.push_back({p.arm, p.entry, time, event});
    out.events_observed += event ? 1 : 0;
  }
  return out;
}

inline TrialDataset simulate_trial(const TrialDesign& design, int d, std::uint64_t seed,
                                   std::uint64_t replicate) {
  const auto patients = simulate_patients(design, seed, replicate);
  return apply_cutoff(patients, d);
}

/// Standardized logrank statistic for the experimental arm,
/// sum(O - E) / sqrt(sum V), hypergeometric variance at tied times.
/// Negative values favour the experimental arm.
inline double logrank_statistic(const TrialDataset& dataset) {
  std::vector<const Observation*> order;
  order.reserve(dataset.records.size());
  double at_risk_e = 0.0;
  double at_risk_c = 0.0;
  for (const auto& o : dataset.records) {
    order.push_back(&o);
    (o.arm == Arm::experimental ? at_risk_e : at_risk_c) += 1.0;
  }
  std::sort(order.begin(), order.end(),
            [](const Observation* a, const Observation* b) { return a->time < b->time; });

  double observed_minus_expected = 0.0;
  double variance = 0.0;
  bool any_event = false;
  for (std::size_t i = 0; i < order.size();) {
    const double t = order[i]->time;
    double events_e = 0.0, events_c = 0.0, leaving_e = 0.0, leaving_c = 0.0;
    for (; i < order.size() && order[i]->time == t; ++i) {
      const bool experimental = order[i]->arm == Arm::experimental;
      (experimental ? leaving_e : leaving_c) += 1.0;
      if (order[i]->event) (experimental ? events_e : events_c) += 1.0;
    }
    const double events = events_e + events_c;
    if (events > 0.0) {
      any_event = true;
      const double at_risk = at_risk_e + at_risk_c;
      const double share = at_risk_e / at_risk;
      observed_minus_expected += events_e - events * share;
      if (at_risk > 1.0) {
        variance += events * share * (1.0 - share) * (at_risk - events) / (at_risk - 1.0);
      }
    }
    at_risk_e -= leaving_e;
    at_risk_c -= leaving_c;
  }
  if (!any_event) throw Degenerate("logrank statistic needs at least one event");
  if (!(variance > 0.0)) throw Degenerate("logrank variance is zero");
  return observed_minus_expected / std::sqrt(variance);
}

inline void write_dataset_csv(std::ostream& os, const TrialDataset& dataset) {
  os << "arm,entry,time,event,cutoff\n";
  char line[160];
  for (const auto& o : dataset.records) {
    std::snprintf(line, sizeof line, "%s,%.17g,%.17g,%d,%.17g\n",
                  o.arm == Arm::experimental ? "experimental" : "control", o.entry, o.time,
                  o.event ? 1 : 0, dataset.cutoff);
    os << line;
  }
}

struct PowerEstimate {
  double power = 0.0;
  double mc_se = 0.0;
  int replicates = 0;     // analysable replicates behind `power`
  int requested = 0;
  int undersupplied = 0;  // replicates with fewer than d events
  int degenerate = 0;     // replicates with an undefined statistic
  double mean_duration = 0.0;
  double mean_events_experimental = 0.0;
  double mean_events_control = 0.0;
};

namespace detail {

struct ReplicateOutcome {
  bool analysable = false;
  bool rejected = false;
  bool undersupplied = false;
  double cutoff = 0.0;
  double events_experimental = 0.0;
  double events_control = 0.0;
};

inline ReplicateOutcome run_replicate(const TrialDesign& design, int d, double critical,
                                      double direction, std::uint64_t seed, std::uint64_t replicate) {
  const TrialDataset data = simulate_trial(design, d, seed, replicate);
  ReplicateOutcome out;
  out.undersupplied = data.undersupplied;
  out.cutoff = data.cutoff;
  for (const auto& o : data.records) {
    if (o.event) (o.arm == Arm::experimental ? out.events_experimental : out.events_control) += 1.0;
  }
  try {
    out.rejected = direction * logrank_statistic(data) > critical;
    out.analysable = true;
  } catch (const Degenerate&) {
    out.analysable = false;
  }
  return out;
}

}  // namespace detail

/// Monte Carlo power of the one-sided logrank test in the direction of the
/// true effect (benefit direction when theta = 0).
inline PowerEstimate empirical_power(const TrialDesign& design, int d, double alpha_one_sided,
                                     int replicates, std::uint64_t seed) {
  if (replicates < 1) throw InvalidArgument("need at least one replicate");
  if (!(alpha_one_sided > 0.0 && alpha_one_sided < 0.5)) {
    throw InvalidArgument("one-sided alpha must lie in (0, 0.5)");
  }
  const double critical = normal_quantile(1.0 - alpha_one_sided);
  const double direction = design.hazard_ratio > 1.0 ? 1.0 : -1.0;
  std::vector<detail::ReplicateOutcome> outcomes(static_cast<std::size_t>(replicates));
  detail::parallel_for(outcomes.size(), [&](std::size_t r) {
    outcomes[r] = detail::run_replicate(design, d, critical, direction, seed, r);
  });

  PowerEstimate est;
  est.requested = replicates;
  double rejections = 0.0;
  for (const auto& o : outcomes) {
    est.undersupplied += o.undersupplied ? 1 : 0;
    est.mean_duration += o.cutoff;
    est.mean_events_experimental += o.events_experimental;
    est.mean_events_control += o.events_control;
    if (!o.analysable) {
      ++est.degenerate;
      continue;
    }
    ++est.replicates;
    rejections += o.rejected ? 1.0 : 0.0;
  }
  est.mean_duration /= replicates;
  est.mean_events_experimental /= replicates;
  est.mean_events_control /= replicates;
  if (est.replicates > 0) {
    est.power = rejections / est.replicates;
    est.mc_se = std::sqrt(est.power * (1.0 - est.power) / est.replicates);
  }
  return est;
}

struct EventCalibration {
  int events = 0;
  PowerEstimate at_events;
  int evaluations = 0;
};

/// Smallest d whose simulated power reaches `target_power`. Every candidate
/// d reuses the same latent patients (common random numbers), only the
/// cutoff moves.
inline EventCalibration calibrate_events(const TrialDesign& design, double target_power,
                                         double alpha_one_sided, int replicates,
                                         std::uint64_t seed) {
  const double asymptote = asymptotic_total_events(design);
  const int cap = std::min(design.patients, static_cast<int>(std::floor(asymptote)));
  if (cap < 1) throw Unreachable("design yields fewer than one expected event", 1.0, asymptote);

  std::map<int, PowerEstimate> cache;
  const auto power_at = [&](int d) -> const PowerEstimate& {
    auto it = cache.find(d);
    if (it == cache.end()) {
      it = cache.emplace(d, empirical_power(design, d, alpha_one_sided, replicates, seed)).first;
    }
    return it->second;
  };
  const auto reaches = [&](int d) { return d >= 1 && power_at(d).power >= target_power; };

  if (!reaches(cap)) {
    throw Unreachable("simulated power stays below target even at maximal follow-up", cap + 1.0,
                      asymptote);
  }
  int start = cap;
  try {
    start = std::clamp(required_events(ApproxMethod::rubinstein, design, target_power), 1, cap);
  } catch (const std::exception&) {
    // Fall back to the top of the range; bisection still finds the answer.
  }

  int lo = 0;  // power below target
  int hi = cap;
  if (reaches(start)) {
    hi = start;
    for (int step = 1;; step *= 2) {
      const int probe = hi - step;
      if (probe < 1) break;
      if (!reaches(probe)) {
        lo = probe;
        break;
      }
      hi = probe;
    }
  } else {
    lo = start;
    for (int step = 1;; step *= 2) {
      const int probe = lo + step;
      if (probe >= cap) break;
      if (reaches(probe)) {
        hi = probe;
        break;
      }
      lo = probe;
    }
  }
  while (hi - lo > 1) {
    const int mid = lo + (hi - lo) / 2;
    (reaches(mid) ? hi : lo) = mid;
  }
  return {hi, power_at(hi), static_cast<int>(cache.size())};
}

}  // namespace evdesign
