#pragma once

#include <limits>
#include <vector>

#include "evdesign/stochastic_models.hpp"

namespace evdesign {

/// Latent, pre-cutoff patient: calendar entry plus times from entry.
struct PatientRecord {
  Arm arm;
  double entry;
  double latent_event;
  double latent_dropout;

  bool has_event() const noexcept { return latent_event <= latent_dropout; }
  /// Calendar time of the event, or +inf when dropout comes first.
  double calendar_event() const noexcept {
    return has_event() ? entry + latent_event : std::numeric_limits<double>::infinity();
  }
};

struct Observation {
  Arm arm;
  double entry;
  double time;  // X_i, follow-up from entry
  bool event;   // delta_i
};

/// Analysis data set at the data cutoff.
struct TrialDataset {
  std::vector<Observation> records;
  double cutoff = 0.0;
  int events_observed = 0;
  int events_requested = 0;
  /// Fewer than the requested events ever occurred; analysed at maximal follow-up.
  bool undersupplied = false;
};

}  // namespace evdesign

