#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "evdesign/design_studio.hpp"
#include "evdesign/error.hpp"
#include "evdesign/power_engine.hpp"
#include "evdesign/trial_design.hpp"

namespace evdesign {

/// Raised for malformed or inconsistent scenario files.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GridSpec {
  std::vector<double> hazard_ratios{0.5, 0.6, 0.7, 0.8};
  std::vector<double> control_medians{12.0};
  std::vector<double> event_patient_ratios{0.5, 0.6, 0.7, 0.8};
  std::vector<double> allocation_ratios{1.0, 1.5, 2.0};
};

struct CurveSpec {
  double from = 0.5;
  double to = 3.0;
  double step = 0.05;
};

struct RunSettings {
  std::vector<ApproxMethod> methods{ApproxMethod::schoenfeld, ApproxMethod::freedman,
                                    ApproxMethod::rubinstein, ApproxMethod::empirical};
  std::optional<int> replicates;  // command-specific default when absent
  std::uint64_t seed = 20240101;
  std::string out;
  std::string format = "csv";
  std::vector<double> allocation_ratios{1.5, 2.0};
  EventSource event_source = EventSource::rubinstein;
  std::optional<CurveSpec> curve;
};

struct ScenarioConfig {
  std::string name;
  std::optional<TrialDesign> design;
  GridSpec grid;
  RunSettings run;
};

namespace detail {

using nlohmann::json;

inline const json* find(const json& j, const char* key) {
  const auto it = j.find(key);
  return it == j.end() || it->is_null() ? nullptr : &*it;
}

inline double number(const json& j, const char* key) {
  const json* v = find(j, key);
  if (!v || !v->is_number()) throw ConfigError(std::string("'") + key + "' must be a number");
  return v->get<double>();
}

inline int integer(const json& j, const char* key) {
  const json* v = find(j, key);
  if (!v || !v->is_number_integer()) {
    throw ConfigError(std::string("'") + key + "' must be an integer");
  }
  return v->get<int>();
}

inline std::vector<double> numbers(const json& j, const char* key) {
  if (!j.is_array()) throw ConfigError(std::string("'") + key + "' must be an array of numbers");
  std::vector<double> out;
  for (const auto& x : j) {
    if (!x.is_number()) throw ConfigError(std::string("'") + key + "' must be an array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

inline void reject_unknown(const json& j, std::initializer_list<const char*> known,
                           const char* where) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ConfigError(std::string("unknown key '") + key + "' in " + where);
  }
}

inline PiecewiseExponential parse_model(const json& j, const char* where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be an object");
  reject_unknown(j, {"cuts", "hazards"}, where);
  std::vector<double> cuts;
  if (const json* c = find(j, "cuts")) cuts = numbers(*c, "cuts");
  const json* h = find(j, "hazards");
  if (!h) throw ConfigError(std::string(where) + " needs 'hazards'");
  try {
    return {std::move(cuts), numbers(*h, "hazards")};
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string(where) + ": " + e.what());
  }
}

inline json model_json(const PiecewiseExponential& m) {
  return {{"cuts", std::vector<double>(m.cuts().begin(), m.cuts().end())},
          {"hazards", std::vector<double>(m.hazards().begin(), m.hazards().end())}};
}

/// Survival block: {"control": model, "hazard_ratio": x} or
/// {"control": model, "experimental": model} with proportional hazards.
inline void parse_survival(const json& s, TrialDesign& d) {
  reject_unknown(s, {"control", "experimental", "hazard_ratio"}, "survival");
  const json* c = find(s, "control");
  if (!c) throw ConfigError("survival block needs a 'control' model");
  d.control = parse_model(*c, "survival.control");
  const json* e = find(s, "experimental");
  const json* hr = find(s, "hazard_ratio");
  if ((e != nullptr) == (hr != nullptr)) {
    throw ConfigError("survival block needs exactly one of 'experimental' or 'hazard_ratio'");
  }
  if (hr) {
    d.hazard_ratio = number(s, "hazard_ratio");
    return;
  }
  const PiecewiseExponential exp_model = parse_model(*e, "survival.experimental");
  if (!std::ranges::equal(exp_model.cuts(), d.control.cuts())) {
    throw ConfigError("experimental and control models must share cut points");
  }
  const double ratio = exp_model.hazards()[0] / d.control.hazards()[0];
  for (std::size_t j = 0; j < exp_model.intervals(); ++j) {
    if (std::abs(exp_model.hazards()[j] / d.control.hazards()[j] - ratio) > 1e-9 * ratio) {
      throw ConfigError("per-arm hazards must be proportional (constant hazard ratio)");
    }
  }
  d.hazard_ratio = ratio;
}

inline TrialDesign parse_design(const json& j) {
  if (!j.is_object()) throw ConfigError("'design' must be an object");
  reject_unknown(j,
                 {"hazard_ratio", "control_median", "survival", "allocation_ratio", "accrual_rate",
                  "accrual_duration", "patients", "events", "event_patient_ratio", "dropout",
                  "alpha", "sides", "power"},
                 "design");
  TrialDesign d;

  const bool by_median = find(j, "hazard_ratio") || find(j, "control_median");
  const bool by_models = find(j, "survival") != nullptr;
  if (by_median == by_models) {
    throw ConfigError("give exactly one of {hazard_ratio + control_median} or 'survival'");
  }
  if (by_median) {
    d.hazard_ratio = number(j, "hazard_ratio");
    const double median = number(j, "control_median");
    if (!(median > 0.0)) throw ConfigError("control_median must be positive");
    d.control = PiecewiseExponential::from_median(median);
  } else {
    parse_survival(*find(j, "survival"), d);
  }
  if (!(d.hazard_ratio > 0.0) || !std::isfinite(d.hazard_ratio)) {
    throw ConfigError("hazard_ratio must be positive");
  }

  d.allocation_ratio = find(j, "allocation_ratio") ? number(j, "allocation_ratio") : 1.0;

  if (const json* drop = find(j, "dropout")) {
    reject_unknown(*drop, {"probability", "period", "hazard"}, "dropout");
    try {
      if (find(*drop, "hazard")) {
        if (find(*drop, "probability")) {
          throw ConfigError("dropout takes either 'hazard' or 'probability' + 'period'");
        }
        // A zero hazard means no dropout; a negligible rate keeps the model valid.
        const double h = number(*drop, "hazard");
        d.dropout = PiecewiseExponential::exponential(h == 0.0 ? 1e-12 : h);
      } else {
        d.dropout = PiecewiseExponential::from_loss_probability(number(*drop, "probability"),
                                                                number(*drop, "period"));
      }
    } catch (const InvalidArgument& e) {
      throw ConfigError(std::string("dropout: ") + e.what());
    }
  }

  const int sides = find(j, "sides") ? integer(j, "sides") : 2;
  if (sides != 1 && sides != 2) throw ConfigError("'sides' must be 1 or 2");
  const double alpha = find(j, "alpha") ? number(j, "alpha") : 0.05;
  d.alpha = sides == 2 ? alpha / 2.0 : alpha;
  d.target_power = find(j, "power") ? number(j, "power") : 0.8;
  if (!(d.alpha > 0.0 && d.alpha < 0.5)) throw ConfigError("one-sided alpha must lie in (0, 0.5)");
  if (!(d.target_power > d.alpha && d.target_power < 1.0)) {
    throw ConfigError("power must lie in (alpha, 1)");
  }

  const bool has_events = find(j, "events") != nullptr;
  const bool has_ratio = find(j, "event_patient_ratio") != nullptr;
  if (has_events == has_ratio) {
    throw ConfigError("give exactly one of 'events' or 'event_patient_ratio'");
  }
  const bool has_patients = find(j, "patients") != nullptr;
  if (has_events) {
    d.events = integer(j, "events");
    if (!has_patients) throw ConfigError("'events' needs 'patients'");
    d.patients = integer(j, "patients");
  } else {
    const double ratio = number(j, "event_patient_ratio");
    if (!(ratio > 0.0 && ratio <= 1.0)) throw ConfigError("event_patient_ratio must lie in (0, 1]");
    if (has_patients) {
      d.patients = integer(j, "patients");
      d.events = static_cast<int>(std::lround(d.patients * ratio));
    } else {
      // Grid rule: d from Schoenfeld at 1:1 with two-decimal quantiles.
      d.events = schoenfeld_events(d.log_hazard_ratio(), 1.0, d.alpha, d.target_power,
                                   QuantileConvention::tabulated);
      d.patients = static_cast<int>(std::ceil(d.events / ratio - 1e-9));
    }
  }
  if (d.patients < 1 || d.events < 1) throw ConfigError("patients and events must be positive");
  if (d.events > d.patients) throw ConfigError("events cannot exceed patients");

  const bool has_rate = find(j, "accrual_rate") != nullptr;
  const bool has_duration = find(j, "accrual_duration") != nullptr;
  if (has_rate && has_duration) {
    throw ConfigError("give at most one of 'accrual_rate' or 'accrual_duration'");
  }
  if (has_duration) {
    d.accrual_duration = number(j, "accrual_duration");
  } else {
    const double rate = has_rate ? number(j, "accrual_rate") : grid_accrual_rate(d.hazard_ratio);
    if (!(rate > 0.0)) throw ConfigError("accrual rate must be positive");
    d.accrual_duration = d.patients / rate;
  }

  try {
    validate(d);
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  return d;
}

inline RunSettings parse_run(const json& j) {
  if (!j.is_object()) throw ConfigError("'run' must be an object");
  reject_unknown(j,
                 {"methods", "replicates", "seed", "out", "format", "allocation_ratios",
                  "event_source", "curve"},
                 "run");
  RunSettings r;
  try {
    if (const json* m = find(j, "methods")) {
      if (!m->is_array() || m->empty()) throw ConfigError("'methods' must be a non-empty array");
      r.methods.clear();
      for (const auto& x : *m) r.methods.push_back(parse_method(x.get<std::string>()));
    }
    if (const json* s = find(j, "event_source")) r.event_source = parse_event_source(s->get<std::string>());
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("'methods' and 'event_source' take strings");
  }
  if (find(j, "replicates")) {
    r.replicates = integer(j, "replicates");
    if (*r.replicates < 1) throw ConfigError("'replicates' must be positive");
  }
  if (const json* s = find(j, "seed")) {
    if (!s->is_number_unsigned()) throw ConfigError("'seed' must be a nonnegative integer");
    r.seed = s->get<std::uint64_t>();
  }
  if (const json* o = find(j, "out")) {
    if (!o->is_string()) throw ConfigError("'out' must be a string");
    r.out = o->get<std::string>();
  }
  if (const json* f = find(j, "format")) {
    if (!f->is_string()) throw ConfigError("'format' must be a string");
    r.format = f->get<std::string>();
  }
  if (r.format != "csv" && r.format != "json") throw ConfigError("format must be 'csv' or 'json'");
  if (const json* a = find(j, "allocation_ratios")) r.allocation_ratios = numbers(*a, "allocation_ratios");
  if (const json* c = find(j, "curve")) {
    reject_unknown(*c, {"from", "to", "step"}, "run.curve");
    CurveSpec spec;
    if (find(*c, "from")) spec.from = number(*c, "from");
    if (find(*c, "to")) spec.to = number(*c, "to");
    if (find(*c, "step")) spec.step = number(*c, "step");
    if (!(spec.from > 0.0 && spec.to >= spec.from && spec.step > 0.0)) {
      throw ConfigError("curve needs 0 < from <= to and step > 0");
    }
    r.curve = spec;
  }
  for (double phi : r.allocation_ratios) {
    if (!(phi > 0.0)) throw ConfigError("allocation ratios must be positive");
  }
  return r;
}

inline GridSpec parse_grid(const json& j) {
  if (!j.is_object()) throw ConfigError("'grid' must be an object");
  reject_unknown(j, {"hazard_ratios", "control_medians", "event_patient_ratios", "allocation_ratios"},
                 "grid");
  GridSpec g;
  if (const json* v = find(j, "hazard_ratios")) g.hazard_ratios = numbers(*v, "hazard_ratios");
  if (const json* v = find(j, "control_medians")) g.control_medians = numbers(*v, "control_medians");
  if (const json* v = find(j, "event_patient_ratios")) {
    g.event_patient_ratios = numbers(*v, "event_patient_ratios");
  }
  if (const json* v = find(j, "allocation_ratios")) g.allocation_ratios = numbers(*v, "allocation_ratios");
  for (double hr : g.hazard_ratios) {
    if (!(hr > 0.0 && hr < 1.0)) throw ConfigError("grid hazard ratios must lie in (0, 1)");
  }
  for (double dn : g.event_patient_ratios) {
    if (!(dn > 0.0 && dn <= 1.0)) throw ConfigError("grid event-patient ratios must lie in (0, 1]");
  }
  for (double cm : g.control_medians) {
    if (!(cm > 0.0)) throw ConfigError("grid control medians must be positive");
  }
  for (double phi : g.allocation_ratios) {
    if (!(phi > 0.0)) throw ConfigError("grid allocation ratios must be positive");
  }
  return g;
}

}  // namespace detail

inline ScenarioConfig parse_config(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  detail::reject_unknown(j, {"name", "design", "grid", "run"}, "config");
  ScenarioConfig c;
  if (const auto* n = detail::find(j, "name")) c.name = n->get<std::string>();
  if (const auto* d = detail::find(j, "design")) c.design = detail::parse_design(*d);
  if (const auto* g = detail::find(j, "grid")) c.grid = detail::parse_grid(*g);
  if (const auto* r = detail::find(j, "run")) c.run = detail::parse_run(*r);
  return c;
}

inline ScenarioConfig parse_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
  return parse_config(j);
}

inline ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

/// Lossless form: explicit models, hazards and one-sided alpha, so that
/// parse_config(to_json(c)) reproduces every field bit for bit.
inline nlohmann::json to_json(const ScenarioConfig& c) {
  using nlohmann::json;
  json j;
  if (!c.name.empty()) j["name"] = c.name;
  if (c.design) {
    const TrialDesign& d = *c.design;
    j["design"] = {{"survival", {{"control", detail::model_json(d.control)}, {"hazard_ratio", d.hazard_ratio}}},
                   {"allocation_ratio", d.allocation_ratio},
                   {"accrual_duration", d.accrual_duration},
                   {"patients", d.patients},
                   {"events", d.events},
                   {"dropout", {{"hazard", d.dropout.hazards()[0]}}},
                   {"alpha", d.alpha},
                   {"sides", 1},
                   {"power", d.target_power}};
  }
  j["grid"] = {{"hazard_ratios", c.grid.hazard_ratios},
               {"control_medians", c.grid.control_medians},
               {"event_patient_ratios", c.grid.event_patient_ratios},
               {"allocation_ratios", c.grid.allocation_ratios}};
  json methods = json::array();
  for (ApproxMethod m : c.run.methods) methods.push_back(std::string(to_string(m)));
  json run = {{"methods", methods},
              {"seed", c.run.seed},
              {"format", c.run.format},
              {"allocation_ratios", c.run.allocation_ratios},
              {"event_source", std::string(to_string(c.run.event_source))}};
  if (c.run.replicates) run["replicates"] = *c.run.replicates;
  if (!c.run.out.empty()) run["out"] = c.run.out;
  if (c.run.curve) {
    run["curve"] = {{"from", c.run.curve->from}, {"to", c.run.curve->to}, {"step", c.run.curve->step}};
  }
  j["run"] = run;
  return j;
}

}  // namespace evdesign
