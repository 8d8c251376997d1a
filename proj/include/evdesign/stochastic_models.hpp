#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "evdesign/error.hpp"
#include "evdesign/random.hpp"

namespace evdesign {

enum class Arm { experimental, control };

inline std::string_view to_string(Arm arm) {
  return arm == Arm::experimental ? "experimental" : "control";
}

/// Piecewise-constant hazard on [0, inf). `cuts` holds the interior change
/// points t_1 < ... < t_{J-1}; the first interval starts at 0 and the last
/// one extends to infinity. One hazard per interval.
class PiecewiseExponential {
 public:
  PiecewiseExponential(std::vector<double> cuts, std::vector<double> hazards)
      : cuts_(std::move(cuts)), hazards_(std::move(hazards)) {
    if (hazards_.empty()) {
      throw InvalidArgument("piecewise exponential: at least one hazard required");
    }
    if (cuts_.size() + 1 != hazards_.size()) {
      throw InvalidArgument("piecewise exponential: need exactly one hazard per interval (" +
                            std::to_string(cuts_.size() + 1) + " intervals, " +
                            std::to_string(hazards_.size()) + " hazards)");
    }
    for (double h : hazards_) {
      if (!(h > 0.0) || !std::isfinite(h)) {
        throw InvalidArgument("piecewise exponential: hazards must be positive and finite");
      }
    }
    double previous = 0.0;
    for (double c : cuts_) {
      if (!(c > previous) || !std::isfinite(c)) {
        throw InvalidArgument("piecewise exponential: cuts must be positive and strictly increasing");
      }
      previous = c;
    }
    cumulative_at_cut_.reserve(cuts_.size());
    double acc = 0.0;
    double start = 0.0;
    for (std::size_t j = 0; j < cuts_.size(); ++j) {
      acc += hazards_[j] * (cuts_[j] - start);
      cumulative_at_cut_.push_back(acc);
      start = cuts_[j];
    }
  }

  static PiecewiseExponential exponential(double rate) { return {{}, {rate}}; }

  static PiecewiseExponential from_median(double median_months) {
    if (!(median_months > 0.0)) throw InvalidArgument("median must be positive");
    return exponential(std::numbers::ln2 / median_months);
  }

  /// Exponential model in which `probability` of subjects are lost every
  /// `period` months: hazard -ln(1 - p) / period.
  static PiecewiseExponential from_loss_probability(double probability, double period_months) {
    if (!(probability > 0.0 && probability < 1.0) || !(period_months > 0.0)) {
      throw InvalidArgument("loss probability must lie in (0, 1) and period must be positive");
    }
    return exponential(-std::log1p(-probability) / period_months);
  }

  std::span<const double> cuts() const noexcept { return cuts_; }
  std::span<const double> hazards() const noexcept { return hazards_; }
  std::size_t intervals() const noexcept { return hazards_.size(); }
  bool is_exponential() const noexcept { return hazards_.size() == 1; }

  /// Start of interval j (0 for the first).
  double interval_start(std::size_t j) const noexcept { return j == 0 ? 0.0 : cuts_[j - 1]; }
  /// End of interval j (infinity for the last).
  double interval_end(std::size_t j) const noexcept {
    return j < cuts_.size() ? cuts_[j] : std::numeric_limits<double>::infinity();
  }

  std::size_t interval_of(double t) const noexcept {
    return static_cast<std::size_t>(std::upper_bound(cuts_.begin(), cuts_.end(), t) - cuts_.begin());
  }

  double hazard(double t) const {
    check_time(t);
    return hazards_[interval_of(t)];
  }

  double cumulative_hazard(double t) const {
    check_time(t);
    if (std::isinf(t)) return std::numeric_limits<double>::infinity();
    const std::size_t j = interval_of(t);
    const double before = j == 0 ? 0.0 : cumulative_at_cut_[j - 1];
    return before + hazards_[j] * (t - interval_start(j));
  }

  double survivor(double t) const { return std::exp(-cumulative_hazard(t)); }
  double density(double t) const { return hazard(t) * survivor(t); }

  /// Smallest t with cumulative_hazard(t) = h.
  double inverse_cumulative_hazard(double h) const {
    if (!(h >= 0.0)) throw InvalidArgument("cumulative hazard must be nonnegative");
    const std::size_t j = static_cast<std::size_t>(
        std::upper_bound(cumulative_at_cut_.begin(), cumulative_at_cut_.end(), h) -
        cumulative_at_cut_.begin());
    const double before = j == 0 ? 0.0 : cumulative_at_cut_[j - 1];
    return interval_start(j) + (h - before) / hazards_[j];
  }

  /// Proportional-hazards image: every hazard multiplied by `factor`.
  PiecewiseExponential scaled(double factor) const {
    std::vector<double> h(hazards_);
    for (double& x : h) x *= factor;
    return {cuts_, std::move(h)};
  }

  friend bool operator==(const PiecewiseExponential& a, const PiecewiseExponential& b) {
    return a.cuts_ == b.cuts_ && a.hazards_ == b.hazards_;
  }

 private:
  static void check_time(double t) {
    if (!(t >= 0.0)) throw InvalidArgument("time must be nonnegative");
  }

  std::vector<double> cuts_;
  std::vector<double> hazards_;
  std::vector<double> cumulative_at_cut_;
};

struct SurvivalPoint {
  double hazard;
  double cumulative_hazard;
  double survivor;
  double density;
};

inline SurvivalPoint survival_eval(const PiecewiseExponential& model, double t) {
  const double h = model.hazard(t);
  const double cum = model.cumulative_hazard(t);
  const double s = std::exp(-cum);
  return {h, cum, s, h * s};
}

/// Uniform enrollment of `patients` over [0, duration]. A zero duration is
/// instantaneous accrual: everybody enters at time 0.
class UniformAccrual {
 public:
  UniformAccrual(double duration_months, int patients)
      : duration_(duration_months), patients_(patients) {
    if (!(duration_ >= 0.0) || !std::isfinite(duration_)) {
      throw InvalidArgument("accrual duration must be finite and nonnegative");
    }
    if (patients_ <= 0) throw InvalidArgument("accrual needs a positive number of patients");
  }

  static UniformAccrual from_rate(int patients, double rate_per_month) {
    if (!(rate_per_month > 0.0)) throw InvalidArgument("accrual rate must be positive");
    return {patients / rate_per_month, patients};
  }

  double duration() const noexcept { return duration_; }
  int patients() const noexcept { return patients_; }
  double rate() const noexcept {
    return duration_ > 0.0 ? patients_ / duration_ : std::numeric_limits<double>::infinity();
  }

  /// A(t) = min(t / r, 1).
  double cdf(double t) const {
    if (!(t >= 0.0)) throw InvalidArgument("time must be nonnegative");
    if (duration_ == 0.0) return 1.0;
    return std::min(t / duration_, 1.0);
  }

  double density(double t) const {
    if (!(t >= 0.0)) throw InvalidArgument("time must be nonnegative");
    return (duration_ > 0.0 && t <= duration_) ? 1.0 / duration_ : 0.0;
  }

 private:
  double duration_;
  int patients_;
};

struct ArmModel {
  Arm arm;
  PiecewiseExponential survival;
  double allocation_fraction;
};

/// Inverse-CDF draw from the model, consuming one uniform from `stream`.
inline double sample_time(const PiecewiseExponential& model, CounterStream& stream) {
  return model.inverse_cumulative_hazard(-std::log(stream.uniform()));
}

inline double sample_accrual(const UniformAccrual& accrual, CounterStream& stream) {
  return stream.uniform() * accrual.duration();
}

}  // namespace evdesign
