#pragma once

#include <stdexcept>
#include <string>

namespace evdesign {

/// Bad input: negative times, non-positive hazards, malformed configs.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The requested number of events cannot be reached by the population.
class Unreachable : public std::runtime_error {
 public:
  Unreachable(const std::string& what, double requested, double asymptote)
      : std::runtime_error(what), requested_(requested), asymptote_(asymptote) {}

  double requested() const noexcept { return requested_; }
  double asymptote() const noexcept { return asymptote_; }

 private:
  double requested_;
  double asymptote_;
};

/// An estimator or statistic that is undefined for the data at hand.
class Degenerate : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A root finder could not bracket a sign change.
class BracketFailure : public std::runtime_error {
 public:
  BracketFailure(const std::string& what, double lo, double hi, double f_lo, double f_hi)
      : std::runtime_error(what), lo_(lo), hi_(hi), f_lo_(f_lo), f_hi_(f_hi) {}

  double lo() const noexcept { return lo_; }
  double hi() const noexcept { return hi_; }
  double f_lo() const noexcept { return f_lo_; }
  double f_hi() const noexcept { return f_hi_; }

 private:
  double lo_, hi_, f_lo_, f_hi_;
};

}  // namespace evdesign
