#pragma once

#include <string>

namespace ttsa {

// Power-law learning rate gamma(t) = gamma0 * (delta + t)^(-eta).
//
// The construction only requires gamma0 > 0 and delta > 0 so the decay law
// can be evaluated for any exponent; whether a pair of schedules satisfies
// the algorithm's Assumption 1 (eta in (1/2, 1), outer slower than inner)
// is a separate check, see validate_schedules.
class LearningRateSchedule {
 public:
  LearningRateSchedule(double gamma0, double delta, double eta);

  // gamma0 * (delta + t)^(-eta); t < 0 is a domain error.
  double eval(double t) const;

  double gamma0() const { return gamma0_; }
  double delta() const { return delta_; }
  double eta() const { return eta_; }

 private:
  double gamma0_;
  double delta_;
  double eta_;
};

// outer = slow timescale (index 1), inner = fast timescale (index 2).
struct SchedulePair {
  LearningRateSchedule outer{1.0, 1.0, 0.9};
  LearningRateSchedule inner{1.0, 1.0, 0.6};
};

enum class ScheduleClause { ok, range, ordering };

struct ScheduleValidation {
  bool ok = false;
  ScheduleClause failed_clause = ScheduleClause::ok;
  std::string message;
};

// Assumption 1 gate: both exponents strictly inside (1/2, 1) and
// inner.eta < outer.eta (the inner recursion must run faster).
// Rejection is a value, not an exception.
ScheduleValidation validate_schedules(const SchedulePair& p);

}  // namespace ttsa
