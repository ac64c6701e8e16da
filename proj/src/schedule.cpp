#include "ttsa/schedule.hpp"

#include <cmath>
#include <sstream>

#include "ttsa/errors.hpp"

namespace ttsa {

LearningRateSchedule::LearningRateSchedule(double gamma0, double delta, double eta)
    : gamma0_(gamma0), delta_(delta), eta_(eta) {
  if (!(gamma0 > 0.0) || !std::isfinite(gamma0))
    throw ArgumentError("LearningRateSchedule: gamma0 must be positive");
  if (!(delta > 0.0) || !std::isfinite(delta))
    throw ArgumentError("LearningRateSchedule: delta must be positive");
  if (!std::isfinite(eta)) throw ArgumentError("LearningRateSchedule: eta must be finite");
}

double LearningRateSchedule::eval(double t) const {
  if (t < 0.0 || std::isnan(t))
    throw ArgumentError("LearningRateSchedule::eval: t must be non-negative");
  return gamma0_ * std::pow(delta_ + t, -eta_);
}

ScheduleValidation validate_schedules(const SchedulePair& p) {
  const double e1 = p.outer.eta();
  const double e2 = p.inner.eta();
  auto in_range = [](double e) { return e > 0.5 && e < 1.0; };

  ScheduleValidation v;
  if (!in_range(e1) || !in_range(e2)) {
    v.ok = false;
    v.failed_clause = ScheduleClause::range;
    std::ostringstream os;
    os << "Assumption 1 violated: learning-rate exponents must lie in (1/2, 1); got eta1="
       << e1 << ", eta2=" << e2;
    v.message = os.str();
    return v;
  }
  if (!(e2 < e1)) {
    v.ok = false;
    v.failed_clause = ScheduleClause::ordering;
    std::ostringstream os;
    os << "Assumption 1 violated: the inner timescale must be faster (eta2 < eta1); got eta1="
       << e1 << ", eta2=" << e2;
    v.message = os.str();
    return v;
  }
  v.ok = true;
  v.failed_clause = ScheduleClause::ok;
  v.message = "ok";
  return v;
}

}  // namespace ttsa
