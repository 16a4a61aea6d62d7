#include "biassurv/km.hpp"
#include "biassurv/errors.hpp"

#include <algorithm>
#include <numeric>

namespace biassurv {

double StepCdf::total_mass() const
{
  return std::accumulate(jumps.begin(), jumps.end(), 0.0);
}

double StepCdf::operator()(double t) const
{
  const auto end = std::upper_bound(knots.begin(), knots.end(), t);
  const auto k = static_cast<std::size_t>(end - knots.begin());
  double s = 0.0;
  for (std::size_t i = 0; i < k; ++i)
    s += jumps[i];
  return std::clamp(s, 0.0, 1.0);
}

std::vector<double> StepCdf::evaluate(const std::vector<double>& ts) const
{
  std::vector<double> cum(jumps.size());
  std::partial_sum(jumps.begin(), jumps.end(), cum.begin());
  std::vector<double> out(ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const auto k = std::upper_bound(knots.begin(), knots.end(), ts[i]) - knots.begin();
    out[i] = k == 0 ? 0.0 : std::clamp(cum[static_cast<std::size_t>(k - 1)], 0.0, 1.0);
  }
  return out;
}

StepCdf km_cdf(const SurvivalSample& sample)
{
  if (sample.empty())
    throw EstimationError("Kaplan-Meier estimate of an empty sample");
  if (sample.uncensored_count() == 0)
    throw EstimationError("Kaplan-Meier estimate needs at least one uncensored record");

  const std::size_t n = sample.size();
  StepCdf out;
  out.knots.reserve(n);
  out.jumps.reserve(n);
  out.events.reserve(n);

  double surv = 1.0;
  for (std::size_t j = 0; j < n; ++j) {
    const Record& r = sample[sample.order()[j]];
    out.knots.push_back(r.time);
    out.events.push_back(r.event);
    if (r.event) {
      // (n - j') / (n - j' + 1) with the 1-based position j' = j + 1
      const double at_risk = static_cast<double>(n - j);
      const double next = surv * (at_risk - 1.0) / at_risk;
      out.jumps.push_back(surv - next);
      surv = next;
    } else {
      out.jumps.push_back(0.0);
    }
  }
  return out;
}

} // namespace biassurv
