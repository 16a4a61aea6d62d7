#pragma once

#include "biassurv/model.hpp"

#include <vector>

namespace biassurv {

//! Right-continuous step CDF with jumps at the ordered observed times.
struct StepCdf
{
  std::vector<double> knots;
  std::vector<double> jumps;
  std::vector<bool> events;

  double total_mass() const;
  //! F(t) = sum of jumps at knots <= t.
  double operator()(double t) const;
  std::vector<double> evaluate(const std::vector<double>& ts) const;
};

//! Kaplan-Meier product-limit CDF. Tied records are processed one at a time
//! in the sample's sorted order, so each uncensored record gets its own jump
//! and the sum over a tie group equals the grouped product-limit jump.
//! A censored largest observation leaves total_mass < 1; the deficit is not
//! redistributed.
StepCdf km_cdf(const SurvivalSample& sample);

} // namespace biassurv
