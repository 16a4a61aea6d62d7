#pragma once

#include "biassurv/bandwidth.hpp"
#include "biassurv/km.hpp"
#include "biassurv/model.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace biassurv {

enum class Method
{
  naive,
  marron_padgett,
  wke,
  jones,
  tbe
};

std::string to_string(Method m);
Method method_from_string(const std::string& s);

//! Gaussian kernel mixture sum_i weight_i K_h(x(t) - center_i), where x(t) is
//! t itself or the cumulative selection transform W(t, theta).
struct KernelSum
{
  std::vector<double> centers;
  std::vector<double> weights;
  double h{ 1.0 };
  std::optional<double> transform_theta;

  double operator()(double t) const;
  void evaluate(std::span<const double> ts, std::span<double> out) const;
};

//! A density estimate tabulated on an evaluation grid.
//!
//! f_hat is scaled so that its d_i-weighted grid integral is one; F_hat is
//! the cumulative d_i-weighted sum capped at one.
struct DensityEstimate
{
  Method method{ Method::naive };
  double theta{ 0.0 };
  double h{ 0.0 };
  //! Selection normalizer: kappa_wk for WKE/Jones, the grid normalizer
  //! rescaled to the family's w convention for TBE, 1 otherwise.
  double kappa_hat{ 1.0 };
  EvaluationGrid grid;
  std::vector<double> f_hat;
  std::vector<double> F_hat;

  KernelSum kernel;
  double scale{ 1.0 }; // f_hat(t) = scale * kernel(t) unless post-smoothed
  bool tabulated_only{ false };

  double density_at(double t) const;
  void density_at(std::span<const double> ts, std::span<double> out) const;
  //! Linear interpolation of F_hat, anchored at F(0) = 0.
  double cdf_at(double t) const;
  double survival_at(double t) const { return 1.0 - cdf_at(t); }
  std::vector<double> survival() const;
};

//! Fills F_hat from f_hat on the estimate's grid.
DensityEstimate cdf_from_density(DensityEstimate est);

struct TbeOptions
{
  //! Second Gaussian smoothing pass over the tabulated t-space estimate.
  bool post_smooth{ false };
};

//! Kernel estimate over all observed times, censored or not. The bandwidth
//! rule sees all observed times.
DensityEstimate naive_kde(const SurvivalSample& sample,
                          const BandwidthRule& rule,
                          const EvaluationGrid& grid);

//! Kernel estimate with Kaplan-Meier jump weights.
DensityEstimate marron_padgett_kde(const SurvivalSample& sample,
                                   const BandwidthRule& rule,
                                   const EvaluationGrid& grid);

//! Weighted kernel estimator: K-M jumps divided by w(t_(i), theta) and
//! normalised by kappa_wk = 1 / sum s_i / w(t_(i), theta).
DensityEstimate wke(const SurvivalSample& sample,
                    double theta,
                    const SelectionFamily& family,
                    const BandwidthRule& rule,
                    const EvaluationGrid& grid);

//! WKE with known length bias, theta = 1.
DensityEstimate jones(const SurvivalSample& sample,
                      const SelectionFamily& family,
                      const BandwidthRule& rule,
                      const EvaluationGrid& grid);

//! Transformation-based estimator: K-M weighted kernel estimate of the
//! density of Y = W(T, theta), composed with W and rescaled so that its grid
//! integral is one. The bandwidth rule is applied to the uncensored Y values.
DensityEstimate tbe(const SurvivalSample& sample,
                    double theta,
                    const SelectionFamily& family,
                    const BandwidthRule& rule,
                    const EvaluationGrid& grid,
                    const TbeOptions& options = {});

//! Dispatch by method; theta is ignored by the methods that do not use it.
DensityEstimate estimate(Method method,
                         const SurvivalSample& sample,
                         double theta,
                         const SelectionFamily& family,
                         const BandwidthRule& rule,
                         const EvaluationGrid& grid);

//! Bandwidth the estimator would use in t-space for this sample.
double resolve_time_bandwidth(Method method,
                              const SurvivalSample& sample,
                              const BandwidthRule& rule);

} // namespace biassurv
