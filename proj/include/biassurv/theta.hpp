#pragma once

#include "biassurv/bandwidth.hpp"
#include "biassurv/estimators.hpp"
#include "biassurv/model.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace biassurv {

enum class Objective
{
  pseudo,
  penalized
};

std::string to_string(Objective o);

//! Shared settings for likelihood evaluation and the theta search.
struct FitConfig
{
  SelectionFamily family{};
  BandwidthRule rule{ BandwidthRule::dpi() };
  //! Evaluation grid; when unset, EvaluationGrid::for_sample(sample, grid_points).
  std::optional<EvaluationGrid> grid;
  std::size_t grid_points{ 512 };
  ThetaRange search{ 0.0, 2.0 };
  std::size_t scan_points{ 61 };
  double tolerance{ 1e-4 };

  EvaluationGrid grid_for(const SurvivalSample& sample) const;
};

//! Values below this are floored before taking logs.
inline constexpr double log_floor = 1e-300;

struct LikelihoodValue
{
  double loglik;
  double kappa; // the estimator's kappa_hat at theta
};

//! Sieve log-likelihood: sum of log f_hat over uncensored records plus sum of
//! log S_hat over censored records, with f_hat/S_hat from `method` (wke or
//! tbe) at parameter theta.
LikelihoodValue pseudo_likelihood(const SurvivalSample& sample,
                                  double theta,
                                  Method method,
                                  const FitConfig& config);

double pseudo_loglik(const SurvivalSample& sample,
                     double theta,
                     Method method,
                     const FitConfig& config);

//! alpha = c * n^(-1/2)
double penalty_alpha(double c, std::size_t n);

//! pseudo_loglik - alpha * n / kappa_hat.
double penalized_loglik(const SurvivalSample& sample,
                        double theta,
                        Method method,
                        double c,
                        const FitConfig& config);

struct ThetaFit
{
  double theta_hat{ 0.0 };
  double objective_at_hat{ 0.0 };
  double kappa_at_hat{ 1.0 };
  Method method{ Method::wke };
  Objective objective{ Objective::pseudo };
  double c{ 0.0 };
  double alpha{ 0.0 };
  //! (theta, objective) pairs in increasing theta, including theta_hat.
  std::vector<std::pair<double, double>> profile;
  bool at_boundary{ false };

  std::string kind() const; // e.g. "penalized_wke"
};

//! Maximises the chosen objective over config.search: a scan of
//! config.scan_points equispaced values, then golden-section refinement
//! around the best scan point down to config.tolerance.
//! For the WKE the bandwidth is resolved once and held fixed over theta; for
//! the TBE it is re-selected at each theta.
ThetaFit estimate_theta(const SurvivalSample& sample,
                        Method method,
                        Objective objective,
                        double c,
                        const FitConfig& config);

//! Same search, restricted to the bracket [lo, hi] without a scan; used for
//! warm-started refits.
ThetaFit refine_theta(const SurvivalSample& sample,
                      Method method,
                      Objective objective,
                      double c,
                      const FitConfig& config,
                      double lo,
                      double hi);

} // namespace biassurv
