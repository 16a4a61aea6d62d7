#pragma once

#include "biassurv/estimators.hpp"
#include "biassurv/model.hpp"
#include "biassurv/theta.hpp"

#include <span>
#include <string>
#include <vector>

namespace biassurv {

enum class Criterion
{
  cv1,
  cv2,
  cv3
};

std::string to_string(Criterion c);
Criterion criterion_from_string(const std::string& s);

struct CvConfig
{
  Method method{ Method::wke };
  FitConfig fit{};
  //! Leave-one-out refits search only a bracket around the full-sample
  //! estimate instead of repeating the full scan.
  bool fast{ true };
  //! Half-width of the warm-start bracket, in scan steps.
  double warm_steps{ 2.0 };
  //! CV2 is a held-out density score; by default it is maximised.
  bool maximize_cv2{ true };
  std::size_t threads{ 1 };
};

//! Leave-one-out refits of the penalized theta estimate at one c.
struct Jackknife
{
  double c{ 0.0 };
  double theta_full{ 0.0 };
  double kappa_full{ 0.0 };
  std::vector<double> theta_loo;
  std::vector<double> kappa_loo;
  //! f_hat_{-i}(t_i): the leave-one-out density at the held-out time.
  std::vector<double> density_loo;
};

Jackknife jackknife(const SurvivalSample& sample, double c, const CvConfig& config);

//! ((n-1)/n) sum (x_{-i} - x_.)^2 + (n-1)^2 (x_full - x_.)^2
double jackknife_spread(std::span<const double> loo, double full);

double cv1_score(std::span<const double> theta_loo, double theta_full);
double cv2_score(std::span<const double> density_loo);
//! Throws EstimationError unless kappa_full lies in (0, 1).
double cv3_score(std::span<const double> kappa_loo, double kappa_full);

double cv1(const SurvivalSample& sample, double c, const CvConfig& config);
double cv2(const SurvivalSample& sample, double c, const CvConfig& config);
double cv3(const SurvivalSample& sample, double c, const CvConfig& config);

struct CvCandidate
{
  double c{ 0.0 };
  double score{ 0.0 };
  bool ok{ false };
  std::string error;
  double theta_hat{ 0.0 };
  double kappa_hat{ 0.0 };
  double theta_loo_mean{ 0.0 };
  double kappa_loo_mean{ 0.0 };
};

struct CvReport
{
  Criterion criterion{ Criterion::cv3 };
  bool maximized{ false };
  std::vector<CvCandidate> candidates;
  double chosen_c{ 0.0 };
  std::string note;

  const CvCandidate& chosen() const;
};

//! `count` log-spaced values from lo to hi inclusive.
std::vector<double> log_spaced(double lo, double hi, std::size_t count);

//! Evaluates the criterion at each candidate c and picks the optimum
//! (minimum for cv1/cv3; cv2 per CvConfig::maximize_cv2). Ties go to the
//! smaller c.
CvReport select_c(const SurvivalSample& sample,
                  Criterion criterion,
                  const CvConfig& config,
                  double c_lo = 1.0,
                  double c_hi = 20.0,
                  std::size_t count = 20);

CvReport select_c(const SurvivalSample& sample,
                  Criterion criterion,
                  const CvConfig& config,
                  std::span<const double> candidates);

} // namespace biassurv
