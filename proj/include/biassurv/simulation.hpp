#pragma once

#include "biassurv/bandwidth.hpp"
#include "biassurv/estimators.hpp"
#include "biassurv/model.hpp"
#include "biassurv/theta.hpp"
#include "biassurv/tuning.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace biassurv {

//! Weibull truth f(t) = rate * shape * t^(shape - 1) * exp(-rate * t^shape).
class TruthModel
{
public:
  TruthModel() = default;
  TruthModel(double shape, double rate);

  double shape() const { return shape_; }
  double rate() const { return rate_; }

  double pdf(double t) const;
  double cdf(double t) const;
  double quantile(double p) const;

  //! kappa(theta) = E_f[w(T, theta)] by adaptive quadrature.
  double selection_mean(const SelectionFamily& family, double theta) const;

private:
  double shape_{ 2.0 };
  double rate_{ 1.0 };
};

struct WeibullValue
{
  double pdf;
  double cdf;
};

WeibullValue weibull_eval(double t, double shape, double rate);

using Rng = std::mt19937_64;

//! Draws N times from the truth by inversion and keeps each one with
//! probability w(t, theta_true).
std::vector<double> draw_biased_sample(std::size_t N,
                                       const TruthModel& truth,
                                       const SelectionFamily& family,
                                       double theta_true,
                                       Rng& rng);

enum class CensoringMechanism
{
  calibrated_independent,
  literal_random_fraction
};

std::string to_string(CensoringMechanism m);
CensoringMechanism censoring_from_string(const std::string& s);

struct CensoringPlan
{
  CensoringMechanism mechanism{ CensoringMechanism::calibrated_independent };
  double fraction{ 0.0 };
  //! Exponential censoring rate for the calibrated mechanism.
  double rate{ 0.0 };

  //! Solves for the exponential rate r with P(C < T_w) = fraction, where T_w
  //! follows the selection-weighted truth w f / kappa.
  static CensoringPlan calibrated(const TruthModel& truth,
                                  const SelectionFamily& family,
                                  double theta_true,
                                  double fraction);
  static CensoringPlan literal(double fraction);
};

SurvivalSample apply_censoring(std::span<const double> times,
                               const CensoringPlan& plan,
                               Rng& rng);

struct Metrics
{
  double l1;
  double l2;
  double mse;
};

//! L1/L2 use the d_i spacing weights of the (strictly increasing) times.
Metrics fit_metrics(std::span<const double> times,
                    std::span<const double> F_hat,
                    std::span<const double> F_true);
Metrics fit_metrics(std::span<const double> times,
                    std::span<const double> F_hat,
                    const TruthModel& truth);

enum class SimMethod
{
  tbe,
  wke,
  jones,
  naive,
  km
};

std::string to_string(SimMethod m);
SimMethod sim_method_from_string(const std::string& s);

enum class ExperimentKind
{
  convergence,
  bands
};

struct ExperimentConfig
{
  ExperimentKind kind{ ExperimentKind::convergence };
  TruthModel truth{};
  double theta_true{ 1.0 };
  SelectionFamily family{};
  double censor_fraction{ 0.30 };
  CensoringMechanism censoring{ CensoringMechanism::calibrated_independent };
  std::vector<std::size_t> population_sizes{ 50, 100, 200, 400 };
  std::size_t replications{ 200 };
  std::vector<SimMethod> methods{ SimMethod::tbe, SimMethod::wke, SimMethod::jones,
                                  SimMethod::naive, SimMethod::km };
  std::uint64_t seed{ 20070101 };
  std::size_t threads{ 0 };

  // estimation
  FitConfig fit{};
  Objective objective{ Objective::pseudo };
  double c{ 0.0 };                      // penalized objective with a fixed c
  std::optional<Criterion> c_criterion; // penalized objective with c chosen per replication
  double c_lo{ 1.0 };
  double c_hi{ 20.0 };
  std::size_t c_candidates{ 20 };

  // band experiment
  std::size_t band_points{ 200 };
  double band_upper_quantile{ 0.999 };
  bool keep_curves{ false };

  void validate() const;
};

struct MetricSummary
{
  double mean{ 0.0 };
  double sd{ 0.0 };
};

struct ReportRow
{
  std::size_t N{ 0 };
  SimMethod method{ SimMethod::wke };
  std::size_t successes{ 0 };
  std::size_t failures{ 0 };
  MetricSummary l1, l2, mse;
  MetricSummary theta; // wke/tbe only; zeros otherwise
};

struct Band
{
  SimMethod method;
  std::vector<double> lower;
  std::vector<double> upper;
  //! Per-replication curves, only when ExperimentConfig::keep_curves.
  std::vector<std::vector<double>> curves;
};

struct BandSet
{
  std::size_t N{ 0 };
  std::vector<double> grid;
  std::vector<double> truth;
  std::vector<Band> bands;
};

struct ExperimentReport
{
  ExperimentConfig config;
  std::vector<ReportRow> rows;
  std::vector<BandSet> bands;

  const ReportRow& row(std::size_t N, SimMethod method) const;
  const Band& band(std::size_t N, SimMethod method) const;
};

//! RNG stream for one replication, derived from (seed, N index, replication).
Rng replication_rng(std::uint64_t seed, std::size_t n_index, std::size_t replication);

//! Draws one biased, censored sample under the configuration.
SurvivalSample draw_replication(const ExperimentConfig& config,
                                const CensoringPlan& plan,
                                std::size_t N,
                                Rng& rng);

ExperimentReport run_convergence_experiment(const ExperimentConfig& config);
ExperimentReport run_band_experiment(const ExperimentConfig& config);
ExperimentReport run_experiment(const ExperimentConfig& config);

//! Empirical quantile with linear interpolation between order statistics.
double empirical_quantile(std::vector<double> values, double p);

} // namespace biassurv
