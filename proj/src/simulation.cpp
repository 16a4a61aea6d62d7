#include "biassurv/simulation.hpp"
#include "biassurv/errors.hpp"
#include "biassurv/km.hpp"
#include "biassurv/parallel.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace biassurv {

// --- truth -----------------------------------------------------------------

WeibullValue weibull_eval(double t, double shape, double rate)
{
  if (!(t > 0.0) || !(shape > 0.0) || !(rate > 0.0))
    throw DomainError("weibull_eval requires positive t, shape and rate");
  const double tg = std::pow(t, shape);
  const double surv = std::exp(-rate * tg);
  return { rate * shape * std::pow(t, shape - 1.0) * surv, -std::expm1(-rate * tg) };
}

TruthModel::TruthModel(double shape, double rate)
  : shape_(shape)
  , rate_(rate)
{
  if (!(shape > 0.0) || !(rate > 0.0))
    throw DomainError("Weibull shape and rate must be positive");
}

double TruthModel::pdf(double t) const
{
  return t > 0.0 ? weibull_eval(t, shape_, rate_).pdf : 0.0;
}

double TruthModel::cdf(double t) const
{
  return t > 0.0 ? weibull_eval(t, shape_, rate_).cdf : 0.0;
}

double TruthModel::quantile(double p) const
{
  if (!(p >= 0.0 && p < 1.0))
    throw DomainError("quantile requires p in [0, 1)");
  return std::pow(-std::log1p(-p) / rate_, 1.0 / shape_);
}

namespace {

// integral over (0, inf) of w(t, theta) f(t) g(t), split at the cap where w
// has a kink
template<class G>
double weighted_expectation(const TruthModel& truth,
                            const SelectionFamily& family,
                            double theta,
                            G&& g)
{
  using boost::math::quadrature::gauss_kronrod;
  auto integrand = [&](double t) {
    if (!(t > 0.0))
      return 0.0;
    return family.weight(t, theta) * truth.pdf(t) * g(t);
  };
  const double a = family.cap();
  const double inner = gauss_kronrod<double, 61>::integrate(integrand, 0.0, a, 15, 1e-12);
  const double outer = gauss_kronrod<double, 61>::integrate(
    integrand, a, std::numeric_limits<double>::infinity(), 15, 1e-12);
  return inner + outer;
}

} // namespace

double TruthModel::selection_mean(const SelectionFamily& family, double theta) const
{
  return weighted_expectation(*this, family, theta, [](double) { return 1.0; });
}

// --- sampling --------------------------------------------------------------

namespace {
double uniform01(Rng& rng)
{
  // 53-bit uniform in (0, 1)
  double u;
  do {
    u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  } while (u == 0.0);
  return u;
}
} // namespace

std::vector<double> draw_biased_sample(std::size_t N,
                                       const TruthModel& truth,
                                       const SelectionFamily& family,
                                       double theta_true,
                                       Rng& rng)
{
  if (N == 0)
    throw DomainError("population size must be at least one");
  std::vector<double> out;
  out.reserve(N);
  for (std::size_t i = 0; i < N; ++i) {
    const double t = truth.quantile(uniform01(rng));
    const double accept = uniform01(rng);
    if (t > 0.0 && accept < family.weight(t, theta_true))
      out.push_back(t);
  }
  return out;
}

std::string to_string(CensoringMechanism m)
{
  return m == CensoringMechanism::calibrated_independent ? "calibrated_independent"
                                                         : "literal_random_fraction";
}

CensoringMechanism censoring_from_string(const std::string& s)
{
  if (s == "calibrated_independent")
    return CensoringMechanism::calibrated_independent;
  if (s == "literal_random_fraction")
    return CensoringMechanism::literal_random_fraction;
  throw DomainError("unknown censoring mechanism '" + s + "'");
}

CensoringPlan CensoringPlan::calibrated(const TruthModel& truth,
                                        const SelectionFamily& family,
                                        double theta_true,
                                        double fraction)
{
  if (!(fraction >= 0.0 && fraction < 1.0))
    throw ConfigError("censoring fraction must lie in [0, 1)");
  CensoringPlan plan{ CensoringMechanism::calibrated_independent, fraction, 0.0 };
  if (fraction == 0.0)
    return plan;

  const double kappa = truth.selection_mean(family, theta_true);
  // P(C < T) = 1 - E_w[exp(-r T)]
  auto censored_share = [&](double r) {
    const double laplace =
      weighted_expectation(truth, family, theta_true, [r](double t) { return std::exp(-r * t); });
    return 1.0 - laplace / kappa - fraction;
  };

  double hi = 1.0;
  int expand = 0;
  while (censored_share(hi) < 0.0) {
    hi *= 2.0;
    if (++expand > 60)
      throw ConfigError("censoring calibration: no rate reaches the target fraction");
  }
  boost::uintmax_t iters = 200;
  const auto [a, b] = boost::math::tools::toms748_solve(
    censored_share, 0.0, hi, -fraction, censored_share(hi),
    boost::math::tools::eps_tolerance<double>(50), iters);
  if (iters >= 200)
    throw ConfigError("censoring calibration: root finding did not converge");
  plan.rate = 0.5 * (a + b);
  return plan;
}

CensoringPlan CensoringPlan::literal(double fraction)
{
  if (!(fraction >= 0.0 && fraction < 1.0))
    throw ConfigError("censoring fraction must lie in [0, 1)");
  return { CensoringMechanism::literal_random_fraction, fraction, 0.0 };
}

SurvivalSample apply_censoring(std::span<const double> times,
                               const CensoringPlan& plan,
                               Rng& rng)
{
  std::vector<Record> records;
  records.reserve(times.size());
  for (double t : times)
    records.push_back({ t, true });
  if (plan.fraction == 0.0)
    return SurvivalSample(std::move(records));

  if (plan.mechanism == CensoringMechanism::calibrated_independent) {
    if (!(plan.rate > 0.0))
      throw ConfigError("calibrated censoring plan has no rate");
    for (auto& r : records) {
      const double c = -std::log(uniform01(rng)) / plan.rate;
      if (c < r.time) {
        r.time = c;
        r.event = false;
      }
    }
  } else {
    const auto k = static_cast<std::size_t>(std::floor(plan.fraction * static_cast<double>(records.size())));
    std::vector<std::size_t> idx(records.size());
    std::iota(idx.begin(), idx.end(), std::size_t{ 0 });
    // partial Fisher-Yates
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(uniform01(rng) * static_cast<double>(idx.size() - i));
      std::swap(idx[i], idx[std::min(j, idx.size() - 1)]);
      auto& r = records[idx[i]];
      r.time *= uniform01(rng);
      r.event = false;
    }
  }
  return SurvivalSample(std::move(records));
}

// --- metrics ---------------------------------------------------------------

Metrics fit_metrics(std::span<const double> times,
                    std::span<const double> F_hat,
                    std::span<const double> F_true)
{
  if (times.size() != F_hat.size() || times.size() != F_true.size())
    throw DomainError("fit_metrics: mismatched lengths");
  if (times.size() < 2)
    throw DomainError("fit_metrics needs at least two points");
  for (std::size_t i = 1; i < times.size(); ++i)
    if (!(times[i] > times[i - 1]))
      throw DomainError("fit_metrics: times must be strictly increasing");
  const auto d = spacing_weights(times);
  Metrics m{ 0.0, 0.0, 0.0 };
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double e = F_hat[i] - F_true[i];
    m.l1 += std::abs(e) * d[i];
    m.l2 += e * e * d[i];
    m.mse += e * e;
  }
  m.mse /= static_cast<double>(times.size());
  return m;
}

Metrics fit_metrics(std::span<const double> times,
                    std::span<const double> F_hat,
                    const TruthModel& truth)
{
  std::vector<double> F(times.size());
  std::transform(times.begin(), times.end(), F.begin(), [&](double t) { return truth.cdf(t); });
  return fit_metrics(times, F_hat, F);
}

// --- experiments -----------------------------------------------------------

std::string to_string(SimMethod m)
{
  switch (m) {
    case SimMethod::tbe:
      return "tbe";
    case SimMethod::wke:
      return "wke";
    case SimMethod::jones:
      return "jones";
    case SimMethod::naive:
      return "naive";
    case SimMethod::km:
      return "km";
  }
  return "?";
}

SimMethod sim_method_from_string(const std::string& s)
{
  if (s == "tbe")
    return SimMethod::tbe;
  if (s == "wke")
    return SimMethod::wke;
  if (s == "jones")
    return SimMethod::jones;
  if (s == "naive")
    return SimMethod::naive;
  if (s == "km")
    return SimMethod::km;
  throw DomainError("unknown simulation method '" + s + "'");
}

void ExperimentConfig::validate() const
{
  if (replications < 1)
    throw ConfigError("replications must be at least 1");
  if (!(censor_fraction >= 0.0 && censor_fraction < 1.0))
    throw ConfigError("censor fraction must lie in [0, 1)");
  if (population_sizes.empty())
    throw ConfigError("at least one population size is required");
  for (auto N : population_sizes)
    if (N == 0)
      throw ConfigError("population sizes must be positive");
  if (methods.empty())
    throw ConfigError("at least one method is required");
  if (!family.range().contains(theta_true))
    throw ConfigError("theta_true outside the selection family range");
  if (objective == Objective::penalized && !c_criterion && !(c > 0.0))
    throw ConfigError("penalized objective needs c > 0 or a c criterion");
  if (kind == ExperimentKind::bands && band_points < 2)
    throw ConfigError("band grid needs at least two points");
}

const ReportRow& ExperimentReport::row(std::size_t N, SimMethod method) const
{
  for (const auto& r : rows)
    if (r.N == N && r.method == method)
      return r;
  throw DomainError("no report row for N = " + std::to_string(N) + ", method " + to_string(method));
}

const Band& ExperimentReport::band(std::size_t N, SimMethod method) const
{
  for (const auto& set : bands)
    if (set.N == N)
      for (const auto& b : set.bands)
        if (b.method == method)
          return b;
  throw DomainError("no band for N = " + std::to_string(N) + ", method " + to_string(method));
}

Rng replication_rng(std::uint64_t seed, std::size_t n_index, std::size_t replication)
{
  std::seed_seq seq{ static_cast<std::uint32_t>(seed & 0xffffffffu),
                     static_cast<std::uint32_t>(seed >> 32),
                     static_cast<std::uint32_t>(n_index),
                     static_cast<std::uint32_t>(replication) };
  return Rng(seq);
}

SurvivalSample draw_replication(const ExperimentConfig& config,
                                const CensoringPlan& plan,
                                std::size_t N,
                                Rng& rng)
{
  const auto times = draw_biased_sample(N, config.truth, config.family, config.theta_true, rng);
  return apply_censoring(times, plan, rng);
}

double empirical_quantile(std::vector<double> values, double p)
{
  if (values.empty())
    throw DomainError("quantile of an empty sequence");
  std::sort(values.begin(), values.end());
  const double pos = p * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

namespace {

struct MethodOutcome
{
  bool ok{ false };
  Metrics metrics{};
  double theta{ 0.0 };
  std::vector<double> band_values;
};

double fitted_theta(const SurvivalSample& sample, Method method, const ExperimentConfig& config)
{
  if (config.objective == Objective::pseudo)
    return estimate_theta(sample, method, Objective::pseudo, 0.0, config.fit).theta_hat;
  double c = config.c;
  if (config.c_criterion) {
    CvConfig cv;
    cv.method = method;
    cv.fit = config.fit;
    cv.threads = 1;
    c = select_c(sample, *config.c_criterion, cv, config.c_lo, config.c_hi, config.c_candidates)
          .chosen_c;
  }
  return estimate_theta(sample, method, Objective::penalized, c, config.fit).theta_hat;
}

MethodOutcome run_method(SimMethod method,
                         const SurvivalSample& sample,
                         const ExperimentConfig& config,
                         const std::vector<double>* band_grid)
{
  MethodOutcome out;
  std::vector<double> times(sample.size());
  for (std::size_t k = 0; k < sample.size(); ++k)
    times[k] = sample[sample.order()[k]].time;

  std::vector<double> F_at_times(times.size());
  if (method == SimMethod::km) {
    const StepCdf km = km_cdf(sample);
    F_at_times = km.evaluate(times);
    if (band_grid)
      out.band_values = km.evaluate(*band_grid);
  } else {
    const EvaluationGrid grid = config.fit.grid_for(sample);
    DensityEstimate est;
    switch (method) {
      case SimMethod::naive:
        est = naive_kde(sample, config.fit.rule, grid);
        break;
      case SimMethod::jones:
        est = jones(sample, config.fit.family, config.fit.rule, grid);
        break;
      case SimMethod::wke:
      case SimMethod::tbe: {
        const Method m = method == SimMethod::wke ? Method::wke : Method::tbe;
        out.theta = fitted_theta(sample, m, config);
        est = estimate(m, sample, out.theta, config.fit.family, config.fit.rule, grid);
        break;
      }
      case SimMethod::km:
        break;
    }
    for (std::size_t k = 0; k < times.size(); ++k)
      F_at_times[k] = est.cdf_at(times[k]);
    if (band_grid) {
      out.band_values.resize(band_grid->size());
      for (std::size_t k = 0; k < band_grid->size(); ++k)
        out.band_values[k] = est.cdf_at((*band_grid)[k]);
    }
  }
  out.metrics = fit_metrics(times, F_at_times, config.truth);
  out.ok = std::isfinite(out.metrics.l1) && std::isfinite(out.metrics.l2);
  return out;
}

MetricSummary summarize(const std::vector<double>& v)
{
  MetricSummary s;
  if (v.empty())
    return s;
  const double n = static_cast<double>(v.size());
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v)
      ss += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(ss / (n - 1.0));
  }
  return s;
}

ExperimentReport run(const ExperimentConfig& config, bool with_bands)
{
  config.validate();
  const CensoringPlan plan =
    config.censoring == CensoringMechanism::calibrated_independent
      ? CensoringPlan::calibrated(config.truth, config.family, config.theta_true,
                                  config.censor_fraction)
      : CensoringPlan::literal(config.censor_fraction);

  std::vector<double> band_grid;
  if (with_bands) {
    const double hi = config.truth.quantile(config.band_upper_quantile);
    band_grid = EvaluationGrid::equispaced(hi, config.band_points).points();
  }

  ExperimentReport report;
  report.config = config;
  const std::size_t R = config.replications;
  const std::size_t M = config.methods.size();

  for (std::size_t ni = 0; ni < config.population_sizes.size(); ++ni) {
    const std::size_t N = config.population_sizes[ni];
    std::vector<MethodOutcome> outcomes(R * M);

    parallel_for(R, config.threads, [&](std::size_t rep) {
      Rng rng = replication_rng(config.seed, ni, rep);
      std::optional<SurvivalSample> sample;
      try {
        sample = draw_replication(config, plan, N, rng);
      } catch (const std::exception&) {
        return;
      }
      for (std::size_t mi = 0; mi < M; ++mi) {
        try {
          outcomes[rep * M + mi] =
            run_method(config.methods[mi], *sample, config, with_bands ? &band_grid : nullptr);
        } catch (const std::exception&) {
          outcomes[rep * M + mi] = MethodOutcome{};
        }
      }
    });

    BandSet bands;
    bands.N = N;
    if (with_bands) {
      bands.grid = band_grid;
      for (double t : band_grid)
        bands.truth.push_back(config.truth.cdf(t));
    }

    for (std::size_t mi = 0; mi < M; ++mi) {
      ReportRow row;
      row.N = N;
      row.method = config.methods[mi];
      std::vector<double> l1, l2, mse, theta;
      Band band{ config.methods[mi], {}, {}, {} };
      std::vector<std::vector<double>> curves;
      for (std::size_t rep = 0; rep < R; ++rep) {
        const auto& o = outcomes[rep * M + mi];
        if (!o.ok) {
          ++row.failures;
          continue;
        }
        ++row.successes;
        l1.push_back(o.metrics.l1);
        l2.push_back(o.metrics.l2);
        mse.push_back(o.metrics.mse);
        if (row.method == SimMethod::wke || row.method == SimMethod::tbe)
          theta.push_back(o.theta);
        if (with_bands)
          curves.push_back(o.band_values);
      }
      if (static_cast<double>(row.failures) > 0.05 * static_cast<double>(R))
        throw EstimationError("experiment: " + std::to_string(row.failures) + " of " +
                              std::to_string(R) + " replications failed for " +
                              to_string(row.method) + " at N = " + std::to_string(N));
      row.l1 = summarize(l1);
      row.l2 = summarize(l2);
      row.mse = summarize(mse);
      row.theta = summarize(theta);
      report.rows.push_back(row);

      if (with_bands && !curves.empty()) {
        band.lower.resize(band_grid.size());
        band.upper.resize(band_grid.size());
        std::vector<double> column(curves.size());
        for (std::size_t g = 0; g < band_grid.size(); ++g) {
          for (std::size_t r = 0; r < curves.size(); ++r)
            column[r] = curves[r][g];
          band.lower[g] = empirical_quantile(column, 0.025);
          band.upper[g] = empirical_quantile(column, 0.975);
        }
        if (config.keep_curves)
          band.curves = std::move(curves);
        bands.bands.push_back(std::move(band));
      }
    }
    if (with_bands)
      report.bands.push_back(std::move(bands));
  }
  return report;
}

} // namespace

ExperimentReport run_convergence_experiment(const ExperimentConfig& config)
{
  return run(config, false);
}

ExperimentReport run_band_experiment(const ExperimentConfig& config)
{
  return run(config, true);
}

ExperimentReport run_experiment(const ExperimentConfig& config)
{
  return config.kind == ExperimentKind::bands ? run_band_experiment(config)
                                              : run_convergence_experiment(config);
}

} // namespace biassurv
