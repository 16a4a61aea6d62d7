#include "biassurv/theta.hpp"
#include "biassurv/errors.hpp"
#include "biassurv/golden.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace biassurv {

std::string to_string(Objective o)
{
  return o == Objective::pseudo ? "pseudo" : "penalized";
}

EvaluationGrid FitConfig::grid_for(const SurvivalSample& sample) const
{
  if (grid)
    return *grid;
  return EvaluationGrid::for_sample(sample, grid_points);
}

std::string ThetaFit::kind() const
{
  return to_string(objective) + "_" + to_string(method);
}

namespace {

void require_likelihood_method(Method method)
{
  if (method != Method::wke && method != Method::tbe)
    throw DomainError("pseudo likelihood is defined for the wke and tbe estimators only");
}

LikelihoodValue likelihood_on(const SurvivalSample& sample,
                              double theta,
                              Method method,
                              const FitConfig& config,
                              const EvaluationGrid& grid)
{
  require_likelihood_method(method);
  const DensityEstimate est =
    estimate(method, sample, theta, config.family, config.rule, grid);
  double ll = 0.0;
  for (const auto& r : sample.records()) {
    const double v = r.event ? est.density_at(r.time) : est.survival_at(r.time);
    ll += std::log(std::max(v, log_floor));
  }
  return { ll, est.kappa_hat };
}

struct Search
{
  const SurvivalSample& sample;
  Method method;
  Objective objective;
  double c;
  double alpha;
  FitConfig config;
  EvaluationGrid grid;

  Search(const SurvivalSample& s, Method m, Objective o, double c_, const FitConfig& cfg)
    : sample(s)
    , method(m)
    , objective(o)
    , c(o == Objective::penalized ? c_ : 0.0)
    , alpha(o == Objective::penalized ? penalty_alpha(c_, s.size()) : 0.0)
    , config(cfg)
    , grid(cfg.grid_for(s))
  {
    require_likelihood_method(m);
    if (o == Objective::penalized && !(c_ > 0.0))
      throw DomainError("penalized objective requires c > 0");
    const ThetaRange& r = cfg.search;
    if (!(r.lo <= r.hi) || !cfg.family.range().contains(r.lo) ||
        !cfg.family.range().contains(r.hi))
      throw DomainError("theta search range must be a nonempty subinterval of the family range");
    if (m == Method::wke && cfg.rule.kind != BandwidthRule::Kind::fixed)
      config.rule = BandwidthRule::fixed(resolve_time_bandwidth(Method::wke, s, cfg.rule));
  }

  std::pair<double, double> operator()(double theta) const
  {
    try {
      const LikelihoodValue v = likelihood_on(sample, theta, method, config, grid);
      double obj = v.loglik;
      if (objective == Objective::penalized)
        obj -= alpha * static_cast<double>(sample.size()) / v.kappa;
      if (!std::isfinite(obj))
        return { -std::numeric_limits<double>::infinity(), v.kappa };
      return { obj, v.kappa };
    } catch (const EstimationError&) {
      return { -std::numeric_limits<double>::infinity(),
               std::numeric_limits<double>::quiet_NaN() };
    }
  }

  ThetaFit finish(std::vector<std::pair<double, double>> profile,
                  double best_theta,
                  double best_value,
                  double lo,
                  double hi) const
  {
    if (!std::isfinite(best_value))
      throw EstimationError("theta search: objective is not finite anywhere on the range");
    ThetaFit fit;
    fit.method = method;
    fit.objective = objective;
    fit.c = c;
    fit.alpha = alpha;
    fit.theta_hat = best_theta;
    fit.objective_at_hat = best_value;
    fit.kappa_at_hat = (*this)(best_theta).second;

    const bool present = std::any_of(profile.begin(), profile.end(), [&](const auto& p) {
      return p.first == best_theta;
    });
    if (!present)
      profile.emplace_back(best_theta, best_value);
    std::sort(profile.begin(), profile.end());
    fit.profile = std::move(profile);
    fit.at_boundary = best_theta - lo <= config.tolerance || hi - best_theta <= config.tolerance;
    return fit;
  }

  ThetaFit refine(std::vector<std::pair<double, double>> profile,
                  double start_theta,
                  double start_value,
                  double lo,
                  double hi,
                  double bracket_lo,
                  double bracket_hi) const
  {
    double best_theta = start_theta;
    double best_value = start_value;
    if (bracket_hi - bracket_lo > config.tolerance) {
      const auto [x, fx] = golden_section_maximize(
        [&](double t) { return (*this)(t).first; }, bracket_lo, bracket_hi, config.tolerance);
      if (fx > best_value) {
        best_theta = x;
        best_value = fx;
      }
    }
    return finish(std::move(profile), best_theta, best_value, lo, hi);
  }
};

} // namespace

LikelihoodValue pseudo_likelihood(const SurvivalSample& sample,
                                  double theta,
                                  Method method,
                                  const FitConfig& config)
{
  return likelihood_on(sample, theta, method, config, config.grid_for(sample));
}

double pseudo_loglik(const SurvivalSample& sample,
                     double theta,
                     Method method,
                     const FitConfig& config)
{
  return pseudo_likelihood(sample, theta, method, config).loglik;
}

double penalty_alpha(double c, std::size_t n)
{
  if (n == 0)
    throw DomainError("penalty requires a nonempty sample");
  return c / std::sqrt(static_cast<double>(n));
}

double penalized_loglik(const SurvivalSample& sample,
                        double theta,
                        Method method,
                        double c,
                        const FitConfig& config)
{
  if (!(c >= 0.0))
    throw DomainError("penalty constant must be nonnegative");
  const LikelihoodValue v = pseudo_likelihood(sample, theta, method, config);
  return v.loglik - penalty_alpha(c, sample.size()) * static_cast<double>(sample.size()) / v.kappa;
}

ThetaFit estimate_theta(const SurvivalSample& sample,
                        Method method,
                        Objective objective,
                        double c,
                        const FitConfig& config)
{
  const Search search(sample, method, objective, c, config);
  const double lo = config.search.lo;
  const double hi = config.search.hi;
  const std::size_t m = lo == hi ? 1 : std::max<std::size_t>(config.scan_points, 2);

  std::vector<std::pair<double, double>> profile;
  profile.reserve(m + 1);
  for (std::size_t k = 0; k < m; ++k) {
    const double theta =
      m == 1 ? lo : (k + 1 == m ? hi : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(m - 1));
    profile.emplace_back(theta, search(theta).first);
  }

  std::size_t best = 0;
  for (std::size_t k = 1; k < m; ++k)
    if (profile[k].second > profile[best].second)
      best = k;
  if (!std::isfinite(profile[best].second))
    throw EstimationError("theta search: objective is not finite anywhere on the range");
  if (m == 1) {
    const double value = profile[0].second;
    return search.finish(std::move(profile), lo, value, lo, hi);
  }

  const double bracket_lo = profile[best == 0 ? 0 : best - 1].first;
  const double bracket_hi = profile[best + 1 == m ? m - 1 : best + 1].first;
  const double theta0 = profile[best].first;
  const double value0 = profile[best].second;
  return search.refine(std::move(profile), theta0, value0, lo, hi, bracket_lo, bracket_hi);
}

ThetaFit refine_theta(const SurvivalSample& sample,
                      Method method,
                      Objective objective,
                      double c,
                      const FitConfig& config,
                      double lo,
                      double hi)
{
  const Search search(sample, method, objective, c, config);
  lo = std::max(lo, config.search.lo);
  hi = std::min(hi, config.search.hi);
  if (!(lo <= hi))
    throw DomainError("refinement bracket does not intersect the search range");
  const double mid = 0.5 * (lo + hi);
  const double fmid = search(mid).first;
  return search.refine({ { mid, fmid } }, mid, fmid, config.search.lo, config.search.hi, lo, hi);
}

} // namespace biassurv
