#include "biassurv/estimators.hpp"
#include "biassurv/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace biassurv {

std::string to_string(Method m)
{
  switch (m) {
    case Method::naive:
      return "naive";
    case Method::marron_padgett:
      return "mp";
    case Method::wke:
      return "wke";
    case Method::jones:
      return "jones";
    case Method::tbe:
      return "tbe";
  }
  return "?";
}

Method method_from_string(const std::string& s)
{
  if (s == "naive")
    return Method::naive;
  if (s == "mp" || s == "marron_padgett")
    return Method::marron_padgett;
  if (s == "wke")
    return Method::wke;
  if (s == "jones")
    return Method::jones;
  if (s == "tbe")
    return Method::tbe;
  throw DomainError("unknown estimator '" + s + "'");
}

namespace {

constexpr double inv_sqrt_2pi = 0.3989422804014327;

double gaussian_sum(const KernelSum& k, double x)
{
  const double inv_h = 1.0 / k.h;
  double s = 0.0;
  for (std::size_t i = 0; i < k.centers.size(); ++i) {
    const double u = (x - k.centers[i]) * inv_h;
    s += k.weights[i] * std::exp(-0.5 * u * u);
  }
  return s * inv_sqrt_2pi * inv_h;
}

double interpolate(const std::vector<double>& xs,
                   const std::vector<double>& ys,
                   double x,
                   double left_anchor_y,
                   double right_y)
{
  if (x <= xs.front())
    return x <= 0.0 ? left_anchor_y
                    : left_anchor_y + (ys.front() - left_anchor_y) * (x / xs.front());
  if (x >= xs.back())
    return right_y;
  const auto it = std::upper_bound(xs.begin(), xs.end(), x);
  const auto k = static_cast<std::size_t>(it - xs.begin());
  const double t = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
  return ys[k - 1] + t * (ys[k] - ys[k - 1]);
}

DensityEstimate tabulate(Method method,
                         double theta,
                         double kappa,
                         KernelSum kernel,
                         const EvaluationGrid& grid)
{
  DensityEstimate est;
  est.method = method;
  est.theta = theta;
  est.h = kernel.h;
  est.kappa_hat = kappa;
  est.grid = grid;
  est.f_hat.assign(grid.size(), 0.0);
  kernel.evaluate(grid.points(), est.f_hat);

  const double mass = grid.integrate(est.f_hat);
  if (!(mass > 0.0) || !std::isfinite(mass))
    throw EstimationError(to_string(method) +
                          ": estimate has no mass on the evaluation grid");
  est.scale = 1.0 / mass;
  for (auto& v : est.f_hat)
    v *= est.scale;
  est.kernel = std::move(kernel);
  return cdf_from_density(std::move(est));
}

KernelSum km_kernel(const StepCdf& km, double h)
{
  KernelSum k;
  k.h = h;
  for (std::size_t i = 0; i < km.knots.size(); ++i) {
    if (km.jumps[i] > 0.0) {
      k.centers.push_back(km.knots[i]);
      k.weights.push_back(km.jumps[i]);
    }
  }
  return k;
}

} // namespace

double KernelSum::operator()(double t) const
{
  const double x = transform_theta ? cumulative_selection(t, *transform_theta) : t;
  return gaussian_sum(*this, x);
}

void KernelSum::evaluate(std::span<const double> ts, std::span<double> out) const
{
  if (ts.size() != out.size())
    throw DomainError("kernel evaluation output has the wrong length");
  for (std::size_t i = 0; i < ts.size(); ++i)
    out[i] = (*this)(ts[i]);
}

double DensityEstimate::density_at(double t) const
{
  if (tabulated_only) {
    if (t >= grid.points().back())
      return 0.0;
    return std::max(0.0, interpolate(grid.points(), f_hat, t, f_hat.front(), 0.0));
  }
  return scale * kernel(t);
}

void DensityEstimate::density_at(std::span<const double> ts, std::span<double> out) const
{
  if (ts.size() != out.size())
    throw DomainError("density output has the wrong length");
  for (std::size_t i = 0; i < ts.size(); ++i)
    out[i] = density_at(ts[i]);
}

double DensityEstimate::cdf_at(double t) const
{
  return std::clamp(interpolate(grid.points(), F_hat, t, 0.0, F_hat.back()), 0.0, 1.0);
}

std::vector<double> DensityEstimate::survival() const
{
  std::vector<double> s(F_hat.size());
  std::transform(F_hat.begin(), F_hat.end(), s.begin(), [](double F) { return 1.0 - F; });
  return s;
}

DensityEstimate cdf_from_density(DensityEstimate est)
{
  est.F_hat = est.grid.cumulative(est.f_hat);
  return est;
}

double resolve_time_bandwidth(Method method,
                              const SurvivalSample& sample,
                              const BandwidthRule& rule)
{
  if (rule.kind == BandwidthRule::Kind::fixed)
    return select_bandwidth({}, rule);
  const auto values = method == Method::naive ? sample.times() : sample.uncensored_times();
  return select_bandwidth(values, rule);
}

DensityEstimate naive_kde(const SurvivalSample& sample,
                          const BandwidthRule& rule,
                          const EvaluationGrid& grid)
{
  if (sample.size() < 2)
    throw EstimationError("naive kernel estimate needs at least two observations");
  KernelSum k;
  k.h = resolve_time_bandwidth(Method::naive, sample, rule);
  k.centers = sample.times();
  k.weights.assign(sample.size(), 1.0 / static_cast<double>(sample.size()));
  return tabulate(Method::naive, 0.0, 1.0, std::move(k), grid);
}

DensityEstimate marron_padgett_kde(const SurvivalSample& sample,
                                   const BandwidthRule& rule,
                                   const EvaluationGrid& grid)
{
  const StepCdf km = km_cdf(sample);
  const double h = resolve_time_bandwidth(Method::marron_padgett, sample, rule);
  return tabulate(Method::marron_padgett, 0.0, 1.0, km_kernel(km, h), grid);
}

DensityEstimate wke(const SurvivalSample& sample,
                    double theta,
                    const SelectionFamily& family,
                    const BandwidthRule& rule,
                    const EvaluationGrid& grid)
{
  if (!family.range().contains(theta))
    throw DomainError("wke: theta outside the admissible range");
  const StepCdf km = km_cdf(sample);
  KernelSum k = km_kernel(km, resolve_time_bandwidth(Method::wke, sample, rule));

  double inv_kappa = 0.0;
  for (std::size_t i = 0; i < k.centers.size(); ++i) {
    k.weights[i] /= family.weight(k.centers[i], theta);
    inv_kappa += k.weights[i];
  }
  if (!(inv_kappa > 0.0) || !std::isfinite(inv_kappa))
    throw EstimationError("wke: all kernel weights are zero");
  const double kappa = 1.0 / inv_kappa;
  for (auto& w : k.weights)
    w *= kappa;
  return tabulate(Method::wke, theta, kappa, std::move(k), grid);
}

DensityEstimate jones(const SurvivalSample& sample,
                      const SelectionFamily& family,
                      const BandwidthRule& rule,
                      const EvaluationGrid& grid)
{
  DensityEstimate est = wke(sample, 1.0, family, rule, grid);
  est.method = Method::jones;
  return est;
}

DensityEstimate tbe(const SurvivalSample& sample,
                    double theta,
                    const SelectionFamily& family,
                    const BandwidthRule& rule,
                    const EvaluationGrid& grid,
                    const TbeOptions& options)
{
  if (!family.range().contains(theta))
    throw DomainError("tbe: theta outside the admissible range");
  const SurvivalSample ys =
    sample.transformed([theta](double t) { return cumulative_selection(t, theta); });
  for (const auto& r : ys.records())
    if (!std::isfinite(r.time))
      throw EstimationError("tbe: transformed time overflows");
  if (ys.size() >= 2 && ys[ys.order().front()].time == ys[ys.order().back()].time)
    throw EstimationError("tbe: degenerate transform, all transformed times are equal");

  const StepCdf km = km_cdf(ys);
  const double h = rule.kind == BandwidthRule::Kind::fixed
                     ? select_bandwidth({}, rule)
                     : select_bandwidth(ys.uncensored_times(), rule);
  KernelSum k = km_kernel(km, h);
  k.transform_theta = theta;

  DensityEstimate est = tabulate(Method::tbe, theta, 1.0, std::move(k), grid);
  est.kappa_hat = est.scale * family.cap_scale(theta);

  if (options.post_smooth) {
    // second pass in t-space with half the normal-reference bandwidth of the
    // uncensored times
    const double hs = 0.5 * select_bandwidth(sample.uncensored_times(), BandwidthRule::nrd());
    const auto& pts = est.grid.points();
    const auto& d = est.grid.spacing();
    std::vector<double> smoothed(pts.size(), 0.0);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < pts.size(); ++j) {
        const double u = (pts[i] - pts[j]) / hs;
        s += d[j] * est.f_hat[j] * std::exp(-0.5 * u * u);
      }
      smoothed[i] = s * inv_sqrt_2pi / hs;
    }
    const double mass = est.grid.integrate(smoothed);
    for (auto& v : smoothed)
      v /= mass;
    est.f_hat = std::move(smoothed);
    est.tabulated_only = true;
    est = cdf_from_density(std::move(est));
  }
  return est;
}

DensityEstimate estimate(Method method,
                         const SurvivalSample& sample,
                         double theta,
                         const SelectionFamily& family,
                         const BandwidthRule& rule,
                         const EvaluationGrid& grid)
{
  switch (method) {
    case Method::naive:
      return naive_kde(sample, rule, grid);
    case Method::marron_padgett:
      return marron_padgett_kde(sample, rule, grid);
    case Method::wke:
      return wke(sample, theta, family, rule, grid);
    case Method::jones:
      return jones(sample, family, rule, grid);
    case Method::tbe:
      return tbe(sample, theta, family, rule, grid);
  }
  throw DomainError("unknown estimator");
}

} // namespace biassurv
