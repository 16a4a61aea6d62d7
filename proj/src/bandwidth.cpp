#include "biassurv/bandwidth.hpp"
#include "biassurv/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

namespace biassurv {

std::string BandwidthRule::str() const
{
  switch (kind) {
    case Kind::direct_plug_in:
      return "dpi";
    case Kind::normal_reference:
      return "nrd";
    case Kind::fixed:
      return "fixed=" + std::to_string(h);
  }
  return "?";
}

namespace {

constexpr double inv_sqrt_2pi = 0.3989422804014327;

struct Prepared
{
  std::vector<double> x;
  std::vector<double> w; // sums to one
  double m;              // effective sample size
};

Prepared prepare(std::span<const double> values, std::span<const double> weights)
{
  if (!weights.empty() && weights.size() != values.size())
    throw DomainError("bandwidth weights must align with values");

  Prepared p;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double wi = weights.empty() ? 1.0 : weights[i];
    if (wi < 0.0 || !std::isfinite(wi))
      throw DomainError("bandwidth weights must be nonnegative");
    if (wi == 0.0)
      continue;
    p.x.push_back(values[i]);
    p.w.push_back(wi);
  }
  const double total = std::accumulate(p.w.begin(), p.w.end(), 0.0);
  if (!(total > 0.0))
    throw EstimationError("bandwidth selection: all weights are zero");
  double sq = 0.0;
  for (auto& wi : p.w) {
    wi /= total;
    sq += wi * wi;
  }
  p.m = 1.0 / sq;

  auto [lo, hi] = std::minmax_element(p.x.begin(), p.x.end());
  if (p.x.size() < 2 || *lo == *hi)
    throw EstimationError("bandwidth selection needs at least two distinct values");
  return p;
}

double weighted_sd(const Prepared& p)
{
  double mean = 0.0;
  for (std::size_t i = 0; i < p.x.size(); ++i)
    mean += p.w[i] * p.x[i];
  double var = 0.0;
  for (std::size_t i = 0; i < p.x.size(); ++i)
    var += p.w[i] * (p.x[i] - mean) * (p.x[i] - mean);
  // small-sample correction with the effective size
  if (p.m > 1.0)
    var *= p.m / (p.m - 1.0);
  return std::sqrt(var);
}

// Interpolated quantile. With equal weights this is the usual
// (n - 1) p + 1 order-statistic interpolation.
double weighted_quantile(const Prepared& p, double prob)
{
  std::vector<std::size_t> idx(p.x.size());
  std::iota(idx.begin(), idx.end(), std::size_t{ 0 });
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return p.x[a] < p.x[b]; });

  // plotting positions: cumulative weight minus half own weight, rescaled to [0, 1]
  const std::size_t n = idx.size();
  std::vector<double> pos(n);
  double cum = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double wk = p.w[idx[k]];
    pos[k] = cum + 0.5 * wk;
    cum += wk;
  }
  const double first = pos.front();
  const double span = pos.back() - first;
  for (auto& v : pos)
    v = (v - first) / span;

  if (prob <= 0.0)
    return p.x[idx.front()];
  if (prob >= 1.0)
    return p.x[idx.back()];
  const auto it = std::lower_bound(pos.begin(), pos.end(), prob);
  const auto k = static_cast<std::size_t>(it - pos.begin());
  if (k == 0)
    return p.x[idx.front()];
  const double t = (prob - pos[k - 1]) / (pos[k] - pos[k - 1]);
  return p.x[idx[k - 1]] + t * (p.x[idx[k]] - p.x[idx[k - 1]]);
}

double scale_estimate(const Prepared& p)
{
  const double sd = weighted_sd(p);
  const double iqr = weighted_quantile(p, 0.75) - weighted_quantile(p, 0.25);
  if (iqr > 0.0)
    return std::min(sd, iqr / 1.349);
  return sd;
}

double phi_derivative(int r, double u)
{
  const double u2 = u * u;
  const double phi = inv_sqrt_2pi * std::exp(-0.5 * u2);
  switch (r) {
    case 4:
      return (u2 * u2 - 6.0 * u2 + 3.0) * phi;
    case 6:
      return ((u2 - 15.0) * u2 * u2 + 45.0 * u2 - 15.0) * phi;
    default:
      throw DomainError("unsupported density functional order");
  }
}

double plug_in(const Prepared& p)
{
  const double scale = scale_estimate(p);
  if (!(scale > 0.0))
    throw EstimationError("bandwidth selection: zero scale estimate");

  Prepared z = p;
  double mean = 0.0;
  for (std::size_t i = 0; i < p.x.size(); ++i)
    mean += p.w[i] * p.x[i];
  for (auto& v : z.x)
    v = (v - mean) / scale;

  const double m = p.m;
  const double sqrt_pi = std::sqrt(std::numbers::pi);

  // normal-scale psi_8 for unit variance, then two functional stages
  const double psi8 = 105.0 / (32.0 * sqrt_pi);
  const double g6 = std::pow(-2.0 * phi_derivative(6, 0.0) / (psi8 * m), 1.0 / 9.0);
  const double psi6 = detail::psi_functional(z.x, z.w, 6, g6);
  if (!(psi6 < 0.0))
    throw EstimationError("bandwidth selection: psi_6 estimate has the wrong sign");
  const double g4 = std::pow(-2.0 * phi_derivative(4, 0.0) / (psi6 * m), 1.0 / 7.0);
  const double psi4 = detail::psi_functional(z.x, z.w, 4, g4);
  if (!(psi4 > 0.0))
    throw EstimationError("bandwidth selection: psi_4 estimate is not positive");

  // Gaussian kernel: R(K) = 1 / (2 sqrt(pi)), mu_2(K) = 1
  return scale * std::pow(1.0 / (2.0 * sqrt_pi * psi4 * m), 0.2);
}

} // namespace

double detail::psi_functional(std::span<const double> x,
                              std::span<const double> w,
                              int r,
                              double g)
{
  const std::size_t n = x.size();
  if (w.empty()) {
    const std::vector<double> equal(n, 1.0 / static_cast<double>(n));
    return psi_functional(x, equal, r, g);
  }
  if (w.size() != n)
    throw DomainError("psi functional weights must align with values");
  const double norm = std::pow(g, -(r + 1));
  double off = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = i + 1; j < n; ++j)
      row += w[j] * phi_derivative(r, (x[i] - x[j]) / g);
    off += w[i] * row;
  }
  double diag = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    diag += w[i] * w[i];
  return norm * (2.0 * off + diag * phi_derivative(r, 0.0));
}

double select_bandwidth(std::span<const double> values,
                        std::span<const double> weights,
                        const BandwidthRule& rule)
{
  if (rule.kind == BandwidthRule::Kind::fixed) {
    if (!(rule.h > 0.0) || !std::isfinite(rule.h))
      throw DomainError("fixed bandwidth must be positive");
    return rule.h;
  }
  const Prepared p = prepare(values, weights);
  if (rule.kind == BandwidthRule::Kind::normal_reference) {
    const double h = 1.06 * weighted_sd(p) * std::pow(p.m, -0.2);
    if (!(h > 0.0))
      throw EstimationError("bandwidth selection: zero spread");
    return h;
  }
  return plug_in(p);
}

} // namespace biassurv
