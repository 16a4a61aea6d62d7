#include "biassurv/tuning.hpp"
#include "biassurv/errors.hpp"
#include "biassurv/parallel.hpp"

#include <cmath>
#include <numeric>

namespace biassurv {

std::string to_string(Criterion c)
{
  switch (c) {
    case Criterion::cv1:
      return "cv1";
    case Criterion::cv2:
      return "cv2";
    case Criterion::cv3:
      return "cv3";
  }
  return "?";
}

Criterion criterion_from_string(const std::string& s)
{
  if (s == "cv1")
    return Criterion::cv1;
  if (s == "cv2")
    return Criterion::cv2;
  if (s == "cv3")
    return Criterion::cv3;
  throw DomainError("unknown cross-validation criterion '" + s + "'");
}

const CvCandidate& CvReport::chosen() const
{
  for (const auto& cand : candidates)
    if (cand.ok && cand.c == chosen_c)
      return cand;
  throw EstimationError("cross-validation report has no chosen candidate");
}

Jackknife jackknife(const SurvivalSample& sample, double c, const CvConfig& config)
{
  const std::size_t n = sample.size();
  if (n < 3)
    throw EstimationError("cross-validation needs at least three records");

  FitConfig fit = config.fit;
  if (!fit.grid)
    fit.grid = fit.grid_for(sample);

  const ThetaFit full = estimate_theta(sample, config.method, Objective::penalized, c, fit);
  Jackknife out;
  out.c = c;
  out.theta_full = full.theta_hat;
  out.kappa_full = full.kappa_at_hat;
  out.theta_loo.assign(n, 0.0);
  out.kappa_loo.assign(n, 0.0);
  out.density_loo.assign(n, 0.0);

  const ThetaRange& r = fit.search;
  const double step =
    fit.scan_points > 1 ? (r.hi - r.lo) / static_cast<double>(fit.scan_points - 1) : 0.0;
  const double radius = config.warm_steps * step;

  parallel_for(n, config.threads, [&](std::size_t i) {
    try {
      const SurvivalSample reduced = sample.without(i);
      const ThetaFit loo =
        config.fast && radius > 0.0
          ? refine_theta(reduced, config.method, Objective::penalized, c, fit,
                         full.theta_hat - radius, full.theta_hat + radius)
          : estimate_theta(reduced, config.method, Objective::penalized, c, fit);
      const DensityEstimate est =
        estimate(config.method, reduced, loo.theta_hat, fit.family, fit.rule, *fit.grid);
      out.theta_loo[i] = loo.theta_hat;
      out.kappa_loo[i] = est.kappa_hat;
      out.density_loo[i] = est.density_at(sample[i].time);
    } catch (const std::exception& e) {
      throw EstimationError("leave-one-out fit failed for record " + std::to_string(i) +
                            ": " + e.what());
    }
  });
  return out;
}

double jackknife_spread(std::span<const double> loo, double full)
{
  const double n = static_cast<double>(loo.size());
  if (loo.empty())
    throw DomainError("jackknife spread of an empty sequence");
  const double mean = std::accumulate(loo.begin(), loo.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : loo)
    ss += (v - mean) * (v - mean);
  const double bias = full - mean;
  return (n - 1.0) / n * ss + (n - 1.0) * (n - 1.0) * bias * bias;
}

double cv1_score(std::span<const double> theta_loo, double theta_full)
{
  return jackknife_spread(theta_loo, theta_full);
}

double cv2_score(std::span<const double> density_loo)
{
  if (density_loo.empty())
    throw DomainError("cv2 of an empty sequence");
  return std::accumulate(density_loo.begin(), density_loo.end(), 0.0) /
         static_cast<double>(density_loo.size());
}

double cv3_score(std::span<const double> kappa_loo, double kappa_full)
{
  if (!(kappa_full > 0.0 && kappa_full < 1.0))
    throw EstimationError("cv3 is undefined unless kappa_hat lies in (0, 1)");
  return jackknife_spread(kappa_loo, kappa_full) / (kappa_full * (1.0 - kappa_full));
}

double cv1(const SurvivalSample& sample, double c, const CvConfig& config)
{
  const Jackknife jk = jackknife(sample, c, config);
  return cv1_score(jk.theta_loo, jk.theta_full);
}

double cv2(const SurvivalSample& sample, double c, const CvConfig& config)
{
  return cv2_score(jackknife(sample, c, config).density_loo);
}

double cv3(const SurvivalSample& sample, double c, const CvConfig& config)
{
  const Jackknife jk = jackknife(sample, c, config);
  return cv3_score(jk.kappa_loo, jk.kappa_full);
}

std::vector<double> log_spaced(double lo, double hi, std::size_t count)
{
  if (!(lo > 0.0) || !(hi >= lo) || count == 0)
    throw DomainError("log-spaced candidates need 0 < lo <= hi and count >= 1");
  if (count == 1 || lo == hi)
    return { lo };
  std::vector<double> out(count);
  const double a = std::log(lo);
  const double b = std::log(hi);
  for (std::size_t k = 0; k < count; ++k)
    out[k] = std::exp(a + (b - a) * static_cast<double>(k) / static_cast<double>(count - 1));
  out.front() = lo;
  out.back() = hi;
  return out;
}

CvReport select_c(const SurvivalSample& sample,
                  Criterion criterion,
                  const CvConfig& config,
                  double c_lo,
                  double c_hi,
                  std::size_t count)
{
  const auto candidates = log_spaced(c_lo, c_hi, count);
  return select_c(sample, criterion, config, candidates);
}

CvReport select_c(const SurvivalSample& sample,
                  Criterion criterion,
                  const CvConfig& config,
                  std::span<const double> candidates)
{
  if (candidates.empty())
    throw DomainError("select_c needs at least one candidate");
  CvReport report;
  report.criterion = criterion;
  report.maximized = criterion == Criterion::cv2 && config.maximize_cv2;
  if (criterion == Criterion::cv2)
    report.note = report.maximized
                    ? "cv2 maximised (held-out density as a likelihood-type score)"
                    : "cv2 minimised (literal direction)";

  for (double c : candidates) {
    CvCandidate cand;
    cand.c = c;
    try {
      const Jackknife jk = jackknife(sample, c, config);
      switch (criterion) {
        case Criterion::cv1:
          cand.score = cv1_score(jk.theta_loo, jk.theta_full);
          break;
        case Criterion::cv2:
          cand.score = cv2_score(jk.density_loo);
          break;
        case Criterion::cv3:
          cand.score = cv3_score(jk.kappa_loo, jk.kappa_full);
          break;
      }
      const double n = static_cast<double>(sample.size());
      cand.theta_hat = jk.theta_full;
      cand.kappa_hat = jk.kappa_full;
      cand.theta_loo_mean = std::accumulate(jk.theta_loo.begin(), jk.theta_loo.end(), 0.0) / n;
      cand.kappa_loo_mean = std::accumulate(jk.kappa_loo.begin(), jk.kappa_loo.end(), 0.0) / n;
      cand.ok = std::isfinite(cand.score);
      if (!cand.ok)
        cand.error = "non-finite criterion value";
    } catch (const std::exception& e) {
      cand.ok = false;
      cand.error = e.what();
    }
    report.candidates.push_back(std::move(cand));
  }

  const CvCandidate* best = nullptr;
  for (const auto& cand : report.candidates) {
    if (!cand.ok)
      continue;
    const bool better = best == nullptr ||
                        (report.maximized ? cand.score > best->score : cand.score < best->score) ||
                        (cand.score == best->score && cand.c < best->c);
    if (better)
      best = &cand;
  }
  if (best == nullptr)
    throw EstimationError("cross-validation failed for every candidate c: " +
                          report.candidates.front().error);
  report.chosen_c = best->c;
  return report;
}

} // namespace biassurv
