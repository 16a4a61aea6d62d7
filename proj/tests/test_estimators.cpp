#include "biassurv/errors.hpp"
#include "biassurv/estimators.hpp"
#include "biassurv/simulation.hpp"

#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

using namespace biassurv;

namespace {

const SelectionFamily family3(ThetaRange{ 0.0, 3.0 }, 3.0);

SurvivalSample weibull_sample(std::size_t n, double censor, std::uint64_t seed)
{
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Record> r;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = std::sqrt(-std::log(1.0 - u(rng)));
    if (u(rng) < censor)
      r.push_back({ t * u(rng) + 1e-9, false });
    else
      r.push_back({ t, true });
  }
  return SurvivalSample(std::move(r));
}

double sup_diff(const std::vector<double>& a, const std::vector<double>& b)
{
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double argmax_on(const DensityEstimate& est)
{
  const auto it = std::max_element(est.f_hat.begin(), est.f_hat.end());
  return est.grid[static_cast<std::size_t>(it - est.f_hat.begin())];
}

} // namespace

TEST_SUITE("estimators")
{
  TEST_CASE("method names")
  {
    for (Method m : { Method::naive, Method::marron_padgett, Method::wke, Method::jones, Method::tbe })
      CHECK(method_from_string(to_string(m)) == m);
    CHECK_THROWS_AS(method_from_string("bogus"), DomainError);
  }

  TEST_CASE("single kernel peaks at its centre")
  {
    KernelSum k;
    k.centers = { 1.0 };
    k.weights = { 1.0 };
    k.h = 0.2;
    const auto g = EvaluationGrid::equispaced(3.0, 300);
    double best = 0.0, arg = 0.0;
    for (double t : g.points())
      if (k(t) > best) {
        best = k(t);
        arg = t;
      }
    CHECK(arg == doctest::Approx(1.0));
    CHECK(k(1.0) == doctest::Approx(1.0 / (0.2 * std::sqrt(2.0 * M_PI))));
  }

  TEST_CASE("symmetric pair gives a symmetric estimate")
  {
    const SurvivalSample s(std::vector<double>{ 4.0, 6.0 }, std::vector<int>{ 1, 1 });
    const auto g = EvaluationGrid::equispaced(10.0, 1000);
    const auto est = naive_kde(s, BandwidthRule::fixed(0.5), g);
    for (double d : { 0.1, 0.5, 1.3, 2.0 })
      CHECK(est.density_at(5.0 - d) == doctest::Approx(est.density_at(5.0 + d)).epsilon(1e-12));
  }

  TEST_CASE("naive estimate of a large unbiased sample is close to the truth")
  {
    const auto s = weibull_sample(3000, 0.0, 3);
    const auto g = EvaluationGrid::equispaced(4.0, 800);
    const auto est = naive_kde(s, BandwidthRule::dpi(), g);
    double l1 = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
      l1 += std::abs(est.f_hat[i] - weibull_eval(g[i], 2.0, 1.0).pdf) * g.spacing()[i];
    CHECK(l1 < 0.15);
  }

  TEST_CASE("Marron-Padgett on uncensored data equals the naive estimate")
  {
    const auto s = weibull_sample(80, 0.0, 4);
    const auto g = EvaluationGrid::for_sample(s);
    const auto a = naive_kde(s, BandwidthRule::dpi(), g);
    const auto b = marron_padgett_kde(s, BandwidthRule::dpi(), g);
    CHECK(a.h == b.h);
    CHECK(sup_diff(a.f_hat, b.f_hat) < 1e-12);
  }

  TEST_CASE("Marron-Padgett weights are the K-M jumps")
  {
    const SurvivalSample s(std::vector<double>{ 1, 2, 3, 4 }, std::vector<int>{ 1, 0, 1, 1 });
    const auto g = EvaluationGrid::equispaced(6.0, 200);
    const auto est = marron_padgett_kde(s, BandwidthRule::fixed(0.4), g);
    REQUIRE(est.kernel.centers == std::vector<double>{ 1.0, 3.0, 4.0 });
    CHECK(est.kernel.weights[0] == doctest::Approx(0.25));
    CHECK(est.kernel.weights[1] == doctest::Approx(0.375));
    CHECK(est.kernel.weights[2] == doctest::Approx(0.375));

    const SurvivalSample lone(std::vector<double>{ 1, 2, 3 }, std::vector<int>{ 0, 1, 0 });
    const auto one = marron_padgett_kde(lone, BandwidthRule::fixed(0.3), g);
    REQUIRE(one.kernel.centers.size() == 1);
    CHECK(one.kernel.centers[0] == 2.0);
    CHECK(argmax_on(one) == doctest::Approx(2.0).epsilon(0.02));
  }

  TEST_CASE("WKE normaliser on a two-point sample")
  {
    const SurvivalSample s(std::vector<double>{ 1.0, 2.0 }, std::vector<int>{ 1, 1 });
    const auto g = EvaluationGrid::equispaced(5.0, 100);
    const auto est = wke(s, 1.0, family3, BandwidthRule::fixed(0.3), g);
    CHECK(est.kappa_hat == doctest::Approx(4.0 / 9.0));
    // 1/w weights: 3/2 and 3/4, scaled by kappa
    CHECK(est.kernel.weights[0] == doctest::Approx(2.0 / 3.0));
    CHECK(est.kernel.weights[1] == doctest::Approx(1.0 / 3.0));
  }

  TEST_CASE("WKE at theta = 0 equals Marron-Padgett")
  {
    for (std::uint64_t seed : { 5u, 6u, 7u }) {
      const auto s = weibull_sample(60, 0.3, seed);
      const auto g = EvaluationGrid::for_sample(s);
      const auto a = wke(s, 0.0, family3, BandwidthRule::dpi(), g);
      const auto b = marron_padgett_kde(s, BandwidthRule::dpi(), g);
      CHECK(sup_diff(a.f_hat, b.f_hat) < 1e-12);
      CHECK(sup_diff(a.F_hat, b.F_hat) < 1e-12);
    }
  }

  TEST_CASE("Jones equals WKE at theta = 1")
  {
    const auto s = weibull_sample(70, 0.3, 8);
    const auto g = EvaluationGrid::for_sample(s);
    const auto a = jones(s, family3, BandwidthRule::dpi(), g);
    const auto b = wke(s, 1.0, family3, BandwidthRule::dpi(), g);
    CHECK(a.method == Method::jones);
    CHECK(a.f_hat == b.f_hat);
    CHECK(a.F_hat == b.F_hat);
    CHECK(a.kappa_hat == b.kappa_hat);
  }

  TEST_CASE("TBE at theta = 0 matches Marron-Padgett")
  {
    for (auto rule : { BandwidthRule::dpi(), BandwidthRule::fixed(0.2) }) {
      const auto s = weibull_sample(90, 0.3, 9);
      const auto g = EvaluationGrid::for_sample(s);
      const auto a = tbe(s, 0.0, family3, rule, g);
      const auto b = marron_padgett_kde(s, rule, g);
      CHECK(sup_diff(a.f_hat, b.f_hat) <= 1e-9);
    }
  }

  TEST_CASE("TBE of a single event peaks at it")
  {
    const SurvivalSample s(std::vector<double>{ 0.5, 1.0, 1.5 }, std::vector<int>{ 0, 1, 0 });
    const auto g = EvaluationGrid::equispaced(3.0, 3000);
    const auto est = tbe(s, 1.0, family3, BandwidthRule::fixed(0.2), g);
    CHECK(argmax_on(est) == doctest::Approx(1.0).epsilon(1e-3));
  }

  TEST_CASE("TBE kappa is on the selection-probability scale")
  {
    // large sample from f_w with w = min((t/3)^0.5, 1): kappa_tb ~ E_f[w]
    SelectionFamily fam(ThetaRange{ 0.0, 3.0 }, 3.0);
    Rng rng(12);
    const TruthModel truth;
    const auto times = draw_biased_sample(20000, truth, fam, 0.5, rng);
    std::vector<int> ev(times.size(), 1);
    const SurvivalSample s(times, ev);
    const auto g = EvaluationGrid::for_sample(s);
    const auto est = tbe(s, 0.5, fam, BandwidthRule::dpi(), g);
    const auto wk = wke(s, 0.5, fam, BandwidthRule::dpi(), g);
    CHECK(est.kappa_hat == doctest::Approx(0.5233).epsilon(0.03));
    CHECK(wk.kappa_hat == doctest::Approx(0.5233).epsilon(0.03));
  }

  TEST_CASE("every estimate integrates to one")
  {
    const std::vector<SurvivalSample> samples{ weibull_sample(25, 0.0, 10), weibull_sample(60, 0.3, 11),
                                               weibull_sample(200, 0.5, 12) };
    for (const auto& s : samples) {
      for (auto rule : { BandwidthRule::dpi(), BandwidthRule::nrd(), BandwidthRule::fixed(0.15) }) {
        for (std::size_t points : { 64u, 512u }) {
          const auto g = EvaluationGrid::for_sample(s, points);
          for (Method m : { Method::naive, Method::marron_padgett, Method::wke, Method::jones, Method::tbe }) {
            for (double theta : { 0.0, 0.5, 1.0, 2.0 }) {
              const auto est = estimate(m, s, theta, family3, rule, g);
              CHECK(std::abs(g.integrate(est.f_hat) - 1.0) <= 0.01);
              CHECK(est.F_hat.back() == doctest::Approx(1.0).epsilon(0.01));
              if (points < 512)
                continue;
              // independent midpoint rule on the continuous estimate
              const double hi = g.points().back();
              const int m2 = 4000;
              double mass = 0.0;
              for (int k = 0; k < m2; ++k)
                mass += est.density_at((k + 0.5) * hi / m2) * hi / m2;
              CHECK(std::abs(mass - 1.0) <= 0.01);
            }
          }
        }
      }
    }
  }

  TEST_CASE("post-smoothed TBE still integrates to one")
  {
    const auto s = weibull_sample(100, 0.3, 13);
    const auto g = EvaluationGrid::for_sample(s);
    TbeOptions opt;
    opt.post_smooth = true;
    const auto est = tbe(s, 0.8, family3, BandwidthRule::dpi(), g, opt);
    CHECK(est.tabulated_only);
    CHECK(g.integrate(est.f_hat) == doctest::Approx(1.0).epsilon(1e-9));
  }

  TEST_CASE("CDF helpers")
  {
    const auto s = weibull_sample(50, 0.2, 14);
    const auto g = EvaluationGrid::for_sample(s);
    const auto est = wke(s, 0.7, family3, BandwidthRule::dpi(), g);
    CHECK(est.cdf_at(0.0) == 0.0);
    CHECK(est.cdf_at(g[10]) == doctest::Approx(est.F_hat[10]));
    CHECK(est.survival_at(g[10]) == doctest::Approx(1.0 - est.F_hat[10]));
    for (std::size_t i = 1; i < est.F_hat.size(); ++i)
      CHECK(est.F_hat[i] >= est.F_hat[i - 1]);
  }

  TEST_CASE("estimator errors")
  {
    const auto g = EvaluationGrid::equispaced(3.0, 50);
    const SurvivalSample one(std::vector<double>{ 1.0 }, std::vector<int>{ 1 });
    CHECK_THROWS_AS(naive_kde(one, BandwidthRule::dpi(), g), EstimationError);
    const SurvivalSample s(std::vector<double>{ 1.0, 2.0 }, std::vector<int>{ 1, 1 });
    CHECK_THROWS_AS(wke(s, 3.5, family3, BandwidthRule::dpi(), g), DomainError);
    CHECK_THROWS_AS(tbe(s, -1.0, family3, BandwidthRule::dpi(), g), DomainError);
    const SurvivalSample cens(std::vector<double>{ 1.0, 2.0 }, std::vector<int>{ 0, 0 });
    CHECK_THROWS_AS(marron_padgett_kde(cens, BandwidthRule::dpi(), g), EstimationError);
  }
}
