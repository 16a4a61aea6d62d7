#include "biassurv/bandwidth.hpp"
#include "biassurv/errors.hpp"

#include "doctest.h"

#include <cmath>
#include <numeric>
#include <random>
#include <vector>

using namespace biassurv;

namespace {

std::vector<double> normal_draws(std::size_t n, std::uint64_t seed)
{
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::vector<double> x(n);
  for (auto& v : x)
    v = nd(rng);
  return x;
}

double sample_sd(const std::vector<double>& x)
{
  const double n = static_cast<double>(x.size());
  const double m = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : x)
    ss += (v - m) * (v - m);
  return std::sqrt(ss / (n - 1.0));
}

} // namespace

TEST_SUITE("bandwidth")
{
  TEST_CASE("fixed rule passes through")
  {
    const std::vector<double> x{ 1.0, 5.0, 9.0 };
    CHECK(select_bandwidth(x, BandwidthRule::fixed(0.3)) == 0.3);
    CHECK_THROWS_AS(select_bandwidth(x, BandwidthRule::fixed(0.0)), DomainError);
  }

  TEST_CASE("normal reference matches the direct formula")
  {
    const auto x = normal_draws(100, 7);
    const double expect = 1.06 * sample_sd(x) * std::pow(100.0, -0.2);
    CHECK(select_bandwidth(x, BandwidthRule::nrd()) == doctest::Approx(expect).epsilon(1e-12));
  }

  TEST_CASE("direct plug-in on standard normal draws")
  {
    for (std::uint64_t seed : { 1u, 2u, 3u }) {
      const auto x = normal_draws(1000, seed);
      const double h = select_bandwidth(x, BandwidthRule::dpi());
      CHECK(h >= 0.15);
      CHECK(h <= 0.45);
    }
  }

  TEST_CASE("plug-in is scale equivariant and shift invariant")
  {
    const auto x = normal_draws(300, 11);
    const double h = select_bandwidth(x, BandwidthRule::dpi());
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
      y[i] = 3.5 * x[i] + 12.0;
    CHECK(select_bandwidth(y, BandwidthRule::dpi()) == doctest::Approx(3.5 * h).epsilon(1e-9));
  }

  TEST_CASE("equal weights match the unweighted rule")
  {
    const auto x = normal_draws(200, 5);
    const std::vector<double> w(x.size(), 2.0);
    CHECK(select_bandwidth(x, w, BandwidthRule::dpi()) ==
          doctest::Approx(select_bandwidth(x, BandwidthRule::dpi())).epsilon(1e-12));
  }

  TEST_CASE("degenerate inputs")
  {
    const std::vector<double> same{ 2.0, 2.0, 2.0 };
    CHECK_THROWS_AS(select_bandwidth(same, BandwidthRule::dpi()), EstimationError);
    const std::vector<double> x{ 1.0, 2.0 };
    const std::vector<double> bad{ 1.0 };
    CHECK_THROWS_AS(select_bandwidth(x, bad, BandwidthRule::dpi()), DomainError);
    const std::vector<double> neg{ 1.0, -1.0 };
    CHECK_THROWS_AS(select_bandwidth(x, neg, BandwidthRule::nrd()), DomainError);
  }

  TEST_CASE("psi_4 functional of a normal sample")
  {
    // psi_4 of N(0,1) is 3 / (8 sqrt(pi))
    const auto x = normal_draws(4000, 9);
    const double psi4 = detail::psi_functional(x, {}, 4, 0.4);
    CHECK(psi4 == doctest::Approx(3.0 / (8.0 * std::sqrt(M_PI))).epsilon(0.25));
  }
}
