#pragma once

#include <span>
#include <string>

namespace biassurv {

struct BandwidthRule
{
  enum class Kind
  {
    direct_plug_in,
    normal_reference,
    fixed
  };

  Kind kind{ Kind::direct_plug_in };
  double h{ 0.0 }; // only read for Kind::fixed

  static BandwidthRule dpi() { return { Kind::direct_plug_in, 0.0 }; }
  static BandwidthRule nrd() { return { Kind::normal_reference, 0.0 }; }
  static BandwidthRule fixed(double h) { return { Kind::fixed, h }; }

  std::string str() const;
};

//! Bandwidth for a Gaussian kernel estimate over `values`.
//!
//! `weights` may be empty (equal weights) or aligned with `values`; they are
//! rescaled to sum to one and the effective sample size is
//! (sum w)^2 / sum w^2.
//!
//! direct_plug_in is the two-stage plug-in rule: a normal-scale start
//! estimates psi_8, which gives the pilot bandwidth for psi_6, which in turn
//! gives the pilot for psi_4; then h = (1 / (2 sqrt(pi) psi_4 m))^(1/5).
//! Functionals are computed exactly (no binning) on data standardised by
//! min(sd, IQR / 1.349).
double select_bandwidth(std::span<const double> values,
                        std::span<const double> weights,
                        const BandwidthRule& rule);

inline double select_bandwidth(std::span<const double> values,
                               const BandwidthRule& rule)
{
  return select_bandwidth(values, {}, rule);
}

namespace detail {

//! Weighted estimate of psi_r = integral of f^(r) f, r in {4, 6}, with a
//! Gaussian pilot bandwidth g (diagonal terms included). Empty weights mean
//! equal weights 1/n.
double psi_functional(std::span<const double> x,
                      std::span<const double> w,
                      int r,
                      double g);

} // namespace detail

} // namespace biassurv
