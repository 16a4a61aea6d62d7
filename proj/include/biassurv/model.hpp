#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace biassurv {

//! One observed survival record; `event == true` means the time is uncensored.
struct Record
{
  double time;
  bool event;
};

//! Right-censored sample of positive survival times.
//!
//! The sorted view orders by time; at equal times events precede censored
//! records and the original index breaks any remaining ties.
class SurvivalSample
{
public:
  SurvivalSample() = default;
  explicit SurvivalSample(std::vector<Record> records);
  SurvivalSample(std::span<const double> times, std::span<const int> events);

  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  std::size_t uncensored_count() const { return uncensored_; }

  const std::vector<Record>& records() const { return records_; }
  const Record& operator[](std::size_t i) const { return records_[i]; }

  //! Indices into records() in sorted order.
  const std::vector<std::size_t>& order() const { return order_; }
  std::vector<Record> sorted() const;

  std::vector<double> times() const;
  std::vector<double> uncensored_times() const;

  //! Copy with record `i` (original index) removed.
  SurvivalSample without(std::size_t i) const;

  //! Copy with every time replaced by `fn(time)`; fn must map (0, inf) to
  //! (0, inf) monotonically so the order is preserved.
  template<class Fn>
  SurvivalSample transformed(Fn&& fn) const
  {
    std::vector<Record> out = records_;
    for (auto& r : out)
      r.time = fn(r.time);
    return SurvivalSample(std::move(out));
  }

private:
  std::vector<Record> records_;
  std::vector<std::size_t> order_;
  std::size_t uncensored_{ 0 };
};

//! Closed interval of admissible selection parameters.
struct ThetaRange
{
  double lo{ 0.0 };
  double hi{ 3.0 };

  bool contains(double theta) const { return theta >= lo && theta <= hi; }
};

//! Power selection family w(t, theta) = clamp((t / cap)^theta, floor, 1).
//!
//! The cumulative transform W(t, theta) = t^(theta + 1) / (theta + 1) is the
//! unclamped antiderivative of t^theta; it only serves as a monotone change
//! of variable, so the cap and the floor do not enter it.
class SelectionFamily
{
public:
  enum class Kind
  {
    power
  };

  SelectionFamily() = default;
  SelectionFamily(ThetaRange range, double cap, double floor = 1e-6);

  Kind kind() const { return Kind::power; }
  const ThetaRange& range() const { return range_; }
  double cap() const { return cap_; }
  double floor() const { return floor_; }

  double weight(double t, double theta) const;
  double cumulative(double t, double theta) const;
  double inverse_cumulative(double y, double theta) const;

  //! Factor mapping E_f[t^theta]-scale constants to E_f[w(T, theta)] scale.
  double cap_scale(double theta) const;

private:
  ThetaRange range_{};
  double cap_{ 3.0 };
  double floor_{ 1e-6 };
};

double selection_weight(double t, double theta, const SelectionFamily& family);
double cumulative_selection(double t, double theta);
double inverse_cumulative_selection(double y, double theta);

//! Strictly increasing evaluation points with the trapezoid-like spacing
//! weights d_1 = t_2 - t_1, d_i = (t_{i+1} - t_{i-1}) / 2, d_n = t_n - t_{n-1}.
class EvaluationGrid
{
public:
  EvaluationGrid() = default;
  explicit EvaluationGrid(std::vector<double> points);

  //! `count` points k * hi / count, k = 1..count.
  static EvaluationGrid equispaced(double hi, std::size_t count);
  //! Default estimation grid: 512 points up to 1.1 * largest observed time.
  static EvaluationGrid for_sample(const SurvivalSample& sample,
                                   std::size_t count = 512);

  std::size_t size() const { return points_.size(); }
  const std::vector<double>& points() const { return points_; }
  const std::vector<double>& spacing() const { return spacing_; }
  double operator[](std::size_t i) const { return points_[i]; }

  double integrate(std::span<const double> values) const;
  std::vector<double> cumulative(std::span<const double> values) const;

private:
  std::vector<double> points_;
  std::vector<double> spacing_;
};

//! d_i weights of the rule above for any strictly increasing point set.
std::vector<double> spacing_weights(std::span<const double> points);

} // namespace biassurv
