#include "biassurv/model.hpp"
#include "biassurv/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace biassurv {

SurvivalSample::SurvivalSample(std::vector<Record> records)
  : records_(std::move(records))
{
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const double t = records_[i].time;
    if (!(t > 0.0) || !std::isfinite(t))
      throw DomainError("survival time at index " + std::to_string(i) +
                        " must be positive and finite");
    if (records_[i].event)
      ++uncensored_;
  }
  order_.resize(records_.size());
  std::iota(order_.begin(), order_.end(), std::size_t{ 0 });
  std::stable_sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
    const auto& ra = records_[a];
    const auto& rb = records_[b];
    if (ra.time != rb.time)
      return ra.time < rb.time;
    return ra.event && !rb.event;
  });
}

namespace {
std::vector<Record> zip_records(std::span<const double> times,
                                std::span<const int> events)
{
  if (times.size() != events.size())
    throw DomainError("times and events must have equal length");
  std::vector<Record> out;
  out.reserve(times.size());
  for (std::size_t i = 0; i < times.size(); ++i)
    out.push_back({ times[i], events[i] != 0 });
  return out;
}
} // namespace

SurvivalSample::SurvivalSample(std::span<const double> times,
                               std::span<const int> events)
  : SurvivalSample(zip_records(times, events))
{}

std::vector<Record> SurvivalSample::sorted() const
{
  std::vector<Record> out;
  out.reserve(order_.size());
  for (auto i : order_)
    out.push_back(records_[i]);
  return out;
}

std::vector<double> SurvivalSample::times() const
{
  std::vector<double> out;
  out.reserve(records_.size());
  for (const auto& r : records_)
    out.push_back(r.time);
  return out;
}

std::vector<double> SurvivalSample::uncensored_times() const
{
  std::vector<double> out;
  out.reserve(uncensored_);
  for (const auto& r : records_)
    if (r.event)
      out.push_back(r.time);
  return out;
}

SurvivalSample SurvivalSample::without(std::size_t i) const
{
  if (i >= records_.size())
    throw DomainError("record index out of range");
  std::vector<Record> out;
  out.reserve(records_.size() - 1);
  for (std::size_t j = 0; j < records_.size(); ++j)
    if (j != i)
      out.push_back(records_[j]);
  return SurvivalSample(std::move(out));
}

// ---------------------------------------------------------------------------

SelectionFamily::SelectionFamily(ThetaRange range, double cap, double floor)
  : range_(range)
  , cap_(cap)
  , floor_(floor)
{
  if (!(range.lo <= range.hi) || range.lo < 0.0)
    throw DomainError("theta range must be a nonempty interval within [0, inf)");
  if (!(cap > 0.0))
    throw DomainError("selection cap must be positive");
  if (!(floor > 0.0) || floor > 1.0)
    throw DomainError("selection floor must lie in (0, 1]");
}

double SelectionFamily::weight(double t, double theta) const
{
  if (!(t > 0.0))
    throw DomainError("selection weight requires t > 0");
  if (!range_.contains(theta))
    throw DomainError("theta outside the admissible range");
  if (theta == 0.0)
    return 1.0;
  return std::clamp(std::pow(t / cap_, theta), floor_, 1.0);
}

double SelectionFamily::cumulative(double t, double theta) const
{
  return cumulative_selection(t, theta);
}

double SelectionFamily::inverse_cumulative(double y, double theta) const
{
  return inverse_cumulative_selection(y, theta);
}

double SelectionFamily::cap_scale(double theta) const
{
  return std::pow(cap_, -theta);
}

double selection_weight(double t, double theta, const SelectionFamily& family)
{
  return family.weight(t, theta);
}

double cumulative_selection(double t, double theta)
{
  if (!(t > 0.0))
    throw DomainError("cumulative selection requires t > 0");
  if (!(theta >= 0.0))
    throw DomainError("cumulative selection requires theta >= 0");
  if (theta == 0.0)
    return t;
  return std::pow(t, theta + 1.0) / (theta + 1.0);
}

double inverse_cumulative_selection(double y, double theta)
{
  if (!(y > 0.0))
    throw DomainError("inverse cumulative selection requires y > 0");
  if (!(theta >= 0.0))
    throw DomainError("inverse cumulative selection requires theta >= 0");
  if (theta == 0.0)
    return y;
  return std::pow((theta + 1.0) * y, 1.0 / (theta + 1.0));
}

// ---------------------------------------------------------------------------

std::vector<double> spacing_weights(std::span<const double> points)
{
  const std::size_t n = points.size();
  if (n < 2)
    throw DomainError("spacing weights need at least two points");
  std::vector<double> d(n);
  d.front() = points[1] - points[0];
  d.back() = points[n - 1] - points[n - 2];
  for (std::size_t i = 1; i + 1 < n; ++i)
    d[i] = 0.5 * (points[i + 1] - points[i - 1]);
  return d;
}

EvaluationGrid::EvaluationGrid(std::vector<double> points)
  : points_(std::move(points))
{
  if (points_.size() < 2)
    throw DomainError("evaluation grid needs at least two points");
  if (!(points_.front() > 0.0))
    throw DomainError("evaluation grid points must be positive");
  for (std::size_t i = 1; i < points_.size(); ++i)
    if (!(points_[i] > points_[i - 1]))
      throw DomainError("evaluation grid points must be strictly increasing");
  spacing_ = spacing_weights(points_);
}

EvaluationGrid EvaluationGrid::equispaced(double hi, std::size_t count)
{
  if (!(hi > 0.0) || count < 2)
    throw DomainError("equispaced grid needs hi > 0 and at least two points");
  std::vector<double> pts(count);
  const double step = hi / static_cast<double>(count);
  for (std::size_t k = 0; k < count; ++k)
    pts[k] = step * static_cast<double>(k + 1);
  return EvaluationGrid(std::move(pts));
}

EvaluationGrid EvaluationGrid::for_sample(const SurvivalSample& sample,
                                          std::size_t count)
{
  if (sample.empty())
    throw EstimationError("cannot build an evaluation grid for an empty sample");
  const double tmax = sample[sample.order().back()].time;
  return equispaced(1.1 * tmax, count);
}

double EvaluationGrid::integrate(std::span<const double> values) const
{
  if (values.size() != points_.size())
    throw DomainError("grid values have the wrong length");
  double s = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i)
    s += values[i] * spacing_[i];
  return s;
}

std::vector<double> EvaluationGrid::cumulative(std::span<const double> values) const
{
  if (values.size() != points_.size())
    throw DomainError("grid values have the wrong length");
  std::vector<double> out(values.size());
  double s = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    s += values[i] * spacing_[i];
    out[i] = std::clamp(s, 0.0, 1.0);
  }
  return out;
}

} // namespace biassurv
