#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace consensus::graph {

/// Flat weight: w(t) = value.
struct ConstantProfile {
  double value = 0.0;
};

/// Linear ramp: w(t) = value_at_start + slope * (t - t_start).
struct AffineProfile {
  double value_at_start = 0.0;
  double slope = 0.0;
};

/// w(t) = offset + amplitude * sin(angular_frequency * t + phase), t absolute.
struct SinusoidProfile {
  double offset = 0.0;
  double amplitude = 0.0;
  double angular_frequency = 0.0;
  double phase = 0.0;
};

using SegmentProfile = std::variant<ConstantProfile, AffineProfile, SinusoidProfile>;

/// One piece of an edge-weight function, active on [t_start, t_end).
/// All profiles have closed-form antiderivatives, so window integrals are exact.
struct WeightSegment {
  double t_start = 0.0;
  double t_end = std::numeric_limits<double>::infinity();
  SegmentProfile profile = ConstantProfile{};

  bool is_constant() const { return std::holds_alternative<ConstantProfile>(profile); }
  bool unbounded() const { return !std::isfinite(t_end); }

  double value_at(double t) const;
  /// Exact integral of the profile over [a, b]; caller clamps [a, b] to the segment.
  double integral(double a, double b) const;
  /// Infimum / supremum of the profile over the segment span (exact, via
  /// endpoint and interior critical-point evaluation).
  double min_value() const;
  double max_value() const;
  /// sup |dw/dt| over the segment.
  double slope_bound() const;
  /// Left limit at t_end (requires finite t_end).
  double value_at_end() const;
};

/// Piecewise edge weight w(t) built from contiguous segments starting at t=0,
/// bounded by w_star. If `period` is set the segments describe one period
/// exactly and evaluation wraps, so the domain is [0, inf). Evaluation is
/// right-continuous at segment boundaries.
class WeightSchedule {
 public:
  WeightSchedule() = default;
  WeightSchedule(std::vector<WeightSegment> segments, double w_star,
                 std::optional<double> period = std::nullopt);

  /// Single constant weight on [0, inf).
  static WeightSchedule constant(double value, std::optional<double> w_star = std::nullopt);

  /// Point evaluation of w(t). Throws std::out_of_range past the domain.
  double value_at(double t) const;

  /// Exact integral of w over [t0, t1], 0 <= t0 <= t1 <= domain_end().
  double integral(double t0, double t1) const;

  /// End of the evaluable domain: +inf for periodic schedules or when the
  /// final segment is unbounded, else the final t_end.
  double domain_end() const;

  bool periodic() const { return period_.has_value(); }
  std::optional<double> period() const { return period_; }
  double w_star() const { return w_star_; }
  const std::vector<WeightSegment>& segments() const { return segments_; }

  /// True when every segment carries a ConstantProfile.
  bool piecewise_constant() const;

  /// Segment start/end times falling strictly inside (t0, t1), unwrapped for
  /// periodic schedules. Used by integrators to avoid stepping across a
  /// profile switch.
  std::vector<double> boundaries_in(double t0, double t1) const;

 private:
  const WeightSegment& segment_at(double t) const;
  double integral_within_period(double a, double b) const;

  std::vector<WeightSegment> segments_;
  double w_star_ = 0.0;
  std::optional<double> period_;
  double base_integral_ = 0.0;  // integral over one period, when periodic
};

}  // namespace consensus::graph
