#include "consensus/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace consensus::graph {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string segment_desc(const WeightSegment& s) {
  return "[" + std::to_string(s.t_start) + ", " + std::to_string(s.t_end) + ")";
}

}  // namespace

double WeightSegment::value_at(double t) const {
  if (const auto* c = std::get_if<ConstantProfile>(&profile)) return c->value;
  if (const auto* a = std::get_if<AffineProfile>(&profile))
    return a->value_at_start + a->slope * (t - t_start);
  const auto& s = std::get<SinusoidProfile>(profile);
  return s.offset + s.amplitude * std::sin(s.angular_frequency * t + s.phase);
}

double WeightSegment::integral(double a, double b) const {
  if (b <= a) return 0.0;
  if (const auto* c = std::get_if<ConstantProfile>(&profile)) return c->value * (b - a);
  if (const auto* f = std::get_if<AffineProfile>(&profile)) {
    const double da = a - t_start, db = b - t_start;
    return f->value_at_start * (b - a) + 0.5 * f->slope * (db * db - da * da);
  }
  const auto& s = std::get<SinusoidProfile>(profile);
  if (s.angular_frequency == 0.0)
    return (s.offset + s.amplitude * std::sin(s.phase)) * (b - a);
  const double w = s.angular_frequency;
  return s.offset * (b - a) -
         (s.amplitude / w) * (std::cos(w * b + s.phase) - std::cos(w * a + s.phase));
}

namespace {

// Extremes of a sinusoid over [a, b]: endpoints plus interior critical points
// of sin(w t + phi).
std::pair<double, double> sinusoid_extremes(const SinusoidProfile& s, double a, double b) {
  auto eval = [&](double t) {
    return s.offset + s.amplitude * std::sin(s.angular_frequency * t + s.phase);
  };
  double lo = std::min(eval(a), eval(b));
  double hi = std::max(eval(a), eval(b));
  const double w = s.angular_frequency;
  if (w != 0.0 && std::isfinite(b)) {
    // critical times: w t + phase = pi/2 + k pi
    const double k0 = std::ceil((w * a + s.phase - kPi / 2.0) / kPi);
    for (double k = k0;; k += 1.0) {
      const double t = (kPi / 2.0 + k * kPi - s.phase) / w;
      if (t > b) break;
      if (t >= a) {
        lo = std::min(lo, eval(t));
        hi = std::max(hi, eval(t));
      }
    }
  } else if (w != 0.0) {
    lo = s.offset - std::abs(s.amplitude);
    hi = s.offset + std::abs(s.amplitude);
  }
  return {lo, hi};
}

}  // namespace

double WeightSegment::min_value() const {
  if (const auto* c = std::get_if<ConstantProfile>(&profile)) return c->value;
  if (const auto* a = std::get_if<AffineProfile>(&profile)) {
    if (!std::isfinite(t_end)) return a->slope < 0.0 ? -std::numeric_limits<double>::infinity()
                                                     : a->value_at_start;
    return std::min(value_at(t_start), value_at_end());
  }
  return sinusoid_extremes(std::get<SinusoidProfile>(profile), t_start, t_end).first;
}

double WeightSegment::max_value() const {
  if (const auto* c = std::get_if<ConstantProfile>(&profile)) return c->value;
  if (const auto* a = std::get_if<AffineProfile>(&profile)) {
    if (!std::isfinite(t_end)) return a->slope > 0.0 ? std::numeric_limits<double>::infinity()
                                                     : a->value_at_start;
    return std::max(value_at(t_start), value_at_end());
  }
  return sinusoid_extremes(std::get<SinusoidProfile>(profile), t_start, t_end).second;
}

double WeightSegment::slope_bound() const {
  if (std::holds_alternative<ConstantProfile>(profile)) return 0.0;
  if (const auto* a = std::get_if<AffineProfile>(&profile)) return std::abs(a->slope);
  const auto& s = std::get<SinusoidProfile>(profile);
  return std::abs(s.amplitude * s.angular_frequency);
}

double WeightSegment::value_at_end() const {
  if (!std::isfinite(t_end))
    throw std::logic_error("value_at_end: segment is unbounded");
  return value_at(t_end);
}

WeightSchedule::WeightSchedule(std::vector<WeightSegment> segments, double w_star,
                               std::optional<double> period)
    : segments_(std::move(segments)), w_star_(w_star), period_(period) {
  if (segments_.empty()) throw std::invalid_argument("WeightSchedule: no segments");
  if (w_star_ < 0.0) throw std::invalid_argument("WeightSchedule: w_star must be nonnegative");
  if (segments_.front().t_start != 0.0)
    throw std::invalid_argument("WeightSchedule: first segment must start at t=0");
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    const auto& s = segments_[i];
    if (!(s.t_start < s.t_end))
      throw std::invalid_argument("WeightSchedule: empty segment " + segment_desc(s));
    if (i + 1 < segments_.size()) {
      if (!std::isfinite(s.t_end))
        throw std::invalid_argument("WeightSchedule: unbounded segment before the last one");
      if (s.t_end != segments_[i + 1].t_start)
        throw std::invalid_argument("WeightSchedule: gap after segment " + segment_desc(s) +
                                    " (segments must be contiguous)");
    }
    const double lo = s.min_value(), hi = s.max_value();
    if (lo < -1e-12 || hi > w_star_ + 1e-12)
      throw std::invalid_argument("WeightSchedule: segment " + segment_desc(s) +
                                  " leaves [0, w_star]: range [" + std::to_string(lo) + ", " +
                                  std::to_string(hi) + "], w_star=" + std::to_string(w_star_));
  }
  if (period_) {
    if (!(*period_ > 0.0)) throw std::invalid_argument("WeightSchedule: period must be positive");
    if (segments_.back().t_end != *period_)
      throw std::invalid_argument("WeightSchedule: periodic segments must tile [0, period)");
    base_integral_ = 0.0;
    for (const auto& s : segments_) base_integral_ += s.integral(s.t_start, s.t_end);
  }
}

WeightSchedule WeightSchedule::constant(double value, std::optional<double> w_star) {
  WeightSegment seg;
  seg.profile = ConstantProfile{value};
  return WeightSchedule({seg}, w_star.value_or(value));
}

double WeightSchedule::domain_end() const {
  if (period_) return std::numeric_limits<double>::infinity();
  return segments_.back().t_end;
}

const WeightSegment& WeightSchedule::segment_at(double t) const {
  // upper_bound on t_start, then step back: gives the segment with
  // t_start <= t < t_end (right-continuous convention).
  auto it = std::upper_bound(segments_.begin(), segments_.end(), t,
                             [](double v, const WeightSegment& s) { return v < s.t_start; });
  return *std::prev(it);
}

double WeightSchedule::value_at(double t) const {
  if (t < 0.0) throw std::out_of_range("WeightSchedule: t < 0");
  if (period_) t = std::fmod(t, *period_);
  if (t >= domain_end())
    throw std::out_of_range("WeightSchedule: t=" + std::to_string(t) +
                            " beyond domain end " + std::to_string(domain_end()));
  return segment_at(t).value_at(t);
}

double WeightSchedule::integral(double t0, double t1) const {
  if (t0 < 0.0 || t1 < t0)
    throw std::invalid_argument("WeightSchedule::integral: need 0 <= t0 <= t1");
  if (t1 > domain_end())
    throw std::out_of_range("WeightSchedule::integral: window end " + std::to_string(t1) +
                            " beyond domain end " + std::to_string(domain_end()));
  if (t1 == t0) return 0.0;

  if (period_) {
    const double p = *period_;
    const double full = std::floor(t1 / p) - std::ceil(t0 / p);
    double acc = 0.0;
    if (full >= 0.0) {
      acc += full * base_integral_;
      const double head_end = std::ceil(t0 / p) * p;
      if (head_end > t0) acc += integral_within_period(std::fmod(t0, p), p);
      const double tail_start = std::floor(t1 / p) * p;
      if (t1 > tail_start) acc += integral_within_period(0.0, std::fmod(t1, p));
      return acc;
    }
    // window inside one period
    return integral_within_period(std::fmod(t0, p), std::fmod(t0, p) + (t1 - t0));
  }
  return integral_within_period(t0, t1);
}

// Integral over [a, b] in unwrapped segment coordinates (b <= last t_end).
double WeightSchedule::integral_within_period(double a, double b) const {
  double acc = 0.0;
  for (const auto& s : segments_) {
    const double lo = std::max(a, s.t_start);
    const double hi = std::min(b, s.t_end);
    if (hi > lo) acc += s.integral(lo, hi);
    if (s.t_end >= b) break;
  }
  return acc;
}

std::vector<double> WeightSchedule::boundaries_in(double t0, double t1) const {
  std::vector<double> out;
  if (!period_) {
    for (const auto& s : segments_) {
      if (s.t_start > t0 && s.t_start < t1) out.push_back(s.t_start);
    }
    return out;
  }
  const double p = *period_;
  // every k*p + t_start landing strictly inside (t0, t1)
  for (const auto& s : segments_) {
    double k = std::floor((t0 - s.t_start) / p);
    for (double t = s.t_start + k * p; t < t1; t += p) {
      if (t > t0 && t < t1) out.push_back(t);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

bool WeightSchedule::piecewise_constant() const {
  return std::all_of(segments_.begin(), segments_.end(),
                     [](const WeightSegment& s) { return s.is_constant(); });
}

}  // namespace consensus::graph
