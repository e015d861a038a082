#include "smartposer/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "smartposer/error.hpp"

namespace smartposer::pipeline {

std::vector<double> hold_upsample_uwb(std::span<const UwbEvent> events,
                                      std::span<const double> frame_times) {
  if (frame_times.empty()) return {};
  if (events.empty() || events.front().t > frame_times.front()) {
    throw InvalidInput("hold_upsample_uwb: no ranging event at or before the first frame");
  }
  for (std::size_t i = 1; i < events.size(); ++i) {
    if (events[i].t < events[i - 1].t) {
      throw InvalidInput("hold_upsample_uwb: events out of order");
    }
  }
  std::vector<double> out;
  out.reserve(frame_times.size());
  std::size_t next = 0;
  double held = events.front().meters;
  for (double t : frame_times) {
    while (next < events.size() && events[next].t <= t) {
      held = events[next].meters;
      ++next;
    }
    out.push_back(held);
  }
  return out;
}

Vec3 scale_acceleration(const Vec3& a) { return a / kAccelScale; }
Vec3 unscale_acceleration(const Vec3& a) { return a * kAccelScale; }

double normalize_uwb(double d, double arm_span) {
  if (!(arm_span > 0.0)) {
    throw InvalidInput("normalize_uwb: arm_span must be positive");
  }
  if (!(d >= 0.0)) {
    throw InvalidInput("normalize_uwb: negative distance");
  }
  return d / arm_span;
}

FusedFrame assemble_frame(double timestamp, const Rot3& watch_orient, const Rot3& phone_orient,
                          const Vec3& watch_accel, const Vec3& phone_accel, double uwb_norm) {
  FusedFrame f;
  f.timestamp = timestamp;
  auto& x = f.features;
  x[feature::kUwb] = uwb_norm;

  const Rot3 rel = rot_relative(phone_orient, watch_orient);
  std::copy(rel.m.begin(), rel.m.end(), x.begin() + feature::kWatchRelOrient);
  std::copy(phone_orient.m.begin(), phone_orient.m.end(), x.begin() + feature::kPhoneOrient);

  const Vec3 wa = rotate_vec(phone_orient.transpose(), scale_acceleration(watch_accel));
  const Vec3 pa = scale_acceleration(phone_accel);
  x[feature::kWatchRelAccel + 0] = wa.x;
  x[feature::kWatchRelAccel + 1] = wa.y;
  x[feature::kWatchRelAccel + 2] = wa.z;
  x[feature::kPhoneAccel + 0] = pa.x;
  x[feature::kPhoneAccel + 1] = pa.y;
  x[feature::kPhoneAccel + 2] = pa.z;
  return f;
}

RollingBuffer::RollingBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw InvalidInput("RollingBuffer: zero capacity");
}

std::optional<FeatureWindow> RollingBuffer::push_and_window(const FusedFrame& frame) {
  if (!frames_.empty() && !(frame.timestamp > frames_.back().timestamp)) {
    throw InvalidInput("RollingBuffer: out-of-order timestamp " + std::to_string(frame.timestamp));
  }
  frames_.push_back(frame);
  if (frames_.size() > capacity_) frames_.pop_front();
  ++seen_;
  if (frames_.size() < capacity_) return std::nullopt;

  FeatureWindow w;
  w.values.reserve(capacity_ * kFeatureDim);
  w.timestamps.reserve(capacity_);
  for (const FusedFrame& f : frames_) {
    w.values.insert(w.values.end(), f.features.begin(), f.features.end());
    w.timestamps.push_back(f.timestamp);
  }
  return w;
}

}  // namespace smartposer::pipeline
