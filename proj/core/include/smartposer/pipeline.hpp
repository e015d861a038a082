#pragma once

// Calibrated sensor streams -> 25-dimensional normalized feature frames and
// the 125-frame rolling input window.

#include <array>
#include <cstddef>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "smartposer/math.hpp"

namespace smartposer::pipeline {

inline constexpr std::size_t kFeatureDim = 25;
inline constexpr std::size_t kWindowLen = 125;
inline constexpr double kFrameRateHz = 25.0;
inline constexpr double kAccelScale = 30.0;

// Feature layout (offsets into FusedFrame::features).
namespace feature {
inline constexpr std::size_t kUwb = 0;             // 1: distance / arm span
inline constexpr std::size_t kWatchRelOrient = 1;  // 9: phone^T * watch, row-major
inline constexpr std::size_t kPhoneOrient = 10;    // 9: aligned phone orientation, row-major
inline constexpr std::size_t kWatchRelAccel = 19;  // 3: phone^T * watch accel / 30
inline constexpr std::size_t kPhoneAccel = 22;     // 3: phone accel / 30
}  // namespace feature

struct FusedFrame {
  double timestamp = 0.0;
  std::array<double, kFeatureDim> features{};
};

struct UwbEvent {
  double t = 0.0;
  double meters = 0.0;
};

// Zero-order hold of ranging events onto frame timestamps. Throws
// InvalidInput if the first event is later than the first frame or events
// are out of order.
std::vector<double> hold_upsample_uwb(std::span<const UwbEvent> events,
                                      std::span<const double> frame_times);

Vec3 scale_acceleration(const Vec3& a);
Vec3 unscale_acceleration(const Vec3& a);

// d / arm_span. Throws InvalidInput for arm_span <= 0 or d < 0.
double normalize_uwb(double d, double arm_span);

// Orientations and accelerations must already be calibrated and expressed in
// the aligned global frame.
FusedFrame assemble_frame(double timestamp, const Rot3& watch_orient, const Rot3& phone_orient,
                          const Vec3& watch_accel, const Vec3& phone_accel, double uwb_norm);

// Row-major kWindowLen x kFeatureDim snapshot, oldest frame first.
struct FeatureWindow {
  std::vector<double> values;
  std::vector<double> timestamps;

  std::size_t length() const { return timestamps.size(); }
  double at(std::size_t frame, std::size_t f) const { return values[frame * kFeatureDim + f]; }
};

class RollingBuffer {
 public:
  explicit RollingBuffer(std::size_t capacity = kWindowLen);

  // Appends `frame`, evicting the oldest frame at capacity. Returns a window
  // once the buffer is full. Throws InvalidInput on a non-increasing timestamp.
  std::optional<FeatureWindow> push_and_window(const FusedFrame& frame);

  std::size_t size() const { return frames_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::size_t frames_seen() const { return seen_; }

 private:
  std::size_t capacity_;
  std::size_t seen_ = 0;
  std::deque<FusedFrame> frames_;
};

}  // namespace smartposer::pipeline
