#pragma once

// Evaluation: per-joint error statistics, CDFs, UWB correction gain, scatter
// fits, spatial max-error heatmaps, leave-one-subject-out cross-validation and
// the UWB ablation.
//
// Joints are indexed 0 = shoulder, 1 = elbow, 2 = wrist throughout.

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "smartposer/kinematics.hpp"
#include "smartposer/nn.hpp"
#include "smartposer/session_features.hpp"
#include "smartposer/train.hpp"

namespace smartposer::eval {

inline constexpr std::array<const char*, 3> kJointNames{"shoulder", "elbow", "wrist"};

struct FrameError {
  std::array<double, 3> euclid_cm{};  // per joint
  std::array<double, 3> abs_cm{};     // per joint, mean absolute coordinate error
};

// Throws InvalidInput on a length mismatch.
std::vector<FrameError> joint_errors(std::span<const ArmPose> pred, std::span<const ArmPose> gt);

// Linear interpolation between the middle order statistics. Throws
// InvalidInput on empty input.
double median(std::span<const double> values);

struct JointStats {
  double median_cm = 0.0;
  double mpjpe_cm = 0.0;  // mean Euclidean error
  double mae_cm = 0.0;    // mean absolute coordinate error
};

struct SubjectErrors {
  std::string subject_id;
  std::vector<FrameError> errors;
};

struct SubjectReport {
  std::string subject_id;
  std::size_t frames = 0;
  std::array<JointStats, 3> joints{};
  double elbow_wrist_median_cm = 0.0;
};

struct UwbGain {
  double raw_mae_cm = 0.0;
  double corrected_mae_cm = 0.0;
  double reduction_pct = 0.0;
};

struct MetricsReport {
  std::size_t frames = 0;
  std::array<JointStats, 3> joints{};
  double elbow_wrist_median_cm = 0.0;  // mean of the elbow and wrist medians
  double pooled_elbow_wrist_median_cm = 0.0;  // median of pooled elbow+wrist samples
  double mpjpe_cm = 0.0;  // over all joints
  double mae_cm = 0.0;
  std::vector<SubjectReport> subjects;
  std::optional<UwbGain> uwb;
};

// Throws InvalidInput if there are no frames.
MetricsReport summarize(std::span<const FrameError> errors);
MetricsReport summarize(std::span<const SubjectErrors> per_subject);

struct CdfCurve {
  std::vector<double> values;     // sorted ascending
  std::vector<double> fractions;  // (i + 1) / n
};

// Throws InvalidInput on empty input.
CdfCurve make_cdf(std::span<const double> values);

// Distances in meters, reported in cm. Throws InvalidInput on a length
// mismatch or empty input.
UwbGain uwb_gain(std::span<const double> raw, std::span<const double> corrected,
                 std::span<const double> truth);

struct ScatterFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

// OLS of corrected on truth. Throws InvalidInput with fewer than 2 points,
// mismatched lengths or a constant truth series.
ScatterFit fit_scatter(std::span<const double> corrected, std::span<const double> truth);

struct HeatmapConfig {
  double lo = -1.0;
  double hi = 1.0;
  double cell = 0.1;

  std::size_t cells_per_axis() const;
  void validate() const;
};

enum class Projection { kFrontal, kSide, kTop };

struct HeatmapGrid {
  HeatmapConfig config;
  std::size_t n = 0;
  std::vector<double> max_error;      // n^3, index (ix * n + iy) * n + iz
  std::vector<std::uint32_t> counts;  // n^3

  double at(std::size_t ix, std::size_t iy, std::size_t iz) const;
  std::size_t count(std::size_t ix, std::size_t iy, std::size_t iz) const;
  // Cell index of a coordinate, clamped to the grid.
  std::size_t cell_of(double v) const;
  // Max along the collapsed axis. Frontal drops y (rows z, cols x), side
  // drops x (rows z, cols y), top drops z (rows y, cols x). Row 0 is the
  // lowest coordinate.
  MatrixD project(Projection p) const;
};

// Per-cell maximum of `errors` (meters) at `positions`. Points outside the
// volume land in the nearest boundary cell.
HeatmapGrid build_heatmap(std::span<const Vec3> positions, std::span<const double> errors,
                          const HeatmapConfig& config = {});

// Per-frame model outputs on one held-out session, aligned with ground truth
// at the reported frame.
struct SessionEval {
  std::string subject_id;
  std::vector<std::size_t> frame_index;
  std::vector<ArmPose> pred;
  std::vector<ArmPose> gt;
  std::vector<double> uwb_raw_m;
  std::vector<double> uwb_corrected_m;
  std::vector<double> uwb_true_m;
  std::vector<FrameError> errors;
};

struct EvalResult {
  std::vector<SessionEval> sessions;
  MetricsReport report;
};

// Slides the model over each session with `stride` (1 = every frame) and
// compares the reported frame against its ground truth. Throws InvalidInput
// when a session lacks ground truth, the model spec does not match the
// feature width or stride is 0.
EvalResult evaluate_model(const nn::ModelWeights& model, std::span<const pipeline::SessionFeatures> sessions,
                          std::size_t stride = 1);

// Mean pose over every training frame, in normalized units.
PoseVector mean_pose(std::span<const pipeline::SessionFeatures> sessions);

// Evaluates a constant normalized pose, denormalized per subject.
MetricsReport evaluate_constant(const PoseVector& pose, std::span<const pipeline::SessionFeatures> sessions,
                                std::size_t stride, std::size_t output_index);

struct Aggregate {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation (0 for one fold)
};

Aggregate aggregate(std::span<const double> values);

struct FoldResult {
  std::string held_out;
  MetricsReport report;
  MetricsReport untrained;
  MetricsReport mean_pose;
  train::TrainResult training;
  nn::ModelWeights weights;
  EvalResult eval;
  bool isolated = false;  // no held-out frame hash appears in training
};

struct LosoResult {
  std::vector<FoldResult> folds;
  MetricsReport pooled;  // all held-out frames of all folds
  Aggregate elbow_wrist_median_cm;
  Aggregate mpjpe_cm;
  Aggregate wrist_mpjpe_cm;
  Aggregate uwb_reduction_pct;
};

struct LosoOptions {
  std::size_t stride = 1;
  // Also evaluate the untrained weights and the constant mean-pose baseline.
  bool baselines = false;
  std::function<void(std::size_t fold, const std::string& subject, const train::EpochRecord&)> on_epoch;
};

// One fold per distinct subject id. Throws InvalidInput with fewer than 2
// subjects.
LosoResult run_loso_cv(std::span<const pipeline::SessionFeatures> corpus, const train::TrainConfig& config,
                       const LosoOptions& options = {});

struct AblationResult {
  LosoResult with_uwb;
  LosoResult imu_only;
  std::array<double, 3> with_uwb_median_cm{};
  std::array<double, 3> imu_only_median_cm{};
};

// Identical folds and seeds; only `ablate_uwb` differs between the arms.
AblationResult run_ablation(std::span<const pipeline::SessionFeatures> corpus, const train::TrainConfig& config,
                            const LosoOptions& options = {});

// Hash of one feature row (subject, timestamp and values).
std::uint64_t frame_hash(const pipeline::SessionFeatures& s, std::size_t frame);

}  // namespace smartposer::eval
