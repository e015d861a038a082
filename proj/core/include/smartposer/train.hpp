#pragma once

// End-to-end training of the corrector + estimator pair: summed loss
// (corrector MSE + estimator MPJPE), exact reverse-mode gradients through
// time, gradient clipping and Adam.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "smartposer/matrix.hpp"
#include "smartposer/nn.hpp"
#include "smartposer/session_features.hpp"

namespace smartposer::train {

struct TrainConfig {
  double learning_rate = 3e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int epochs = 18;
  int batch_size = 1;
  double accel_scale = 30.0;
  std::size_t window_len = 125;
  std::uint64_t seed = 1;
  double grad_clip_norm = 1.0;
  // Stop gradient flow from the estimator into the corrector.
  bool detach_corrector = false;
  // IMU-only ablation: no corrector, 24-wide estimator input.
  bool ablate_uwb = false;
  // Validation subject count held out of the training corpus (0 = validate
  // on the training windows).
  int validation_subjects = 1;

  void validate() const;
};

struct LossBreakdown {
  double uwb_mse = 0.0;
  double pose_mpjpe = 0.0;
  double total = 0.0;
};

using Gradients = nn::Model<double>;

struct AdamState {
  nn::Model<double> first_moment;
  nn::Model<double> second_moment;
  std::uint64_t step = 0;
};

// Mean of squared differences. Throws InvalidInput on a length mismatch.
double mse_loss(std::span<const double> pred, std::span<const double> target);

// Mean over frames and the three joints of the per-joint Euclidean error.
// Both inputs are T x 9. Throws InvalidInput on a shape mismatch.
double mpjpe_loss(const MatrixD& pred, const MatrixD& target);

struct TrainingWindow {
  std::string subject_id;
  std::size_t session = 0;
  std::size_t start = 0;
  double arm_span = 0.0;
  MatrixD features;                // window_len x 25
  std::vector<double> uwb_target;  // normalized true distance
  MatrixD pose_target;             // window_len x 9, normalized
};

// Consecutive non-overlapping windows per session; trailing frames that do
// not fill a window are dropped. Sessions shorter than one window are skipped
// and reported through `warnings`.
std::vector<TrainingWindow> make_training_windows(std::span<const pipeline::SessionFeatures> sessions,
                                                  std::size_t window_len = 125,
                                                  std::vector<std::string>* warnings = nullptr);

struct BackwardOptions {
  bool detach_corrector = false;
};

// Forward pass only.
LossBreakdown compute_loss(const nn::Model<double>& model, const TrainingWindow& window);

// Forward + backward for one window. Gradients are added into `grads`, which
// must have the model's shapes.
LossBreakdown bptt_backward(const nn::Model<double>& model, const TrainingWindow& window,
                            Gradients& grads, const BackwardOptions& options = {});

AdamState make_adam_state(const nn::Model<double>& model);

// Bias-corrected Adam update. Throws InvalidInput on a shape mismatch.
void adam_step(nn::Model<double>& weights, const Gradients& grads, AdamState& state,
               const TrainConfig& config);

// Global L2 norm across every gradient tensor.
double gradient_norm(const Gradients& grads);
void scale_gradients(Gradients& grads, double factor);
void zero_gradients(Gradients& grads);

// Uniform(-1/sqrt(H), 1/sqrt(H)) LSTM weights, forget-gate bias +1, heads
// uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) with zero bias. train() then moves
// the head biases to the mean training target.
nn::Model<double> init_model(const nn::ModelSpec& spec, std::uint64_t seed);

nn::ModelSpec spec_for(const TrainConfig& config);

struct EpochRecord {
  int epoch = 0;
  double uwb_mse = 0.0;
  double pose_mpjpe = 0.0;
  double total = 0.0;
  double val_mpjpe_cm = 0.0;
};

struct TrainResult {
  nn::Model<double> weights;  // best validation epoch
  nn::Model<double> initial;  // weights before the first update
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  std::vector<std::string> training_subjects;
  std::vector<std::string> validation_subjects;
  std::vector<std::string> warnings;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Throws InvalidInput on an empty corpus and NumericalError on a non-finite
// loss.
TrainResult train(std::span<const pipeline::SessionFeatures> corpus, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

// epoch,uwb_mse,pose_mpjpe,total,val_mpjpe_cm
void write_loss_csv(const std::filesystem::path& path, std::span<const EpochRecord> history);

}  // namespace smartposer::train
