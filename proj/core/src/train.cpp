#include "smartposer/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "smartposer/error.hpp"
#include "smartposer/random.hpp"

namespace smartposer::train {
namespace {

using nn::DirectionTrace;
using nn::LstmDirection;
using nn::Network;
using nn::NetworkTrace;

// Reverse pass of one LSTM direction. dh_out holds the loss gradient w.r.t.
// this direction's T x H output. Weight gradients are accumulated into `g`;
// the gradient w.r.t. the input sequence is returned when requested.
template <typename DhBlock>
MatrixD direction_backward(const LstmDirection<double>& w, const DirectionTrace<double>& tr,
                           const MatrixD& x, const DhBlock& dh_out, bool reverse,
                           LstmDirection<double>& g, bool need_dx) {
  const Eigen::Index steps = x.rows();
  const auto H = static_cast<Eigen::Index>(w.hidden());
  const auto wh = w.w_hidden.matrix();

  MatrixD dz(steps, 4 * H);
  ColVector<double> dh_next = ColVector<double>::Zero(H);
  ColVector<double> dc_next = ColVector<double>::Zero(H);
  for (Eigen::Index s = 0; s < steps; ++s) {
    const Eigen::Index t = reverse ? s : steps - 1 - s;
    const Eigen::Index prev = reverse ? t + 1 : t - 1;
    const bool has_prev = prev >= 0 && prev < steps;
    for (Eigen::Index k = 0; k < H; ++k) {
      const double i = tr.gates(t, k);
      const double f = tr.gates(t, H + k);
      const double gg = tr.gates(t, 2 * H + k);
      const double o = tr.gates(t, 3 * H + k);
      const double c = tr.cell(t, k);
      const double c_prev = has_prev ? tr.cell(prev, k) : 0.0;
      const double tc = std::tanh(c);
      const double dh = dh_out(t, k) + dh_next[k];
      const double dc = dh * o * (1.0 - tc * tc) + dc_next[k];
      dz(t, k) = dc * gg * i * (1.0 - i);
      dz(t, H + k) = dc * c_prev * f * (1.0 - f);
      dz(t, 2 * H + k) = dc * i * (1.0 - gg * gg);
      dz(t, 3 * H + k) = dh * tc * o * (1.0 - o);
      dc_next[k] = dc * f;
    }
    dh_next.noalias() = wh.transpose() * dz.row(t).transpose();
  }

  g.w_input.matrix().noalias() += dz.transpose() * x;
  g.bias.vector() += dz.colwise().sum().transpose();
  MatrixD h_prev = MatrixD::Zero(steps, H);
  if (steps > 1) {
    if (reverse) {
      h_prev.topRows(steps - 1) = tr.hidden.bottomRows(steps - 1);
    } else {
      h_prev.bottomRows(steps - 1) = tr.hidden.topRows(steps - 1);
    }
  }
  g.w_hidden.matrix().noalias() += dz.transpose() * h_prev;
  if (!need_dx) return {};
  return dz * w.w_input.matrix();
}

// Head + stacked Bi-LSTM reverse pass. Returns d(loss)/d(input) when
// `need_input_grad`, otherwise an empty matrix.
MatrixD network_backward(const Network<double>& net, const NetworkTrace<double>& trace, const MatrixD& dy,
                         Network<double>& grad, bool need_input_grad) {
  grad.head_weight.matrix().noalias() += dy.transpose() * trace.top;
  grad.head_bias.vector() += dy.colwise().sum().transpose();
  MatrixD dtop = dy * net.head_weight.matrix();
  for (std::size_t l = net.layers.size(); l-- > 0;) {
    const auto& layer = net.layers[l];
    const auto& lt = trace.layers[l];
    const auto H = static_cast<Eigen::Index>(layer.forward.hidden());
    const bool need_dx = l > 0 || need_input_grad;
    MatrixD dx = direction_backward(layer.forward, lt.forward, lt.input, dtop.leftCols(H), false,
                                    grad.layers[l].forward, need_dx);
    MatrixD dxb = direction_backward(layer.backward, lt.backward, lt.input, dtop.rightCols(H), true,
                                     grad.layers[l].backward, need_dx);
    if (!need_dx) return {};
    dx += dxb;
    dtop = std::move(dx);
  }
  return dtop;
}

struct ForwardPass {
  NetworkTrace<double> corrector;
  NetworkTrace<double> estimator;
  std::vector<double> corrected;
  MatrixD poses;
};

ForwardPass run_forward(const nn::Model<double>& model, const TrainingWindow& w, bool keep_trace) {
  ForwardPass fp;
  if (model.spec.use_uwb) {
    const MatrixD y = nn::network_forward(model.corrector, w.features, keep_trace ? &fp.corrector : nullptr);
    fp.corrected.assign(y.data(), y.data() + y.rows());
  }
  const MatrixD in = nn::estimator_input<double>(w.features, fp.corrected, model.spec);
  fp.poses = nn::network_forward(model.estimator, in, keep_trace ? &fp.estimator : nullptr);
  return fp;
}

LossBreakdown losses(const nn::Model<double>& model, const ForwardPass& fp, const TrainingWindow& w) {
  LossBreakdown l;
  if (model.spec.use_uwb) l.uwb_mse = mse_loss(fp.corrected, w.uwb_target);
  l.pose_mpjpe = mpjpe_loss(fp.poses, w.pose_target);
  l.total = l.uwb_mse + l.pose_mpjpe;
  return l;
}

template <typename F>
void zip_models(F&& f, nn::Model<double>& a, const nn::Model<double>& b) {
  auto ta = nn::named_tensors(a);
  auto tb = nn::named_tensors(b);
  if (ta.size() != tb.size()) throw InvalidInput("model layouts differ");
  for (std::size_t i = 0; i < ta.size(); ++i) {
    if (ta[i].tensor->dims() != tb[i].tensor->dims()) {
      throw InvalidInput("tensor shape mismatch: " + ta[i].name);
    }
    f(ta[i].name, *ta[i].tensor, *tb[i].tensor);
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw InvalidInput("TrainConfig: learning_rate must be > 0");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw InvalidInput("TrainConfig: betas must be in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw InvalidInput("TrainConfig: adam_eps must be > 0");
  if (epochs < 0 || batch_size < 1) throw InvalidInput("TrainConfig: epochs >= 0 and batch_size >= 1");
  if (window_len < 1) throw InvalidInput("TrainConfig: window_len must be positive");
  if (!(grad_clip_norm > 0.0)) throw InvalidInput("TrainConfig: grad_clip_norm must be > 0");
  if (validation_subjects < 0) throw InvalidInput("TrainConfig: validation_subjects must be >= 0");
}

double mse_loss(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size()) throw InvalidInput("mse_loss: length mismatch");
  if (pred.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    s += d * d;
  }
  return s / static_cast<double>(pred.size());
}

double mpjpe_loss(const MatrixD& pred, const MatrixD& target) {
  if (pred.rows() != target.rows() || pred.cols() != 9 || target.cols() != 9) {
    throw InvalidInput("mpjpe_loss: expected matching T x 9 inputs");
  }
  if (pred.rows() == 0) return 0.0;
  double s = 0.0;
  for (Eigen::Index t = 0; t < pred.rows(); ++t) {
    for (Eigen::Index j = 0; j < 3; ++j) {
      s += (pred.row(t).segment<3>(3 * j) - target.row(t).segment<3>(3 * j)).norm();
    }
  }
  return s / static_cast<double>(3 * pred.rows());
}

std::vector<TrainingWindow> make_training_windows(std::span<const pipeline::SessionFeatures> sessions,
                                                  std::size_t window_len,
                                                  std::vector<std::string>* warnings) {
  if (window_len == 0) throw InvalidInput("make_training_windows: window_len must be positive");
  std::vector<TrainingWindow> out;
  for (std::size_t s = 0; s < sessions.size(); ++s) {
    const auto& sf = sessions[s];
    const std::size_t count = sf.frames() / window_len;
    if (count == 0) {
      if (warnings) {
        warnings->push_back("session " + sf.subject_id + " has " + std::to_string(sf.frames()) +
                            " frames, shorter than one window; skipped");
      }
      continue;
    }
    for (std::size_t k = 0; k < count; ++k) {
      TrainingWindow w;
      w.subject_id = sf.subject_id;
      w.session = s;
      w.start = k * window_len;
      w.arm_span = sf.arm_span;
      w.features = pipeline::window_rows(sf.features, w.start, window_len);
      w.uwb_target.assign(sf.uwb_true_norm.begin() + static_cast<std::ptrdiff_t>(w.start),
                          sf.uwb_true_norm.begin() + static_cast<std::ptrdiff_t>(w.start + window_len));
      w.pose_target = pipeline::window_rows(sf.pose_target, w.start, window_len);
      out.push_back(std::move(w));
    }
  }
  return out;
}

LossBreakdown compute_loss(const nn::Model<double>& model, const TrainingWindow& window) {
  return losses(model, run_forward(model, window, false), window);
}

LossBreakdown bptt_backward(const nn::Model<double>& model, const TrainingWindow& window,
                            Gradients& grads, const BackwardOptions& options) {
  const ForwardPass fp = run_forward(model, window, true);
  const LossBreakdown loss = losses(model, fp, window);
  const Eigen::Index steps = fp.poses.rows();

  // d MPJPE / d pose: unit error direction / (3T) per joint.
  MatrixD dpose = MatrixD::Zero(steps, 9);
  const double pose_scale = 1.0 / static_cast<double>(3 * steps);
  for (Eigen::Index t = 0; t < steps; ++t) {
    for (Eigen::Index j = 0; j < 3; ++j) {
      const Eigen::Vector3d e = (fp.poses.row(t).segment<3>(3 * j) - window.pose_target.row(t).segment<3>(3 * j)).transpose();
      const double n = e.norm();
      if (n > 0.0) dpose.row(t).segment<3>(3 * j) = (e * (pose_scale / n)).transpose();
    }
  }

  const bool use_uwb = model.spec.use_uwb;
  const bool end_to_end = use_uwb && !options.detach_corrector;
  const MatrixD dinput = network_backward(model.estimator, fp.estimator, dpose, grads.estimator, end_to_end);

  if (use_uwb) {
    MatrixD dcorr(steps, 1);
    const double mse_scale = 2.0 / static_cast<double>(steps);
    for (Eigen::Index t = 0; t < steps; ++t) {
      dcorr(t, 0) = mse_scale * (fp.corrected[static_cast<std::size_t>(t)] - window.uwb_target[static_cast<std::size_t>(t)]);
    }
    if (end_to_end) dcorr.col(0) += dinput.col(0);
    network_backward(model.corrector, fp.corrector, dcorr, grads.corrector, false);
  }
  return loss;
}

AdamState make_adam_state(const nn::Model<double>& model) {
  AdamState s;
  s.first_moment = nn::make_model<double>(model.spec);
  s.second_moment = nn::make_model<double>(model.spec);
  return s;
}

void adam_step(nn::Model<double>& weights, const Gradients& grads, AdamState& state,
               const TrainConfig& config) {
  auto tw = nn::named_tensors(weights);
  auto tg = nn::named_tensors(grads);
  auto tm = nn::named_tensors(state.first_moment);
  auto tv = nn::named_tensors(state.second_moment);
  if (tw.size() != tg.size() || tw.size() != tm.size() || tw.size() != tv.size()) {
    throw InvalidInput("adam_step: parameter layouts differ");
  }
  for (std::size_t i = 0; i < tw.size(); ++i) {
    const auto& dims = tw[i].tensor->dims();
    if (tg[i].tensor->dims() != dims || tm[i].tensor->dims() != dims || tv[i].tensor->dims() != dims) {
      throw InvalidInput("adam_step: shape mismatch in " + tw[i].name);
    }
  }

  ++state.step;
  const double b1 = config.adam_beta1, b2 = config.adam_beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < tw.size(); ++i) {
    auto w = tw[i].tensor->data();
    auto g = tg[i].tensor->data();
    auto m = tm[i].tensor->data();
    auto v = tv[i].tensor->data();
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = b1 * m[k] + (1.0 - b1) * g[k];
      v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
      const double m_hat = m[k] / bc1;
      const double v_hat = v[k] / bc2;
      w[k] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.adam_eps);
    }
  }
}

double gradient_norm(const Gradients& grads) {
  double s = 0.0;
  for (const auto& nt : nn::named_tensors(grads)) {
    for (double v : nt.tensor->data()) s += v * v;
  }
  return std::sqrt(s);
}

void scale_gradients(Gradients& grads, double factor) {
  for (auto& nt : nn::named_tensors(grads)) {
    for (double& v : nt.tensor->data()) v *= factor;
  }
}

void zero_gradients(Gradients& grads) {
  for (auto& nt : nn::named_tensors(grads)) nt.tensor->fill(0.0);
}

nn::Model<double> init_model(const nn::ModelSpec& spec, std::uint64_t seed) {
  nn::Model<double> model = nn::make_model<double>(spec);
  Rng rng(seed, 0x1417);
  auto init_net = [&rng](nn::Network<double>& net) {
    for (auto& layer : net.layers) {
      for (auto* dir : {&layer.forward, &layer.backward}) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(dir->hidden()));
        for (auto* t : {&dir->w_input, &dir->w_hidden, &dir->bias}) {
          for (double& v : t->data()) v = rng.uniform(-bound, bound);
        }
        const std::size_t H = dir->hidden();
        for (std::size_t k = H; k < 2 * H; ++k) dir->bias[k] += 1.0;
      }
    }
    const double bound = 1.0 / std::sqrt(static_cast<double>(net.head_weight.dim(1)));
    for (double& v : net.head_weight.data()) v = rng.uniform(-bound, bound);
    net.head_bias.fill(0.0);
  };
  if (!model.corrector.empty()) init_net(model.corrector);
  init_net(model.estimator);
  return model;
}

nn::ModelSpec spec_for(const TrainConfig& config) {
  nn::ModelSpec spec;
  spec.window_len = static_cast<std::uint32_t>(config.window_len);
  spec.output_frame_lag = std::min<std::uint32_t>(5, spec.window_len - 1);
  spec.use_uwb = !config.ablate_uwb;
  return spec;
}

TrainResult train(std::span<const pipeline::SessionFeatures> corpus, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  config.validate();
  if (corpus.empty()) throw InvalidInput("train: empty corpus");

  TrainResult result;
  std::vector<std::string> subjects;
  for (const auto& s : corpus) {
    if (std::find(subjects.begin(), subjects.end(), s.subject_id) == subjects.end()) {
      subjects.push_back(s.subject_id);
    }
  }
  const auto n_val = static_cast<std::size_t>(config.validation_subjects);
  if (subjects.size() > n_val) {
    result.validation_subjects.assign(subjects.end() - static_cast<std::ptrdiff_t>(n_val), subjects.end());
    result.training_subjects.assign(subjects.begin(), subjects.end() - static_cast<std::ptrdiff_t>(n_val));
  } else {
    result.training_subjects = subjects;
  }
  auto is_val = [&](const std::string& id) {
    return std::find(result.validation_subjects.begin(), result.validation_subjects.end(), id) !=
           result.validation_subjects.end();
  };
  std::vector<pipeline::SessionFeatures> train_sessions, val_sessions;
  for (const auto& s : corpus) (is_val(s.subject_id) ? val_sessions : train_sessions).push_back(s);

  const std::vector<TrainingWindow> windows =
      make_training_windows(train_sessions, config.window_len, &result.warnings);
  if (windows.empty()) throw InvalidInput("train: corpus too small for a single training window");
  const std::vector<TrainingWindow> val_windows =
      val_sessions.empty() ? windows : make_training_windows(val_sessions, config.window_len, &result.warnings);

  const nn::ModelSpec spec = spec_for(config);
  nn::Model<double> model = init_model(spec, config.seed);

  // Start both heads at the mean training target.
  {
    ColVector<double> pose_mean = ColVector<double>::Zero(spec.pose_dim);
    double uwb_mean = 0.0;
    std::size_t frames = 0;
    for (const auto& w : windows) {
      pose_mean += w.pose_target.colwise().sum().transpose();
      uwb_mean += std::accumulate(w.uwb_target.begin(), w.uwb_target.end(), 0.0);
      frames += static_cast<std::size_t>(w.pose_target.rows());
    }
    model.estimator.head_bias.vector() = pose_mean / static_cast<double>(frames);
    if (spec.use_uwb) model.corrector.head_bias[0] = uwb_mean / static_cast<double>(frames);
  }
  result.initial = model;
  result.weights = model;

  AdamState adam = make_adam_state(model);
  Gradients grads = nn::make_model<double>(spec);
  const BackwardOptions backward{config.detach_corrector};
  Rng rng(config.seed, 0x5eed);
  std::vector<std::size_t> order(windows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  double best = std::numeric_limits<double>::infinity();
  const auto batch = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);

    EpochRecord rec;
    rec.epoch = epoch;
    for (std::size_t b = 0; b < order.size(); b += batch) {
      const std::size_t end = std::min(order.size(), b + batch);
      zero_gradients(grads);
      for (std::size_t k = b; k < end; ++k) {
        const LossBreakdown l = bptt_backward(model, windows[order[k]], grads, backward);
        if (!std::isfinite(l.total)) {
          throw NumericalError("train: non-finite loss at epoch " + std::to_string(epoch) + " (window " +
                               windows[order[k]].subject_id + "@" + std::to_string(windows[order[k]].start) + ")");
        }
        rec.uwb_mse += l.uwb_mse;
        rec.pose_mpjpe += l.pose_mpjpe;
        rec.total += l.total;
      }
      scale_gradients(grads, 1.0 / static_cast<double>(end - b));
      const double norm = gradient_norm(grads);
      if (!std::isfinite(norm)) throw NumericalError("train: non-finite gradient at epoch " + std::to_string(epoch));
      if (norm > config.grad_clip_norm) scale_gradients(grads, config.grad_clip_norm / norm);
      adam_step(model, grads, adam, config);
    }
    const auto n = static_cast<double>(windows.size());
    rec.uwb_mse /= n;
    rec.pose_mpjpe /= n;
    rec.total /= n;

    double val = 0.0;
    for (const auto& w : val_windows) val += compute_loss(model, w).pose_mpjpe * w.arm_span * 100.0;
    rec.val_mpjpe_cm = val / static_cast<double>(val_windows.size());
    if (!std::isfinite(rec.val_mpjpe_cm)) throw NumericalError("train: non-finite validation loss");
    if (rec.val_mpjpe_cm < best) {
      best = rec.val_mpjpe_cm;
      result.weights = model;
      result.best_epoch = epoch;
    }
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

void write_loss_csv(const std::filesystem::path& path, std::span<const EpochRecord> history) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out.precision(10);
  out << "epoch,uwb_mse,pose_mpjpe,total,val_mpjpe_cm\n";
  for (const auto& r : history) {
    out << r.epoch << ',' << r.uwb_mse << ',' << r.pose_mpjpe << ',' << r.total << ',' << r.val_mpjpe_cm << '\n';
  }
  if (!out) throw FormatError("failed writing " + path.string());
}

}  // namespace smartposer::train
