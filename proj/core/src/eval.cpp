#include "smartposer/eval.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "smartposer/error.hpp"

namespace smartposer::eval {
namespace {

const Vec3& joint(const ArmPose& p, std::size_t j) {
  return j == 0 ? p.shoulder : (j == 1 ? p.elbow : p.wrist);
}

double mean(std::span<const double> v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

JointStats joint_stats(const std::vector<double>& euclid, const std::vector<double>& abs) {
  return {median(euclid), mean(euclid), mean(abs)};
}

struct Columns {
  std::array<std::vector<double>, 3> euclid;
  std::array<std::vector<double>, 3> abs;

  void add(std::span<const FrameError> errors) {
    for (const auto& e : errors) {
      for (std::size_t j = 0; j < 3; ++j) {
        euclid[j].push_back(e.euclid_cm[j]);
        abs[j].push_back(e.abs_cm[j]);
      }
    }
  }
  std::size_t frames() const { return euclid[0].size(); }
};

void fill_report(MetricsReport& r, const Columns& c) {
  r.frames = c.frames();
  double all_e = 0.0, all_a = 0.0;
  for (std::size_t j = 0; j < 3; ++j) {
    r.joints[j] = joint_stats(c.euclid[j], c.abs[j]);
    all_e += r.joints[j].mpjpe_cm;
    all_a += r.joints[j].mae_cm;
  }
  r.mpjpe_cm = all_e / 3.0;
  r.mae_cm = all_a / 3.0;
  r.elbow_wrist_median_cm = 0.5 * (r.joints[1].median_cm + r.joints[2].median_cm);
  std::vector<double> pooled = c.euclid[1];
  pooled.insert(pooled.end(), c.euclid[2].begin(), c.euclid[2].end());
  r.pooled_elbow_wrist_median_cm = median(pooled);
}

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n) {
  const auto* b = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= b[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<std::string> subject_ids(std::span<const pipeline::SessionFeatures> corpus) {
  std::vector<std::string> ids;
  for (const auto& s : corpus) {
    if (std::find(ids.begin(), ids.end(), s.subject_id) == ids.end()) ids.push_back(s.subject_id);
  }
  return ids;
}

void require_ground_truth(const pipeline::SessionFeatures& s) {
  if (!s.has_ground_truth) throw InvalidInput("session " + s.subject_id + " is missing the ground truth channel");
}

std::vector<SubjectErrors> errors_by_subject(const std::vector<SessionEval>& sessions) {
  std::vector<SubjectErrors> out;
  for (const auto& s : sessions) {
    auto it = std::find_if(out.begin(), out.end(), [&](const SubjectErrors& e) { return e.subject_id == s.subject_id; });
    if (it == out.end()) {
      out.push_back({s.subject_id, {}});
      it = out.end() - 1;
    }
    it->errors.insert(it->errors.end(), s.errors.begin(), s.errors.end());
  }
  return out;
}

std::optional<UwbGain> gain_of(const std::vector<SessionEval>& sessions) {
  std::vector<double> raw, corr, truth;
  for (const auto& s : sessions) {
    if (s.uwb_corrected_m.empty()) return std::nullopt;
    raw.insert(raw.end(), s.uwb_raw_m.begin(), s.uwb_raw_m.end());
    corr.insert(corr.end(), s.uwb_corrected_m.begin(), s.uwb_corrected_m.end());
    truth.insert(truth.end(), s.uwb_true_m.begin(), s.uwb_true_m.end());
  }
  if (raw.empty()) return std::nullopt;
  return uwb_gain(raw, corr, truth);
}

}  // namespace

std::vector<FrameError> joint_errors(std::span<const ArmPose> pred, std::span<const ArmPose> gt) {
  if (pred.size() != gt.size()) throw InvalidInput("joint_errors: length mismatch");
  std::vector<FrameError> out(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      const Vec3 d = joint(pred[i], j) - joint(gt[i], j);
      out[i].euclid_cm[j] = 100.0 * d.norm();
      out[i].abs_cm[j] = 100.0 * (std::abs(d.x) + std::abs(d.y) + std::abs(d.z)) / 3.0;
    }
  }
  return out;
}

double median(std::span<const double> values) {
  if (values.empty()) throw InvalidInput("median of empty input");
  std::vector<double> v(values.begin(), values.end());
  const std::size_t n = v.size();
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(v.begin(), mid, v.end());
  const double upper = *mid;
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), mid);
  return 0.5 * (lower + upper);
}

MetricsReport summarize(std::span<const FrameError> errors) {
  if (errors.empty()) throw InvalidInput("summarize: no frames");
  Columns c;
  c.add(errors);
  MetricsReport r;
  fill_report(r, c);
  return r;
}

MetricsReport summarize(std::span<const SubjectErrors> per_subject) {
  Columns all;
  MetricsReport r;
  for (const auto& s : per_subject) {
    if (s.errors.empty()) continue;
    Columns c;
    c.add(s.errors);
    all.add(s.errors);
    SubjectReport sr;
    sr.subject_id = s.subject_id;
    sr.frames = c.frames();
    for (std::size_t j = 0; j < 3; ++j) sr.joints[j] = joint_stats(c.euclid[j], c.abs[j]);
    sr.elbow_wrist_median_cm = 0.5 * (sr.joints[1].median_cm + sr.joints[2].median_cm);
    r.subjects.push_back(std::move(sr));
  }
  if (all.frames() == 0) throw InvalidInput("summarize: no frames");
  fill_report(r, all);
  return r;
}

CdfCurve make_cdf(std::span<const double> values) {
  if (values.empty()) throw InvalidInput("make_cdf: empty input");
  CdfCurve c;
  c.values.assign(values.begin(), values.end());
  std::sort(c.values.begin(), c.values.end());
  const auto n = static_cast<double>(c.values.size());
  c.fractions.resize(c.values.size());
  for (std::size_t i = 0; i < c.values.size(); ++i) c.fractions[i] = static_cast<double>(i + 1) / n;
  return c;
}

UwbGain uwb_gain(std::span<const double> raw, std::span<const double> corrected, std::span<const double> truth) {
  if (raw.size() != truth.size() || corrected.size() != truth.size()) {
    throw InvalidInput("uwb_gain: length mismatch");
  }
  if (truth.empty()) throw InvalidInput("uwb_gain: empty input");
  double er = 0.0, ec = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    er += std::abs(raw[i] - truth[i]);
    ec += std::abs(corrected[i] - truth[i]);
  }
  const auto n = static_cast<double>(truth.size());
  UwbGain g;
  g.raw_mae_cm = 100.0 * er / n;
  g.corrected_mae_cm = 100.0 * ec / n;
  g.reduction_pct = er > 0.0 ? 100.0 * (er - ec) / er : 0.0;
  return g;
}

ScatterFit fit_scatter(std::span<const double> corrected, std::span<const double> truth) {
  if (corrected.size() != truth.size()) throw InvalidInput("fit_scatter: length mismatch");
  if (truth.size() < 2) throw InvalidInput("fit_scatter: need at least 2 points");
  const double mx = mean(truth);
  const double my = mean(corrected);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double dx = truth[i] - mx;
    const double dy = corrected[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (!(sxx > 0.0)) throw InvalidInput("fit_scatter: truth has zero variance");
  ScatterFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy > 0.0 ? std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0) : 1.0;
  return f;
}

std::size_t HeatmapConfig::cells_per_axis() const {
  return static_cast<std::size_t>(std::llround((hi - lo) / cell));
}

void HeatmapConfig::validate() const {
  if (!(hi > lo) || !(cell > 0.0) || cells_per_axis() == 0) {
    throw InvalidInput("HeatmapConfig: need hi > lo and a positive cell size");
  }
}

double HeatmapGrid::at(std::size_t ix, std::size_t iy, std::size_t iz) const {
  return max_error.at((ix * n + iy) * n + iz);
}

std::size_t HeatmapGrid::count(std::size_t ix, std::size_t iy, std::size_t iz) const {
  return counts.at((ix * n + iy) * n + iz);
}

std::size_t HeatmapGrid::cell_of(double v) const {
  const double f = std::floor((v - config.lo) / config.cell);
  if (!(f > 0.0)) return 0;
  return std::min(n - 1, static_cast<std::size_t>(f));
}

MatrixD HeatmapGrid::project(Projection p) const {
  const auto N = static_cast<Eigen::Index>(n);
  MatrixD out = MatrixD::Zero(N, N);
  for (std::size_t ix = 0; ix < n; ++ix) {
    for (std::size_t iy = 0; iy < n; ++iy) {
      for (std::size_t iz = 0; iz < n; ++iz) {
        const double v = at(ix, iy, iz);
        double* cell = nullptr;
        switch (p) {
          case Projection::kFrontal: cell = &out(static_cast<Eigen::Index>(iz), static_cast<Eigen::Index>(ix)); break;
          case Projection::kSide: cell = &out(static_cast<Eigen::Index>(iz), static_cast<Eigen::Index>(iy)); break;
          case Projection::kTop: cell = &out(static_cast<Eigen::Index>(iy), static_cast<Eigen::Index>(ix)); break;
        }
        *cell = std::max(*cell, v);
      }
    }
  }
  return out;
}

HeatmapGrid build_heatmap(std::span<const Vec3> positions, std::span<const double> errors,
                          const HeatmapConfig& config) {
  config.validate();
  if (positions.size() != errors.size()) throw InvalidInput("build_heatmap: length mismatch");
  HeatmapGrid g;
  g.config = config;
  g.n = config.cells_per_axis();
  g.max_error.assign(g.n * g.n * g.n, 0.0);
  g.counts.assign(g.n * g.n * g.n, 0);
  for (std::size_t i = 0; i < positions.size(); ++i) {
    const std::size_t k = (g.cell_of(positions[i].x) * g.n + g.cell_of(positions[i].y)) * g.n + g.cell_of(positions[i].z);
    g.max_error[k] = std::max(g.max_error[k], std::abs(errors[i]));
    ++g.counts[k];
  }
  return g;
}

EvalResult evaluate_model(const nn::ModelWeights& model, std::span<const pipeline::SessionFeatures> sessions,
                          std::size_t stride) {
  if (stride == 0) throw InvalidInput("evaluate_model: stride must be positive");
  const nn::ModelSpec& spec = model.spec;
  const std::size_t len = spec.window_len;
  const std::size_t out_idx = spec.output_frame_index();
  EvalResult result;
  for (const auto& s : sessions) {
    require_ground_truth(s);
    if (static_cast<std::size_t>(s.features.cols()) != spec.input_dim) {
      throw InvalidInput("evaluate_model: feature width does not match the model");
    }
    SessionEval se;
    se.subject_id = s.subject_id;
    for (std::size_t start = 0; start + len <= s.frames(); start += stride) {
      const MatrixF window = pipeline::window_rows(s.features, start, len).cast<float>();
      const nn::Prediction p = nn::infer_window(model, window);
      const std::size_t f = start + out_idx;
      se.frame_index.push_back(f);
      se.pred.push_back(denormalize_pose(p.pose, s.arm_span));
      se.gt.push_back(s.gt_pose[f]);
      se.uwb_raw_m.push_back(s.uwb_raw_m[f]);
      se.uwb_true_m.push_back(s.uwb_true_m[f]);
      if (spec.use_uwb) se.uwb_corrected_m.push_back(p.uwb_corrected * s.arm_span);
    }
    se.errors = joint_errors(se.pred, se.gt);
    result.sessions.push_back(std::move(se));
  }
  const auto by_subject = errors_by_subject(result.sessions);
  result.report = summarize(by_subject);
  result.report.uwb = gain_of(result.sessions);
  return result;
}

PoseVector mean_pose(std::span<const pipeline::SessionFeatures> sessions) {
  PoseVector m{};
  std::size_t n = 0;
  for (const auto& s : sessions) {
    for (Eigen::Index i = 0; i < s.pose_target.rows(); ++i) {
      for (Eigen::Index j = 0; j < 9; ++j) m[static_cast<std::size_t>(j)] += s.pose_target(i, j);
    }
    n += static_cast<std::size_t>(s.pose_target.rows());
  }
  if (n == 0) throw InvalidInput("mean_pose: no frames");
  for (double& v : m) v /= static_cast<double>(n);
  return m;
}

MetricsReport evaluate_constant(const PoseVector& pose, std::span<const pipeline::SessionFeatures> sessions,
                                std::size_t stride, std::size_t output_index) {
  if (stride == 0) throw InvalidInput("evaluate_constant: stride must be positive");
  std::vector<SubjectErrors> per;
  for (const auto& s : sessions) {
    require_ground_truth(s);
    const ArmPose p = denormalize_pose(pose, s.arm_span);
    std::vector<ArmPose> pred, gt;
    for (std::size_t f = output_index; f < s.frames(); f += stride) {
      pred.push_back(p);
      gt.push_back(s.gt_pose[f]);
    }
    per.push_back({s.subject_id, joint_errors(pred, gt)});
  }
  return summarize(per);
}

Aggregate aggregate(std::span<const double> values) {
  Aggregate a;
  if (values.empty()) return a;
  a.mean = mean(values);
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - a.mean) * (v - a.mean);
    a.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return a;
}

std::uint64_t frame_hash(const pipeline::SessionFeatures& s, std::size_t frame) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  h = fnv1a(h, s.subject_id.data(), s.subject_id.size());
  const double t = s.timestamps.at(frame);
  h = fnv1a(h, &t, sizeof t);
  for (Eigen::Index j = 0; j < s.features.cols(); ++j) {
    const double v = s.features(static_cast<Eigen::Index>(frame), j);
    h = fnv1a(h, &v, sizeof v);
  }
  return h;
}

LosoResult run_loso_cv(std::span<const pipeline::SessionFeatures> corpus, const train::TrainConfig& config,
                       const LosoOptions& options) {
  const std::vector<std::string> ids = subject_ids(corpus);
  if (ids.size() < 2) throw InvalidInput("run_loso_cv: need at least 2 subjects");
  for (const auto& s : corpus) require_ground_truth(s);

  LosoResult out;
  std::vector<SessionEval> all_sessions;
  for (std::size_t k = 0; k < ids.size(); ++k) {
    std::vector<pipeline::SessionFeatures> train_set, test_set;
    for (const auto& s : corpus) (s.subject_id == ids[k] ? test_set : train_set).push_back(s);

    FoldResult fold;
    fold.held_out = ids[k];
    train::EpochCallback cb;
    if (options.on_epoch) cb = [&, k](const train::EpochRecord& r) { options.on_epoch(k, ids[k], r); };
    fold.training = train::train(train_set, config, cb);
    fold.weights = nn::model_cast<float>(fold.training.weights);

    std::unordered_set<std::uint64_t> seen;
    for (const auto& s : train_set) {
      for (std::size_t f = 0; f < s.frames(); ++f) seen.insert(frame_hash(s, f));
    }
    fold.isolated = true;
    for (const auto& s : test_set) {
      for (std::size_t f = 0; f < s.frames() && fold.isolated; ++f) {
        if (seen.count(frame_hash(s, f)) != 0) fold.isolated = false;
      }
    }

    fold.eval = evaluate_model(fold.weights, test_set, options.stride);
    fold.report = fold.eval.report;
    if (options.baselines) {
      fold.untrained = evaluate_model(nn::model_cast<float>(fold.training.initial), test_set, options.stride).report;
      fold.mean_pose = evaluate_constant(mean_pose(train_set), test_set, options.stride,
                                         fold.weights.spec.output_frame_index());
    }
    all_sessions.insert(all_sessions.end(), fold.eval.sessions.begin(), fold.eval.sessions.end());
    out.folds.push_back(std::move(fold));
  }

  out.pooled = summarize(errors_by_subject(all_sessions));
  out.pooled.uwb = gain_of(all_sessions);
  std::vector<double> ew, mp, wr, ur;
  for (const auto& f : out.folds) {
    ew.push_back(f.report.elbow_wrist_median_cm);
    mp.push_back(f.report.mpjpe_cm);
    wr.push_back(f.report.joints[2].mpjpe_cm);
    if (f.report.uwb) ur.push_back(f.report.uwb->reduction_pct);
  }
  out.elbow_wrist_median_cm = aggregate(ew);
  out.mpjpe_cm = aggregate(mp);
  out.wrist_mpjpe_cm = aggregate(wr);
  out.uwb_reduction_pct = aggregate(ur);
  return out;
}

AblationResult run_ablation(std::span<const pipeline::SessionFeatures> corpus, const train::TrainConfig& config,
                            const LosoOptions& options) {
  train::TrainConfig with = config;
  with.ablate_uwb = false;
  train::TrainConfig without = config;
  without.ablate_uwb = true;
  AblationResult r;
  r.with_uwb = run_loso_cv(corpus, with, options);
  r.imu_only = run_loso_cv(corpus, without, options);
  for (std::size_t j = 0; j < 3; ++j) {
    r.with_uwb_median_cm[j] = r.with_uwb.pooled.joints[j].median_cm;
    r.imu_only_median_cm[j] = r.imu_only.pooled.joints[j].median_cm;
  }
  return r;
}

}  // namespace smartposer::eval
