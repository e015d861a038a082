#include "smartposer/report_io.hpp"

#include <charconv>
#include <cmath>

#include "smartposer/error.hpp"
#include "smartposer/session_io.hpp"

namespace smartposer::io {
namespace {

using nlohmann::json;

json joint_json(const eval::JointStats& s) {
  return {{"median_cm", s.median_cm}, {"mpjpe_cm", s.mpjpe_cm}, {"mae_cm", s.mae_cm}};
}

json joints_json(const std::array<eval::JointStats, 3>& j) {
  json o = json::object();
  for (std::size_t i = 0; i < 3; ++i) o[eval::kJointNames[i]] = joint_json(j[i]);
  return o;
}

void num(std::string& out, double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, r.ptr);
}

json matrix_json(const MatrixD& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json aggregate_json(const eval::Aggregate& a) { return {{"mean", a.mean}, {"sd", a.sd}}; }

std::vector<double> as_vector(const json& j, const char* what) {
  if (!j.is_array()) throw FormatError(std::string(what) + ": expected an array");
  std::vector<double> v;
  v.reserve(j.size());
  for (const auto& x : j) {
    if (!x.is_number()) throw FormatError(std::string(what) + ": expected numbers");
    v.push_back(x.get<double>());
  }
  return v;
}

eval::HeatmapGrid uwb_heatmap(const eval::EvalResult& r, bool corrected) {
  std::vector<Vec3> pos;
  std::vector<double> err;
  for (const auto& s : r.sessions) {
    const auto& est = corrected ? s.uwb_corrected_m : s.uwb_raw_m;
    if (est.size() != s.gt.size()) continue;
    for (std::size_t i = 0; i < s.gt.size(); ++i) {
      pos.push_back(s.gt[i].wrist);
      err.push_back(est[i] - s.uwb_true_m[i]);
    }
  }
  return eval::build_heatmap(pos, err);
}

}  // namespace

json metrics_to_json(const eval::MetricsReport& r) {
  json j = {{"frames", r.frames},
            {"joints", joints_json(r.joints)},
            {"elbow_wrist_median_cm", r.elbow_wrist_median_cm},
            {"pooled_elbow_wrist_median_cm", r.pooled_elbow_wrist_median_cm},
            {"mpjpe_cm", r.mpjpe_cm},
            {"mae_cm", r.mae_cm}};
  json subjects = json::array();
  for (const auto& s : r.subjects) {
    subjects.push_back({{"subject_id", s.subject_id},
                        {"frames", s.frames},
                        {"joints", joints_json(s.joints)},
                        {"elbow_wrist_median_cm", s.elbow_wrist_median_cm}});
  }
  j["subjects"] = std::move(subjects);
  if (r.uwb) {
    j["uwb"] = {{"raw_mae_cm", r.uwb->raw_mae_cm},
                {"corrected_mae_cm", r.uwb->corrected_mae_cm},
                {"reduction_pct", r.uwb->reduction_pct}};
  }
  return j;
}

std::string metrics_csv(const eval::MetricsReport& r) {
  std::string out = "scope,joint,frames,median_cm,mpjpe_cm,mae_cm\n";
  auto rows = [&out](const std::string& scope, std::size_t frames, const std::array<eval::JointStats, 3>& js) {
    for (std::size_t i = 0; i < 3; ++i) {
      out += scope + ',' + eval::kJointNames[i] + ',' + std::to_string(frames) + ',';
      num(out, js[i].median_cm);
      out += ',';
      num(out, js[i].mpjpe_cm);
      out += ',';
      num(out, js[i].mae_cm);
      out += '\n';
    }
  };
  rows("all", r.frames, r.joints);
  for (const auto& s : r.subjects) rows(s.subject_id, s.frames, s.joints);
  return out;
}

eval::CdfCurve downsample_cdf(const eval::CdfCurve& c, std::size_t max_points) {
  if (max_points < 2 || c.values.size() <= max_points) return c;
  eval::CdfCurve out;
  const std::size_t n = c.values.size();
  for (std::size_t k = 0; k < max_points; ++k) {
    const std::size_t i = static_cast<std::size_t>(
        std::llround(static_cast<double>(k) * static_cast<double>(n - 1) / static_cast<double>(max_points - 1)));
    out.values.push_back(c.values[i]);
    out.fractions.push_back(c.fractions[i]);
  }
  return out;
}

json cdf_to_json(const eval::CdfCurve& c) { return {{"values_cm", c.values}, {"fractions", c.fractions}}; }

eval::CdfCurve cdf_from_json(const json& j) {
  eval::CdfCurve c;
  if (!j.is_object() || !j.contains("values_cm") || !j.contains("fractions")) {
    throw FormatError("cdf: expected values_cm and fractions");
  }
  c.values = as_vector(j["values_cm"], "cdf values");
  c.fractions = as_vector(j["fractions"], "cdf fractions");
  if (c.values.size() != c.fractions.size()) throw FormatError("cdf: length mismatch");
  if (c.values.empty()) throw FormatError("cdf: no data");
  return c;
}

std::string cdf_csv(const std::vector<std::pair<std::string, eval::CdfCurve>>& curves) {
  std::string out = "joint,value_cm,fraction\n";
  for (const auto& [name, c] : curves) {
    for (std::size_t i = 0; i < c.values.size(); ++i) {
      out += name + ',';
      num(out, c.values[i]);
      out += ',';
      num(out, c.fractions[i]);
      out += '\n';
    }
  }
  return out;
}

json heatmap_to_json(const eval::HeatmapGrid& g) {
  return {{"lo", g.config.lo},
          {"hi", g.config.hi},
          {"cell", g.config.cell},
          {"n", g.n},
          {"frontal", matrix_json(g.project(eval::Projection::kFrontal))},
          {"side", matrix_json(g.project(eval::Projection::kSide))},
          {"top", matrix_json(g.project(eval::Projection::kTop))}};
}

std::string heatmap_csv(const eval::HeatmapGrid& g) {
  std::string out = "projection,row,col,max_error_m\n";
  const std::pair<const char*, eval::Projection> projections[] = {
      {"frontal", eval::Projection::kFrontal}, {"side", eval::Projection::kSide}, {"top", eval::Projection::kTop}};
  for (const auto& [name, p] : projections) {
    const MatrixD m = g.project(p);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        if (m(r, c) <= 0.0) continue;
        out += std::string(name) + ',' + std::to_string(r) + ',' + std::to_string(c) + ',';
        num(out, m(r, c));
        out += '\n';
      }
    }
  }
  return out;
}

json trace_to_json(const UwbTrace& t) {
  json j = {{"t", t.t}, {"raw", t.raw}, {"true", t.truth}};
  if (!t.corrected.empty()) j["corrected"] = t.corrected;
  return j;
}

UwbTrace trace_from_json(const json& j) {
  if (!j.is_object()) throw FormatError("uwb trace: expected an object");
  UwbTrace t;
  try {
    t.t = as_vector(j.at("t"), "trace t");
    t.raw = as_vector(j.at("raw"), "trace raw");
    t.truth = as_vector(j.at("true"), "trace true");
    if (j.contains("corrected")) t.corrected = as_vector(j["corrected"], "trace corrected");
  } catch (const json::exception& e) {
    throw FormatError(std::string("uwb trace: ") + e.what());
  }
  if (t.t.empty()) throw FormatError("uwb trace: no data");
  if (t.raw.size() != t.t.size() || t.truth.size() != t.t.size() ||
      (!t.corrected.empty() && t.corrected.size() != t.t.size())) {
    throw FormatError("uwb trace: series lengths differ");
  }
  return t;
}

json eval_report_json(const eval::EvalResult& r, std::size_t trace_frames) {
  json j = {{"format_version", kFormatVersion}, {"kind", "eval"}, {"metrics", metrics_to_json(r.report)}};

  json cdf = json::object();
  for (std::size_t joint = 1; joint < 3; ++joint) {
    std::vector<double> v;
    for (const auto& s : r.sessions) {
      for (const auto& e : s.errors) v.push_back(e.euclid_cm[joint]);
    }
    if (!v.empty()) cdf[eval::kJointNames[joint]] = cdf_to_json(downsample_cdf(eval::make_cdf(v), 400));
  }
  j["cdf"] = std::move(cdf);

  bool have_frames = false;
  for (const auto& s : r.sessions) have_frames = have_frames || !s.gt.empty();
  if (have_frames) {
    json h = {{"uwb_raw", heatmap_to_json(uwb_heatmap(r, false))}};
    if (r.report.uwb) h["uwb_corrected"] = heatmap_to_json(uwb_heatmap(r, true));
    j["heatmaps"] = std::move(h);
  }

  if (!r.sessions.empty() && !r.sessions.front().frame_index.empty()) {
    const auto& s = r.sessions.front();
    UwbTrace t;
    const std::size_t n = std::min(trace_frames, s.frame_index.size());
    for (std::size_t i = 0; i < n; ++i) {
      t.t.push_back(static_cast<double>(s.frame_index[i]) / 25.0);
      t.raw.push_back(s.uwb_raw_m[i]);
      t.truth.push_back(s.uwb_true_m[i]);
      if (!s.uwb_corrected_m.empty()) t.corrected.push_back(s.uwb_corrected_m[i]);
    }
    j["uwb_trace"] = trace_to_json(t);
    j["uwb_trace"]["subject_id"] = s.subject_id;
  }
  return j;
}

json loso_to_json(const eval::LosoResult& r) {
  json folds = json::array();
  for (const auto& f : r.folds) {
    json fj = {{"held_out", f.held_out},
               {"isolated", f.isolated},
               {"best_epoch", f.training.best_epoch},
               {"training_subjects", f.training.training_subjects},
               {"validation_subjects", f.training.validation_subjects},
               {"metrics", metrics_to_json(f.report)}};
    if (f.untrained.frames > 0) fj["untrained"] = metrics_to_json(f.untrained);
    if (f.mean_pose.frames > 0) fj["mean_pose"] = metrics_to_json(f.mean_pose);
    json hist = json::array();
    for (const auto& e : f.training.history) {
      hist.push_back({{"epoch", e.epoch},
                      {"uwb_mse", e.uwb_mse},
                      {"pose_mpjpe", e.pose_mpjpe},
                      {"total", e.total},
                      {"val_mpjpe_cm", e.val_mpjpe_cm}});
    }
    fj["history"] = std::move(hist);
    folds.push_back(std::move(fj));
  }
  return {{"format_version", kFormatVersion},
          {"kind", "loso"},
          {"folds", std::move(folds)},
          {"pooled", metrics_to_json(r.pooled)},
          {"aggregate",
           {{"elbow_wrist_median_cm", aggregate_json(r.elbow_wrist_median_cm)},
            {"mpjpe_cm", aggregate_json(r.mpjpe_cm)},
            {"wrist_mpjpe_cm", aggregate_json(r.wrist_mpjpe_cm)},
            {"uwb_reduction_pct", aggregate_json(r.uwb_reduction_pct)}}}};
}

json ablation_to_json(const eval::AblationResult& r) {
  json paired = json::object();
  for (std::size_t i = 0; i < 3; ++i) {
    paired[eval::kJointNames[i]] = {{"uwb_imu_median_cm", r.with_uwb_median_cm[i]},
                                    {"imu_only_median_cm", r.imu_only_median_cm[i]}};
  }
  return {{"format_version", kFormatVersion},
          {"kind", "ablation"},
          {"paired_medians", std::move(paired)},
          {"uwb_imu_elbow_wrist_median_cm", r.with_uwb.pooled.elbow_wrist_median_cm},
          {"imu_only_elbow_wrist_median_cm", r.imu_only.pooled.elbow_wrist_median_cm},
          {"uwb_imu", loso_to_json(r.with_uwb)},
          {"imu_only", loso_to_json(r.imu_only)}};
}

}  // namespace smartposer::io
