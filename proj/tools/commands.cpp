#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <nlohmann/json.hpp>

#include "smartposer/calibration.hpp"
#include "smartposer/error.hpp"
#include "smartposer/eval.hpp"
#include "smartposer/pipeline.hpp"
#include "smartposer/random.hpp"
#include "smartposer/report_io.hpp"
#include "smartposer/session_features.hpp"
#include "smartposer/session_io.hpp"
#include "smartposer/simulator.hpp"
#include "smartposer/svg.hpp"
#include "smartposer/weights_io.hpp"

namespace smartposer::cli {

std::vector<svg::HeatmapPanel> heatmap_panels(const nlohmann::json& heatmaps);

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kToolVersion = "smartposer 0.1.0";

void probe_writable(const fs::path& dir) {
  const fs::path probe = dir / ".smartposer-write-probe";
  {
    std::ofstream out(probe);
    if (!out) throw UsageError("directory is not writable: " + dir.string());
  }
  std::error_code ec;
  fs::remove(probe, ec);
}

void ensure_output_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw UsageError("cannot create output directory " + dir.string());
  probe_writable(dir);
}

void ensure_output_file(const fs::path& file) {
  const fs::path parent = file.parent_path().empty() ? fs::path(".") : file.parent_path();
  if (!fs::is_directory(parent)) throw UsageError("output directory does not exist: " + parent.string());
  if (fs::is_directory(file)) throw UsageError("output path is a directory: " + file.string());
  probe_writable(parent);
}

void require_file(const fs::path& p, const char* what) {
  if (!fs::is_regular_file(p)) throw UsageError(std::string(what) + " not found: " + p.string());
}

void require_dir(const fs::path& p, const char* what) {
  if (!fs::is_directory(p)) throw UsageError(std::string(what) + " is not a directory: " + p.string());
}

std::vector<pipeline::SessionFeatures> load_corpus(const fs::path& dir) {
  std::vector<pipeline::SessionFeatures> out;
  for (const auto& p : io::list_sessions(dir)) out.push_back(pipeline::session_features(io::read_session(p)));
  return out;
}

json train_config_json(const train::TrainConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"adam_beta1", c.adam_beta1},   {"adam_beta2", c.adam_beta2},
          {"adam_eps", c.adam_eps},           {"epochs", c.epochs},           {"batch_size", c.batch_size},
          {"accel_scale", c.accel_scale},     {"window_len", c.window_len},   {"seed", c.seed},
          {"grad_clip_norm", c.grad_clip_norm}, {"detach_corrector", c.detach_corrector},
          {"ablate_uwb", c.ablate_uwb},       {"validation_subjects", c.validation_subjects}};
}

void print_config(const train::TrainConfig& c) {
  std::printf("learning_rate %s\nepochs %d\nbatch_size %d\nseed %llu\nablate_uwb %s\n",
              short_number(c.learning_rate).c_str(), c.epochs, c.batch_size,
              static_cast<unsigned long long>(c.seed), c.ablate_uwb ? "true" : "false");
}

void validate_train_config(const train::TrainConfig& c) {
  try {
    c.validate();
  } catch (const InvalidInput& e) {
    throw UsageError(e.what());
  }
}

void write_eval_outputs(const eval::EvalResult& r, const fs::path& dir, const json& extra = json::object()) {
  json report = io::eval_report_json(r);
  for (const auto& [k, v] : extra.items()) report[k] = v;
  io::write_json(dir / "report.json", report);
  io::write_text(dir / "metrics.csv", io::metrics_csv(r.report));

  std::vector<std::pair<std::string, eval::CdfCurve>> curves;
  for (const char* joint : {"elbow", "wrist"}) {
    if (report["cdf"].contains(joint)) curves.emplace_back(joint, io::cdf_from_json(report["cdf"][joint]));
  }
  if (!curves.empty()) {
    io::write_text(dir / "cdf.csv", io::cdf_csv(curves));
    io::write_text(dir / "cdf.svg", svg::cdf_plot(curves));
  }

  std::vector<Vec3> pos;
  std::vector<double> raw_err, corr_err;
  for (const auto& s : r.sessions) {
    for (std::size_t i = 0; i < s.gt.size(); ++i) {
      pos.push_back(s.gt[i].wrist);
      raw_err.push_back(s.uwb_raw_m[i] - s.uwb_true_m[i]);
      if (!s.uwb_corrected_m.empty()) corr_err.push_back(s.uwb_corrected_m[i] - s.uwb_true_m[i]);
    }
  }
  if (!pos.empty()) {
    io::write_text(dir / "heatmap_uwb_raw.csv", io::heatmap_csv(eval::build_heatmap(pos, raw_err)));
    if (corr_err.size() == pos.size()) {
      io::write_text(dir / "heatmap_uwb_corrected.csv", io::heatmap_csv(eval::build_heatmap(pos, corr_err)));
    }
  }
  if (report.contains("heatmaps")) {
    io::write_text(dir / "heatmap.svg", svg::heatmap_plot(heatmap_panels(report["heatmaps"]), -1.0, 1.0));
  }
  if (report.contains("uwb_trace")) {
    io::write_text(dir / "uwb_trace.svg", svg::uwb_trace_plot(io::trace_from_json(report["uwb_trace"])));
  }
}

void print_report(const char* label, const eval::MetricsReport& r) {
  std::printf("%s: frames %zu  median cm (shoulder/elbow/wrist) %.2f / %.2f / %.2f  elbow+wrist median %.2f  "
              "MPJPE %.2f  MAE %.2f\n",
              label, r.frames, r.joints[0].median_cm, r.joints[1].median_cm, r.joints[2].median_cm,
              r.elbow_wrist_median_cm, r.mpjpe_cm, r.mae_cm);
  if (r.uwb) {
    std::printf("%s: UWB MAE raw %.2f cm  corrected %.2f cm  reduction %.1f%%\n", label, r.uwb->raw_mae_cm,
                r.uwb->corrected_mae_cm, r.uwb->reduction_pct);
  }
}

eval::EvalResult pooled_eval(const eval::LosoResult& r) {
  eval::EvalResult e;
  for (const auto& f : r.folds) e.sessions.insert(e.sessions.end(), f.eval.sessions.begin(), f.eval.sessions.end());
  e.report = r.pooled;
  return e;
}

}  // namespace

std::vector<svg::HeatmapPanel> heatmap_panels(const json& heatmaps) {
  std::vector<svg::HeatmapPanel> panels;
  const std::pair<const char*, const char*> grids[] = {{"uwb_raw", "raw"}, {"uwb_corrected", "corrected"}};
  const std::tuple<const char*, const char*, const char*> views[] = {
      {"frontal", "x", "z"}, {"side", "y", "z"}, {"top", "x", "y"}};
  for (const auto& [key, label] : grids) {
    if (!heatmaps.contains(key)) continue;
    const json& g = heatmaps[key];
    for (const auto& [view, xl, yl] : views) {
      if (!g.contains(view) || !g[view].is_array() || g[view].empty()) {
        throw FormatError(std::string("heatmap '") + key + "' lacks the " + view + " projection");
      }
      const json& rows = g[view];
      MatrixD m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
      for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != rows[0].size()) throw FormatError("heatmap rows differ in length");
        for (std::size_t c = 0; c < rows[r].size(); ++c) {
          m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c].get<double>();
        }
      }
      panels.push_back({std::string(label) + " " + view, std::move(m), xl, yl});
    }
  }
  if (panels.empty()) throw FormatError("report has no heatmap data");
  return panels;
}

std::string short_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  std::string s = buf;
  if (s.find('e') == std::string::npos && (v == 0.0 || std::abs(v) >= 1e-3)) return s;
  std::snprintf(buf, sizeof buf, "%.6e", v);
  s = buf;
  const auto e = s.find('e');
  std::string mant = s.substr(0, e);
  if (mant.find('.') != std::string::npos) {
    while (mant.back() == '0') mant.pop_back();
    if (mant.back() == '.') mant.pop_back();
  }
  return mant + "e" + std::to_string(std::stoi(s.substr(e + 1)));
}

int run_simulate(const SimulateOptions& o) {
  if (o.subjects < 1) throw UsageError("--subjects must be at least 1");
  if (!(o.minutes > 0.0)) throw UsageError("--minutes must be positive");
  json noise_json = json::object();
  for (const auto& kv : o.noise) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--noise expects key=value, got '" + kv + "'");
    double v = 0.0;
    try {
      std::size_t used = 0;
      v = std::stod(kv.substr(eq + 1), &used);
      if (used != kv.size() - eq - 1) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw UsageError("--noise value is not a number: '" + kv + "'");
    }
    noise_json[kv.substr(0, eq)] = v;
  }
  sim::SensorNoiseConfig noise;
  try {
    noise = io::noise_from_json(noise_json);
  } catch (const InvalidInput& e) {
    throw UsageError(e.what());
  }
  const fs::path out(o.out);
  ensure_output_dir(out);

  const json config = {{"subjects", o.subjects}, {"minutes", o.minutes}, {"seed", o.seed},
                       {"noise", io::noise_to_json(noise)}};
  json sessions = json::array();
  std::size_t total = 0;
  for (int i = 0; i < o.subjects; ++i) {
    const sim::SyntheticSubject subject = sim::make_subject(static_cast<std::size_t>(i), o.seed);
    const std::uint64_t session_seed = derive_seed(o.seed, 1000 + static_cast<std::uint64_t>(i));
    const sim::SessionRecording rec = sim::generate_session(subject, noise, o.minutes * 60.0, session_seed);
    const std::string file = subject.id + ".csv";
    io::write_session(out / file, rec);
    sessions.push_back({{"file", file},
                        {"sidecar", subject.id + ".json"},
                        {"subject_id", subject.id},
                        {"arm_span", subject.arm_model.arm_span},
                        {"frames", rec.frames.size()},
                        {"seed", session_seed}});
    total += rec.frames.size();
    std::fprintf(stderr, "simulated %s (%zu frames)\n", subject.id.c_str(), rec.frames.size());
  }
  const json manifest = {{"format_version", io::kFormatVersion},
                         {"kind", "corpus"},
                         {"generator", kToolVersion},
                         {"weight_format_version", nn::kWeightFormatVersion},
                         {"config", config},
                         {"config_hash", io::config_hash(config)},
                         {"seed", o.seed},
                         {"total_frames", total},
                         {"sessions", sessions}};
  io::write_json(out / "manifest.json", manifest);
  std::printf("wrote %d sessions, %zu frames, to %s\n", o.subjects, total, out.string().c_str());
  return 0;
}

int run_train(const TrainOptions& o) {
  validate_train_config(o.config);
  require_dir(o.data, "--data");
  const fs::path out(o.out);
  ensure_output_file(out);
  fs::path loss = o.loss_csv.empty() ? fs::path(out).replace_extension(".loss.csv") : fs::path(o.loss_csv);
  ensure_output_file(loss);

  print_config(o.config);
  const auto corpus = load_corpus(o.data);
  const train::TrainResult r = train::train(corpus, o.config, [](const train::EpochRecord& e) {
    std::printf("epoch %d  uwb_mse %.6f  pose_mpjpe %.6f  total %.6f  val_mpjpe_cm %.3f\n", e.epoch, e.uwb_mse,
                e.pose_mpjpe, e.total, e.val_mpjpe_cm);
    std::fflush(stdout);
  });
  for (const auto& w : r.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());

  const nn::ModelWeights weights = nn::model_cast<float>(r.weights);
  nn::save_weights(out, weights);
  nn::load_weights(out);
  train::write_loss_csv(loss, r.history);

  json data_manifest = json::object();
  if (fs::exists(fs::path(o.data) / "manifest.json")) data_manifest = io::read_json(fs::path(o.data) / "manifest.json");
  const json config = train_config_json(o.config);
  io::write_json(fs::path(out).replace_extension(".train.json"),
                 {{"format_version", io::kFormatVersion},
                  {"kind", "training"},
                  {"generator", kToolVersion},
                  {"weight_format_version", nn::kWeightFormatVersion},
                  {"config", config},
                  {"config_hash", io::config_hash(config)},
                  {"seed", o.config.seed},
                  {"data_config_hash", data_manifest.value("config_hash", "")},
                  {"training_subjects", r.training_subjects},
                  {"validation_subjects", r.validation_subjects},
                  {"best_epoch", r.best_epoch},
                  {"parameters", nn::parameter_count(weights)}});
  std::printf("saved %s (%zu parameters, best epoch %d); loss history in %s\n", out.string().c_str(),
              nn::parameter_count(weights), r.best_epoch, loss.string().c_str());
  return 0;
}

int run_infer(const InferOptions& o) {
  require_file(o.weights, "--weights");
  const bool from_stdin = o.session == "-";
  if (!from_stdin) require_file(o.session, "--session");
  fs::path meta_path = o.meta.empty() ? (from_stdin ? fs::path() : io::sidecar_path(o.session)) : fs::path(o.meta);
  if (meta_path.empty()) throw UsageError("--meta is required when the session is read from standard input");
  require_file(meta_path, "session metadata");
  if (o.out != "-") ensure_output_file(o.out);

  const nn::ModelWeights model = nn::load_weights(o.weights);
  if (model.spec.input_dim != pipeline::kFeatureDim) {
    throw FormatError("weight file expects " + std::to_string(model.spec.input_dim) + " features, sessions provide " +
                      std::to_string(pipeline::kFeatureDim));
  }
  sim::SessionRecording meta;
  io::apply_metadata(io::read_json(meta_path), meta);
  const calib::CalibrationState state = calib::calibrate(meta.calibration);
  const double span = meta.subject.arm_model.arm_span;

  std::ifstream file;
  if (!from_stdin) {
    file.open(o.session, std::ios::binary);
    if (!file) throw FormatError("cannot open " + o.session);
  }
  std::istream& in = from_stdin ? std::cin : file;
  std::ofstream out_file;
  if (o.out != "-") out_file.open(o.out, std::ios::binary | std::ios::trunc);
  std::ostream& out = o.out == "-" ? std::cout : out_file;

  io::SessionCsvReader reader(in);
  std::vector<sim::SessionFrame> buffered;
  if (!o.stream) {
    while (auto f = reader.next()) buffered.push_back(*f);
  }
  std::size_t replay = 0;
  auto next = [&]() -> std::optional<sim::SessionFrame> {
    if (o.stream) return reader.next();
    if (replay < buffered.size()) return buffered[replay++];
    return std::nullopt;
  };

  out << "t,status,pose_t,sx,sy,sz,ex,ey,ez,wx,wy,wz,uwb_corrected_m\n";
  pipeline::RollingBuffer buffer(model.spec.window_len);
  const std::size_t out_idx = model.spec.output_frame_index();
  std::vector<double> latency_ms;
  char line[512];
  while (auto f = next()) {
    const pipeline::FusedFrame fused = pipeline::fuse_frame(*f, state, span);
    const auto window = buffer.push_and_window(fused);
    if (!window) {
      std::snprintf(line, sizeof line, "%.6f,warmup,,,,,,,,,,,\n", f->timestamp);
      out << line;
    } else {
      const auto t0 = std::chrono::steady_clock::now();
      const MatrixF m = Eigen::Map<const MatrixD>(window->values.data(), static_cast<Eigen::Index>(window->length()),
                                                  pipeline::kFeatureDim)
                            .cast<float>();
      const nn::Prediction p = nn::infer_window(model, m);
      latency_ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
      const ArmPose pose = denormalize_pose(p.pose, span);
      std::snprintf(line, sizeof line, "%.6f,pose,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n",
                    f->timestamp, window->timestamps[out_idx], pose.shoulder.x, pose.shoulder.y, pose.shoulder.z,
                    pose.elbow.x, pose.elbow.y, pose.elbow.z, pose.wrist.x, pose.wrist.y, pose.wrist.z,
                    p.uwb_corrected * span);
      out << line;
    }
    if (o.stream) out.flush();
  }
  if (!out) throw FormatError("failed writing inference output");

  if (latency_ms.empty()) {
    std::fprintf(stderr, "latency_ms windows=0 (session shorter than one window)\n");
  } else {
    std::vector<double> sorted = latency_ms;
    std::sort(sorted.begin(), sorted.end());
    const double p95 = sorted[static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(sorted.size()))) - 1];
    std::fprintf(stderr, "latency_ms windows=%zu median=%.3f p95=%.3f max=%.3f\n", sorted.size(),
                 eval::median(sorted), p95, sorted.back());
  }
  return 0;
}

int run_eval(const EvalOptions& o) {
  if (o.stride == 0) throw UsageError("--stride must be positive");
  require_dir(o.data, "--data");
  const bool training = o.loso || o.ablation;
  if (!training) {
    if (o.weights.empty()) throw UsageError("--weights is required unless --loso or --ablation is given");
    require_file(o.weights, "--weights");
  } else {
    validate_train_config(o.config);
  }
  const fs::path out(o.out);
  ensure_output_dir(out);

  const auto corpus = load_corpus(o.data);
  for (const auto& s : corpus) {
    if (!s.has_ground_truth) throw FormatError("session " + s.subject_id + " is missing the ground truth channel");
  }

  if (!training) {
    const nn::ModelWeights model = nn::load_weights(o.weights);
    const eval::EvalResult r = eval::evaluate_model(model, corpus, o.stride);
    write_eval_outputs(r, out, {{"stride", o.stride}});
    print_report("eval", r.report);
    return 0;
  }

  eval::LosoOptions lo;
  lo.stride = o.stride;
  lo.baselines = o.baselines;
  lo.on_epoch = [](std::size_t fold, const std::string& subject, const train::EpochRecord& e) {
    std::fprintf(stderr, "fold %zu (%s) epoch %d  total %.6f  val_mpjpe_cm %.3f\n", fold, subject.c_str(), e.epoch,
                 e.total, e.val_mpjpe_cm);
  };
  const json cfg = {{"train", train_config_json(o.config)}, {"stride", o.stride}};

  auto write_loso = [&](const eval::LosoResult& r, const fs::path& dir) {
    ensure_output_dir(dir);
    for (const auto& f : r.folds) {
      json extra = {{"held_out", f.held_out}, {"isolated", f.isolated}};
      json fold_report = io::eval_report_json(f.eval);
      for (const auto& [k, v] : extra.items()) fold_report[k] = v;
      io::write_json(dir / ("fold_" + f.held_out + ".json"), fold_report);
    }
    json loso = io::loso_to_json(r);
    loso["config"] = cfg;
    loso["config_hash"] = io::config_hash(cfg);
    io::write_json(dir / "loso.json", loso);
    write_eval_outputs(pooled_eval(r), dir, {{"kind", "loso-pooled"}});
  };

  if (o.ablation) {
    const eval::AblationResult r = eval::run_ablation(corpus, o.config, lo);
    write_loso(r.with_uwb, out / "uwb_imu");
    write_loso(r.imu_only, out / "imu_only");
    json a = io::ablation_to_json(r);
    a["config"] = cfg;
    a["config_hash"] = io::config_hash(cfg);
    io::write_json(out / "ablation.json", a);
    print_report("uwb+imu", r.with_uwb.pooled);
    print_report("imu-only", r.imu_only.pooled);
    return 0;
  }
  const eval::LosoResult r = eval::run_loso_cv(corpus, o.config, lo);
  write_loso(r, out);
  for (const auto& f : r.folds) print_report(("fold " + f.held_out).c_str(), f.report);
  print_report("pooled", r.pooled);
  return 0;
}

int run_plot(const PlotOptions& o) {
  require_file(o.report, "--report");
  if (o.out != "-") ensure_output_file(o.out);
  const json report = io::read_json(o.report);
  if (report.is_object() && report.contains("format_version")) io::check_format_version(report, "report");

  std::string svg_text;
  if (o.kind == "cdf") {
    if (!report.contains("cdf") || !report["cdf"].is_object() || report["cdf"].empty()) {
      throw FormatError("report has no CDF data");
    }
    std::vector<std::pair<std::string, eval::CdfCurve>> curves;
    for (const auto& [name, c] : report["cdf"].items()) curves.emplace_back(name, io::cdf_from_json(c));
    svg_text = svg::cdf_plot(curves);
  } else if (o.kind == "heatmap") {
    if (!report.contains("heatmaps") || !report["heatmaps"].is_object() || report["heatmaps"].empty()) throw FormatError("report has no heatmap data");
    svg_text = svg::heatmap_plot(heatmap_panels(report["heatmaps"]), report["heatmaps"].begin()->value("lo", -1.0),
                                 report["heatmaps"].begin()->value("hi", 1.0));
  } else if (o.kind == "uwb-trace") {
    if (!report.contains("uwb_trace")) throw FormatError("report has no UWB trace");
    svg_text = svg::uwb_trace_plot(io::trace_from_json(report["uwb_trace"]));
  } else {
    throw UsageError("unknown plot kind '" + o.kind + "' (expected cdf, heatmap or uwb-trace)");
  }
  if (o.out == "-") {
    std::cout << svg_text;
  } else {
    io::write_text(o.out, svg_text);
  }
  return 0;
}

}  // namespace smartposer::cli
