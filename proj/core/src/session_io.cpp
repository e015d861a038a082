#include "smartposer/session_io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <istream>
#include <sstream>

#include "smartposer/error.hpp"

namespace smartposer::io {
namespace {

using nlohmann::json;

const std::vector<std::string> kBaseColumns = {
    "t",    "uwb_raw", "pq_w", "pq_x", "pq_y", "pq_z", "pa_x", "pa_y", "pa_z",
    "wq_w", "wq_x",    "wq_y", "wq_z", "wa_x", "wa_y", "wa_z"};

const std::vector<std::string> kGtColumns = {
    "t",    "uwb_raw", "uwb_true", "pq_w",  "pq_x",  "pq_y",  "pq_z",  "pa_x",  "pa_y",
    "pa_z", "wq_w",    "wq_x",     "wq_y",  "wq_z",  "wa_x",  "wa_y",  "wa_z",  "gt_sx",
    "gt_sy", "gt_sz",  "gt_ex",    "gt_ey", "gt_ez", "gt_wx", "gt_wy", "gt_wz"};

void put(std::string& out, double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, r.ptr);
}

json vec_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }
json rot_json(const Rot3& r) { return json(r.m); }
json quat_json(const Rot3& r) {
  const UnitQuaternion q = rot_to_quat(r);
  return json::array({q.w(), q.x(), q.y(), q.z()});
}

Vec3 vec_from(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) throw FormatError(std::string(what) + ": expected 3 numbers");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Rot3 rot_from(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 9) throw FormatError(std::string(what) + ": expected 9 numbers");
  Rot3 r;
  for (std::size_t i = 0; i < 9; ++i) r.m[i] = j[i].get<double>();
  if (!is_rotation(r, 1e-6)) throw FormatError(std::string(what) + ": not a rotation matrix");
  return r;
}

Rot3 quat_from(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 4) throw FormatError(std::string(what) + ": expected 4 numbers");
  try {
    return quat_to_rot(UnitQuaternion::from_wxyz(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
                                                 j[3].get<double>()));
  } catch (const InvalidInput& e) {
    throw FormatError(std::string(what) + ": " + e.what());
  }
}

json rot_list(const std::vector<Rot3>& rs) {
  json a = json::array();
  for (const auto& r : rs) a.push_back(quat_json(r));
  return a;
}

std::vector<Rot3> rot_list_from(const json& j, const char* what) {
  if (!j.is_array()) throw FormatError(std::string(what) + ": expected an array");
  std::vector<Rot3> out;
  for (const auto& q : j) out.push_back(quat_from(q, what));
  return out;
}

double parse_double(std::string_view s, std::size_t line, std::size_t col) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw FormatError("session CSV line " + std::to_string(line) + ", column " + std::to_string(col + 1) +
                      ": not a finite number: '" + std::string(s) + "'");
  }
  return v;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t p = line.find(',', start);
    out.push_back(line.substr(start, p == std::string_view::npos ? std::string_view::npos : p - start));
    if (p == std::string_view::npos) break;
    start = p + 1;
  }
  return out;
}

bool getline_trimmed(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) return true;
  }
  return false;
}

}  // namespace

void check_format_version(const json& doc, const std::string& what) {
  if (!doc.is_object() || !doc.contains("format_version") || !doc["format_version"].is_string()) {
    throw FormatError(what + ": missing format_version");
  }
  const std::string v = doc["format_version"].get<std::string>();
  int major = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), major);
  if (r.ec != std::errc() || (r.ptr != v.data() + v.size() && *r.ptr != '.')) {
    throw FormatError(what + ": malformed format_version '" + v + "'");
  }
  if (major > kFormatMajor || major < 1) {
    throw FormatError(what + ": unsupported format_version " + v + " (this build reads " +
                      std::to_string(kFormatMajor) + ".x)");
  }
}

const std::vector<std::string>& session_columns(bool with_ground_truth) {
  return with_ground_truth ? kGtColumns : kBaseColumns;
}

std::filesystem::path sidecar_path(const std::filesystem::path& csv) {
  std::filesystem::path p = csv;
  p.replace_extension(".json");
  return p;
}

json subject_to_json(const sim::SyntheticSubject& s) {
  return {{"id", s.id},
          {"upper_arm_len", s.arm_model.upper_arm_len},
          {"forearm_len", s.arm_model.forearm_len},
          {"arm_span", s.arm_model.arm_span},
          {"shoulder_origin", vec_json(s.arm_model.shoulder_origin)},
          {"phone_anchor", vec_json(s.arm_model.phone_anchor)},
          {"phone_mount_rot", rot_json(s.phone_mount_rot)},
          {"watch_mount_rot", rot_json(s.watch_mount_rot)},
          {"imu_yaw_drift_rate", s.imu_yaw_drift_rate},
          {"phone_reference_yaw", s.phone_reference_yaw},
          {"watch_offset", vec_json(s.watch_offset)},
          {"rng_seed", s.rng_seed}};
}

sim::SyntheticSubject subject_from_json(const json& j) {
  try {
    sim::SyntheticSubject s;
    s.id = j.at("id").get<std::string>();
    s.arm_model.upper_arm_len = j.at("upper_arm_len").get<double>();
    s.arm_model.forearm_len = j.at("forearm_len").get<double>();
    s.arm_model.arm_span = j.at("arm_span").get<double>();
    s.arm_model.shoulder_origin = vec_from(j.at("shoulder_origin"), "shoulder_origin");
    s.arm_model.phone_anchor = vec_from(j.at("phone_anchor"), "phone_anchor");
    s.phone_mount_rot = rot_from(j.at("phone_mount_rot"), "phone_mount_rot");
    s.watch_mount_rot = rot_from(j.at("watch_mount_rot"), "watch_mount_rot");
    s.imu_yaw_drift_rate = j.at("imu_yaw_drift_rate").get<double>();
    s.phone_reference_yaw = j.at("phone_reference_yaw").get<double>();
    s.watch_offset = vec_from(j.at("watch_offset"), "watch_offset");
    s.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    s.validate();
    return s;
  } catch (const json::exception& e) {
    throw FormatError(std::string("subject metadata: ") + e.what());
  } catch (const InvalidInput& e) {
    throw FormatError(std::string("subject metadata: ") + e.what());
  }
}

json noise_to_json(const sim::SensorNoiseConfig& n) {
  return {{"imu_orient_noise_deg", n.imu_orient_noise_deg}, {"imu_accel_noise", n.imu_accel_noise},
          {"uwb_los_noise", n.uwb_los_noise},               {"uwb_nlos_bias_mean", n.uwb_nlos_bias_mean},
          {"uwb_nlos_bias_sigma", n.uwb_nlos_bias_sigma},   {"uwb_ar1_coeff", n.uwb_ar1_coeff},
          {"phone_sway_deg", n.phone_sway_deg}};
}

sim::SensorNoiseConfig noise_from_json(const json& j, sim::SensorNoiseConfig base) {
  if (!j.is_object()) throw InvalidInput("noise config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!value.is_number()) throw InvalidInput("noise key '" + key + "' must be a number");
    const double v = value.get<double>();
    if (key == "imu_orient_noise_deg") base.imu_orient_noise_deg = v;
    else if (key == "imu_accel_noise") base.imu_accel_noise = v;
    else if (key == "uwb_los_noise") base.uwb_los_noise = v;
    else if (key == "uwb_nlos_bias_mean") base.uwb_nlos_bias_mean = v;
    else if (key == "uwb_nlos_bias_sigma") base.uwb_nlos_bias_sigma = v;
    else if (key == "uwb_ar1_coeff") base.uwb_ar1_coeff = v;
    else if (key == "phone_sway_deg") base.phone_sway_deg = v;
    else throw InvalidInput("unknown noise key '" + key + "'");
  }
  base.validate();
  return base;
}

json session_metadata(const sim::SessionRecording& rec) {
  return {{"format_version", kFormatVersion},
          {"subject", subject_to_json(rec.subject)},
          {"noise", noise_to_json(rec.noise)},
          {"seed", rec.seed},
          {"imu_rate", rec.imu_rate},
          {"uwb_rate", rec.uwb_rate},
          {"frames", rec.frames.size()},
          {"has_ground_truth", rec.has_ground_truth},
          {"calibration",
           {{"side_by_side_phone", rot_list(rec.calibration.side_by_side_phone)},
            {"side_by_side_watch", rot_list(rec.calibration.side_by_side_watch)},
            {"tpose_phone", rot_list(rec.calibration.tpose_phone)},
            {"tpose_watch", rot_list(rec.calibration.tpose_watch)}}}};
}

void apply_metadata(const json& meta, sim::SessionRecording& rec) {
  check_format_version(meta, "session metadata");
  try {
    rec.subject = subject_from_json(meta.at("subject"));
    rec.noise = noise_from_json(meta.at("noise"));
    rec.seed = meta.at("seed").get<std::uint64_t>();
    rec.imu_rate = meta.at("imu_rate").get<double>();
    rec.uwb_rate = meta.at("uwb_rate").get<double>();
    const json& c = meta.at("calibration");
    rec.calibration.side_by_side_phone = rot_list_from(c.at("side_by_side_phone"), "side_by_side_phone");
    rec.calibration.side_by_side_watch = rot_list_from(c.at("side_by_side_watch"), "side_by_side_watch");
    rec.calibration.tpose_phone = rot_list_from(c.at("tpose_phone"), "tpose_phone");
    rec.calibration.tpose_watch = rot_list_from(c.at("tpose_watch"), "tpose_watch");
  } catch (const json::exception& e) {
    throw FormatError(std::string("session metadata: ") + e.what());
  } catch (const InvalidInput& e) {
    throw FormatError(std::string("session metadata: ") + e.what());
  }
  if (rec.imu_rate != sim::kImuRateHz) throw FormatError("session metadata: imu_rate must be 25");
}

void write_session_csv(std::ostream& out, const sim::SessionRecording& rec) {
  const auto& cols = session_columns(rec.has_ground_truth);
  std::string line;
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (i) line += ',';
    line += cols[i];
  }
  out << line << '\n';
  for (const auto& f : rec.frames) {
    line.clear();
    std::vector<double> v{f.timestamp, f.uwb_raw};
    if (rec.has_ground_truth) v.push_back(f.uwb_true);
    const UnitQuaternion pq = rot_to_quat(f.phone_orient);
    const UnitQuaternion wq = rot_to_quat(f.watch_orient);
    v.insert(v.end(), {pq.w(), pq.x(), pq.y(), pq.z(), f.phone_accel.x, f.phone_accel.y, f.phone_accel.z,
                       wq.w(), wq.x(), wq.y(), wq.z(), f.watch_accel.x, f.watch_accel.y, f.watch_accel.z});
    if (rec.has_ground_truth) {
      for (const Vec3* p : {&f.gt_pose.shoulder, &f.gt_pose.elbow, &f.gt_pose.wrist}) {
        v.insert(v.end(), {p->x, p->y, p->z});
      }
    }
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) line += ',';
      put(line, v[i]);
    }
    out << line << '\n';
  }
  if (!out) throw FormatError("failed writing session CSV");
}

void write_session(const std::filesystem::path& csv, const sim::SessionRecording& rec) {
  std::ofstream out(csv, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + csv.string() + " for writing");
  write_session_csv(out, rec);
  write_json(sidecar_path(csv), session_metadata(rec));
}

SessionCsvReader::SessionCsvReader(std::istream& in) : in_(in) {
  std::string header;
  if (!getline_trimmed(in_, header)) throw FormatError("session CSV is empty");
  std::vector<std::string> cols;
  for (auto c : split(header)) cols.emplace_back(c);
  if (cols == kGtColumns) {
    with_gt_ = true;
  } else if (cols == kBaseColumns) {
    with_gt_ = false;
  } else {
    throw FormatError("session CSV header does not match the expected schema (" + header + ")");
  }
}

std::optional<sim::SessionFrame> SessionCsvReader::next() {
  std::string line;
  if (!getline_trimmed(in_, line)) return std::nullopt;
  ++line_;
  const auto cells = split(line);
  const std::size_t expected = session_columns(with_gt_).size();
  if (cells.size() != expected) {
    throw FormatError("session CSV line " + std::to_string(line_) + ": expected " + std::to_string(expected) +
                      " fields, found " + std::to_string(cells.size()));
  }
  std::vector<double> v(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) v[i] = parse_double(cells[i], line_, i);

  sim::SessionFrame f;
  std::size_t k = 0;
  f.timestamp = v[k++];
  f.uwb_raw = v[k++];
  if (with_gt_) f.uwb_true = v[k++];
  try {
    f.phone_orient = quat_to_rot(UnitQuaternion::from_wxyz(v[k], v[k + 1], v[k + 2], v[k + 3]));
    k += 4;
    f.phone_accel = {v[k], v[k + 1], v[k + 2]};
    k += 3;
    f.watch_orient = quat_to_rot(UnitQuaternion::from_wxyz(v[k], v[k + 1], v[k + 2], v[k + 3]));
    k += 4;
  } catch (const InvalidInput& e) {
    throw FormatError("session CSV line " + std::to_string(line_) + ": " + e.what());
  }
  f.watch_accel = {v[k], v[k + 1], v[k + 2]};
  k += 3;
  if (with_gt_) {
    f.gt_pose.shoulder = {v[k], v[k + 1], v[k + 2]};
    f.gt_pose.elbow = {v[k + 3], v[k + 4], v[k + 5]};
    f.gt_pose.wrist = {v[k + 6], v[k + 7], v[k + 8]};
  }
  if (f.uwb_raw < 0.0) throw FormatError("session CSV line " + std::to_string(line_) + ": negative uwb_raw");
  return f;
}

sim::SessionRecording read_session(std::istream& csv, const json& meta) {
  sim::SessionRecording rec;
  apply_metadata(meta, rec);
  SessionCsvReader reader(csv);
  rec.has_ground_truth = reader.has_ground_truth();
  while (auto f = reader.next()) rec.frames.push_back(*f);
  try {
    rec.validate();
  } catch (const InvalidInput& e) {
    throw FormatError(std::string("session: ") + e.what());
  }
  return rec;
}

sim::SessionRecording read_session(const std::filesystem::path& csv) {
  std::ifstream in(csv, std::ios::binary);
  if (!in) throw FormatError("cannot open session " + csv.string());
  const json meta = read_json(sidecar_path(csv));
  try {
    return read_session(in, meta);
  } catch (const FormatError& e) {
    throw FormatError(csv.filename().string() + ": " + e.what());
  }
}

std::vector<std::filesystem::path> list_sessions(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw FormatError("not a directory: " + dir.string());
  std::vector<fs::path> out;
  const fs::path manifest = dir / "manifest.json";
  if (fs::exists(manifest)) {
    const json m = read_json(manifest);
    check_format_version(m, "manifest");
    try {
      for (const auto& s : m.at("sessions")) out.push_back(dir / s.at("file").get<std::string>());
    } catch (const json::exception& e) {
      throw FormatError(std::string("manifest: ") + e.what());
    }
  } else {
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.path().extension() == ".csv" && fs::exists(sidecar_path(e.path()))) out.push_back(e.path());
    }
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw FormatError("no sessions found in " + dir.string());
  return out;
}

std::string config_hash(const json& config) {
  const std::string s = config.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const json& doc) {
  write_text(path, doc.dump(2) + "\n");
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw FormatError("failed writing " + path.string());
}

}  // namespace smartposer::io
