#pragma once

// On-disk session format: one CSV of synchronized 25 Hz frames plus a JSON
// sidecar (same stem, .json) holding subject metadata, noise settings and the
// calibration capture. Corpus directories also carry a manifest.json.
//
// CSV columns:
//   t,uwb_raw,uwb_true,pq_w,pq_x,pq_y,pq_z,pa_x,pa_y,pa_z,
//   wq_w,wq_x,wq_y,wq_z,wa_x,wa_y,wa_z,gt_sx,gt_sy,gt_sz,gt_ex,gt_ey,gt_ez,gt_wx,gt_wy,gt_wz
// uwb_true and the gt_* columns may be omitted together (inference-only
// sessions).

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "smartposer/simulator.hpp"

namespace smartposer::io {

inline constexpr const char* kFormatVersion = "1.0";
inline constexpr int kFormatMajor = 1;

// Throws FormatError when `version` is malformed or its major part is newer
// than kFormatMajor.
void check_format_version(const nlohmann::json& doc, const std::string& what);

const std::vector<std::string>& session_columns(bool with_ground_truth = true);

// Sidecar path for a session CSV: same stem with a .json extension.
std::filesystem::path sidecar_path(const std::filesystem::path& csv);

nlohmann::json subject_to_json(const sim::SyntheticSubject& s);
sim::SyntheticSubject subject_from_json(const nlohmann::json& j);
nlohmann::json noise_to_json(const sim::SensorNoiseConfig& n);
// Unknown keys are rejected with InvalidInput.
sim::SensorNoiseConfig noise_from_json(const nlohmann::json& j, sim::SensorNoiseConfig base = {});

// Everything in a recording except the frames.
nlohmann::json session_metadata(const sim::SessionRecording& rec);
// Fills subject, noise, seed, rates and calibration. Throws FormatError.
void apply_metadata(const nlohmann::json& meta, sim::SessionRecording& rec);

void write_session_csv(std::ostream& out, const sim::SessionRecording& rec);
void write_session(const std::filesystem::path& csv, const sim::SessionRecording& rec);

// Incremental CSV reader for streaming replay.
class SessionCsvReader {
 public:
  // Reads and validates the header. Throws FormatError on a schema mismatch.
  explicit SessionCsvReader(std::istream& in);

  bool has_ground_truth() const { return with_gt_; }
  // Next frame, or nullopt at end of input. Throws FormatError on a malformed
  // row.
  std::optional<sim::SessionFrame> next();
  std::size_t line() const { return line_; }

 private:
  std::istream& in_;
  bool with_gt_ = true;
  std::size_t line_ = 1;
};

// Reads the CSV and its sidecar. Throws FormatError.
sim::SessionRecording read_session(const std::filesystem::path& csv);
sim::SessionRecording read_session(std::istream& csv, const nlohmann::json& meta);

// Session CSVs listed in `dir`/manifest.json (or every *.csv with a sidecar
// when there is no manifest), in sorted order.
std::vector<std::filesystem::path> list_sessions(const std::filesystem::path& dir);

// FNV-1a of the canonical JSON dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& config);

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& doc);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace smartposer::io
