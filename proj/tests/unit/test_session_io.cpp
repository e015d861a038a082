#include <doctest.h>

#include <filesystem>
#include <sstream>
#include <string>

#include "smartposer/error.hpp"
#include "smartposer/session_features.hpp"
#include "smartposer/session_io.hpp"
#include "smartposer/simulator.hpp"

using namespace smartposer;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

sim::SessionRecording small_session(double seconds = 4.0) {
  return sim::generate_session(sim::make_subject(0, 11), {}, seconds, 99);
}

double rot_gap(const Rot3& a, const Rot3& b) {
  double m = 0.0;
  for (int i = 0; i < 9; ++i) m = std::max(m, std::abs(a.m[i] - b.m[i]));
  return m;
}

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / "smartposer_session_io_test") {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("CSV round trip keeps every channel") {
  const auto rec = small_session();
  std::stringstream ss;
  io::write_session_csv(ss, rec);
  const auto back = io::read_session(ss, io::session_metadata(rec));
  REQUIRE(back.frames.size() == rec.frames.size());
  CHECK(back.subject.id == rec.subject.id);
  CHECK(back.seed == rec.seed);
  CHECK(back.calibration.tpose_watch.size() == rec.calibration.tpose_watch.size());
  for (std::size_t i = 0; i < rec.frames.size(); ++i) {
    const auto& a = rec.frames[i];
    const auto& b = back.frames[i];
    CHECK(a.timestamp == b.timestamp);
    CHECK(a.uwb_raw == b.uwb_raw);
    CHECK(a.uwb_true == b.uwb_true);
    CHECK(a.watch_accel == b.watch_accel);
    CHECK(a.gt_pose.wrist == b.gt_pose.wrist);
    CHECK(rot_gap(a.watch_orient, b.watch_orient) < 1e-14);
    CHECK(rot_gap(a.phone_orient, b.phone_orient) < 1e-14);
  }
  const auto fa = pipeline::session_features(rec);
  const auto fb = pipeline::session_features(back);
  CHECK((fa.features - fb.features).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("header schema") {
  const auto rec = small_session(1.0);
  std::stringstream ss;
  io::write_session_csv(ss, rec);
  std::string header;
  std::getline(ss, header);
  CHECK(header.rfind("t,uwb_raw,uwb_true,pq_w", 0) == 0);
  CHECK(io::session_columns(true).size() == 26);
  CHECK(io::session_columns(false).size() == 16);

  std::stringstream bad("t,uwb_raw,oops\n0,1,2\n");
  CHECK_THROWS_AS(io::SessionCsvReader{bad}, FormatError);
  std::stringstream empty("");
  CHECK_THROWS_AS(io::SessionCsvReader{empty}, FormatError);
}

TEST_CASE("sessions without ground truth") {
  auto rec = small_session(1.0);
  rec.has_ground_truth = false;
  std::stringstream ss;
  io::write_session_csv(ss, rec);
  io::SessionCsvReader reader(ss);
  CHECK_FALSE(reader.has_ground_truth());
  std::size_t n = 0;
  while (reader.next()) ++n;
  CHECK(n == rec.frames.size());
}

TEST_CASE("malformed rows name their line") {
  const auto rec = small_session(1.0);
  std::stringstream ss;
  io::write_session_csv(ss, rec);
  std::string text = ss.str();
  const auto third_line = text.find('\n', text.find('\n', text.find('\n') + 1) + 1) + 1;

  std::string short_row = text;
  short_row.insert(third_line, "1,2,3\n");
  std::stringstream a(short_row);
  CHECK_THROWS_WITH_AS(io::read_session(a, io::session_metadata(rec)), doctest::Contains("line 4"), FormatError);

  std::string junk = text;
  junk.replace(third_line, 1, "x");
  std::stringstream b(junk);
  CHECK_THROWS_AS(io::read_session(b, io::session_metadata(rec)), FormatError);

  // Dropping a row breaks the 25 Hz spacing.
  std::string gap = text;
  const auto end_of_third = gap.find('\n', third_line);
  gap.erase(third_line, end_of_third - third_line + 1);
  std::stringstream c(gap);
  CHECK_THROWS_AS(io::read_session(c, io::session_metadata(rec)), FormatError);
}

TEST_CASE("metadata versioning") {
  const auto rec = small_session(1.0);
  json meta = io::session_metadata(rec);
  CHECK(meta["format_version"] == "1.0");
  CHECK_NOTHROW(io::check_format_version(meta, "x"));
  meta["format_version"] = "1.7";
  CHECK_NOTHROW(io::check_format_version(meta, "x"));
  meta["format_version"] = "2.0";
  CHECK_THROWS_WITH_AS(io::check_format_version(meta, "x"), doctest::Contains("unsupported"), FormatError);
  meta["format_version"] = "abc";
  CHECK_THROWS_AS(io::check_format_version(meta, "x"), FormatError);
  meta.erase("format_version");
  CHECK_THROWS_AS(io::check_format_version(meta, "x"), FormatError);

  json wrong_rate = io::session_metadata(rec);
  wrong_rate["imu_rate"] = 50.0;
  sim::SessionRecording r;
  CHECK_THROWS_AS(io::apply_metadata(wrong_rate, r), FormatError);
}

TEST_CASE("subject and noise JSON") {
  const auto s = sim::make_subject(3, 5);
  const auto back = io::subject_from_json(io::subject_to_json(s));
  CHECK(back.id == s.id);
  CHECK(back.arm_model.upper_arm_len == s.arm_model.upper_arm_len);
  CHECK(rot_gap(back.watch_mount_rot, s.watch_mount_rot) < 1e-15);

  sim::SensorNoiseConfig n;
  const auto nb = io::noise_from_json(io::noise_to_json(n));
  CHECK(io::noise_to_json(nb) == io::noise_to_json(n));
  CHECK_THROWS_AS(io::noise_from_json(json{{"no_such_key", 1.0}}), InvalidInput);
  CHECK_THROWS_AS(io::noise_from_json(json{{"uwb_los_noise", "big"}}), InvalidInput);
}

TEST_CASE("corpus directory listing") {
  TempDir dir;
  CHECK_THROWS_AS(io::list_sessions(dir.path), FormatError);
  CHECK_THROWS_AS(io::list_sessions(dir.path / "nope"), FormatError);
  const auto rec = small_session(1.0);
  io::write_session(dir.path / "b.csv", rec);
  io::write_session(dir.path / "a.csv", rec);
  const auto listed = io::list_sessions(dir.path);
  REQUIRE(listed.size() == 2);
  CHECK(listed[0].filename() == "a.csv");
  CHECK(fs::exists(io::sidecar_path(listed[0])));
  CHECK(io::read_session(listed[1]).frames.size() == rec.frames.size());

  io::write_json(dir.path / "manifest.json",
                 json{{"format_version", "1.0"}, {"sessions", json::array({json{{"file", "b.csv"}}})}});
  CHECK(io::list_sessions(dir.path).size() == 1);
}

TEST_CASE("config hash") {
  const json a{{"x", 1}, {"y", "z"}};
  const json b{{"y", "z"}, {"x", 1}};
  CHECK(io::config_hash(a) == io::config_hash(b));
  CHECK(io::config_hash(a).size() == 16);
  CHECK(io::config_hash(a) != io::config_hash(json{{"x", 2}, {"y", "z"}}));
  // FNV-1a 64 of the empty string is its offset basis.
  CHECK(io::config_hash(json::parse("\"\"")) != io::config_hash(json::object()));
}
