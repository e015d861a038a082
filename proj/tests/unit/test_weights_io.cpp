#include <doctest.h>

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "smartposer/error.hpp"
#include "smartposer/train.hpp"
#include "smartposer/weights_io.hpp"

using namespace smartposer;
using namespace smartposer::nn;

namespace {

// Bitwise reflected CRC-32 (polynomial 0xEDB88320), no table.
std::uint32_t crc_oracle(const std::vector<std::uint8_t>& b, std::size_t n) {
  std::uint32_t c = 0xFFFFFFFFu;
  for (std::size_t i = 0; i < n; ++i) {
    c ^= b[i];
    for (int k = 0; k < 8; ++k) c = (c >> 1) ^ (0xEDB88320u & (0u - (c & 1u)));
  }
  return ~c;
}

void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void set_u32(std::vector<std::uint8_t>& b, std::size_t at, std::uint32_t v) {
  REQUIRE(at + 4 <= b.size());
  for (int i = 0; i < 4; ++i) b[at + static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(v >> (8 * i));
}

void reseal(std::vector<std::uint8_t>& b) { set_u32(b, b.size() - 4, crc_oracle(b, b.size() - 4)); }

void put_tensor(std::vector<std::uint8_t>& b, const std::string& name, const std::vector<std::uint32_t>& dims,
                const std::vector<float>& values) {
  b.push_back(static_cast<std::uint8_t>(name.size()));
  b.push_back(static_cast<std::uint8_t>(name.size() >> 8));
  b.insert(b.end(), name.begin(), name.end());
  b.push_back(static_cast<std::uint8_t>(dims.size()));
  for (auto d : dims) put_u32(b, d);
  for (float v : values) put_u32(b, std::bit_cast<std::uint32_t>(v));
}

ModelWeights random_model(ModelSpec spec = {}, std::uint64_t seed = 7) {
  return model_cast<float>(train::init_model(spec, seed));
}

bool bit_equal(const ModelWeights& a, const ModelWeights& b) {
  const auto ta = named_tensors(a);
  const auto tb = named_tensors(b);
  if (ta.size() != tb.size() || !(a.spec == b.spec)) return false;
  for (std::size_t i = 0; i < ta.size(); ++i) {
    if (ta[i].name != tb[i].name || ta[i].tensor->dims() != tb[i].tensor->dims()) return false;
    const auto& x = ta[i].tensor->data();
    const auto& y = tb[i].tensor->data();
    if (x.size() != y.size() || std::memcmp(x.data(), y.data(), x.size() * sizeof(float)) != 0) return false;
  }
  return true;
}

// Byte offset just past the header and the spec record.
std::size_t first_parameter_record(const std::vector<std::uint8_t>& b) {
  std::size_t pos = 12;
  const std::size_t name_len = b[pos] | (b[pos + 1] << 8);
  pos += 2 + name_len;
  const std::size_t rank = b[pos++];
  std::size_t n = 1;
  for (std::size_t k = 0; k < rank; ++k) {
    n *= b[pos] | (b[pos + 1] << 8) | (b[pos + 2] << 16) | (static_cast<std::size_t>(b[pos + 3]) << 24);
    pos += 4;
  }
  return pos + 4 * n;
}

}  // namespace

TEST_CASE("crc32 matches the reference polynomial") {
  const std::string s = "123456789";
  const std::vector<std::uint8_t> b(s.begin(), s.end());
  CHECK(crc32(b) == 0xCBF43926u);
  CHECK(crc_oracle(b, b.size()) == 0xCBF43926u);
  CHECK(crc32({}) == 0u);
}

TEST_CASE("round trip is bit exact") {
  const ModelWeights m = random_model();
  const auto bytes = encode_weights(m);
  CHECK(bit_equal(decode_weights(bytes), m));
  CHECK(encode_weights(decode_weights(bytes)) == bytes);

  const ModelWeights imu = random_model(ModelSpec{.use_uwb = false});
  CHECK(bit_equal(decode_weights(encode_weights(imu)), imu));

  const auto dir = std::filesystem::temp_directory_path() / "smartposer_weights_io_test";
  std::filesystem::create_directories(dir);
  save_weights(dir / "w.spw", m);
  CHECK(bit_equal(load_weights(dir / "w.spw"), m));
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(load_weights(dir / "missing.spw"), FormatError);
}

TEST_CASE("encoder output equals a file assembled by hand") {
  const ModelWeights m = random_model();
  std::vector<std::uint8_t> b{'S', 'P', 'W', 'V'};
  put_u32(b, 1);
  const auto tensors = named_tensors(m);
  put_u32(b, static_cast<std::uint32_t>(tensors.size() + 1));
  put_tensor(b, "spec", {9}, {25, 2, 8, 2, 32, 9, 125, 5, 1});
  for (const auto& t : tensors) {
    const std::vector<float> v(t.tensor->data().begin(), t.tensor->data().end());
    put_tensor(b, t.name, t.tensor->dims(), v);
  }
  put_u32(b, crc_oracle(b, b.size()));
  CHECK(encode_weights(m) == b);
}

TEST_CASE("corrupted files are rejected") {
  const auto good = encode_weights(random_model());

  auto magic = good;
  magic[0] = 'X';
  CHECK_THROWS_AS(decode_weights(magic), FormatError);

  auto flipped = good;
  flipped[good.size() / 2] ^= 0x01;
  CHECK_THROWS_WITH_AS(decode_weights(flipped), doctest::Contains("CRC"), FormatError);

  auto newer = good;
  set_u32(newer, 4, 2);
  reseal(newer);
  CHECK_THROWS_WITH_AS(decode_weights(newer), doctest::Contains("version"), FormatError);

  auto zero_version = good;
  set_u32(zero_version, 4, 0);
  reseal(zero_version);
  CHECK_THROWS_AS(decode_weights(zero_version), FormatError);

  auto more = good;
  const std::uint32_t count = more[8] | (more[9] << 8);
  set_u32(more, 8, count + 1);
  reseal(more);
  CHECK_THROWS_AS(decode_weights(more), FormatError);

  auto fewer = good;
  set_u32(fewer, 8, count - 1);
  reseal(fewer);
  CHECK_THROWS_AS(decode_weights(fewer), FormatError);

  // Truncation at every header boundary and mid-record.
  for (std::size_t n : {std::size_t{0}, std::size_t{3}, std::size_t{8}, std::size_t{15}, good.size() / 3,
                        good.size() - 1}) {
    std::vector<std::uint8_t> cut(good.begin(), good.begin() + static_cast<std::ptrdiff_t>(n));
    CHECK_THROWS_AS(decode_weights(cut), FormatError);
    if (cut.size() >= 16) {
      cut.resize(cut.size() + 4);
      reseal(cut);
      CHECK_THROWS_AS(decode_weights(cut), FormatError);
    }
  }

  auto trailing = good;
  trailing.insert(trailing.end() - 4, {0, 0, 0, 0});
  reseal(trailing);
  CHECK_THROWS_AS(decode_weights(trailing), FormatError);
}

TEST_CASE("record-level errors") {
  const auto good = encode_weights(random_model());
  const std::size_t first = first_parameter_record(good);
  const std::size_t name_len = good[first] | (good[first + 1] << 8);
  const std::string first_name(good.begin() + static_cast<std::ptrdiff_t>(first + 2),
                               good.begin() + static_cast<std::ptrdiff_t>(first + 2 + name_len));
  CHECK(first_name == "corrector.l0.fwd.w_input");

  // Rename the first parameter tensor to the spec name: duplicate record.
  std::vector<std::uint8_t> renamed(good.begin(), good.begin() + static_cast<std::ptrdiff_t>(first));
  put_tensor(renamed, "spec", {9}, {25, 2, 8, 2, 32, 9, 125, 5, 1});
  renamed.insert(renamed.end(), good.begin() + static_cast<std::ptrdiff_t>(first), good.end());
  set_u32(renamed, 8, (good[8] | (good[9] << 8)) + 1);
  reseal(renamed);
  CHECK_THROWS_WITH_AS(decode_weights(renamed), doctest::Contains("duplicate"), FormatError);

  // Same-length rename: the expected tensor goes missing.
  auto unknown = good;
  unknown[first + 2] = 'X';
  reseal(unknown);
  CHECK_THROWS_AS(decode_weights(unknown), FormatError);

  // A spec tensor that disagrees with the stored shapes.
  auto mismatch = good;
  const float wrong = 16.0f;
  std::uint32_t bits = std::bit_cast<std::uint32_t>(wrong);
  const std::size_t spec_values = 12 + 2 + 4 + 1 + 4;
  set_u32(mismatch, spec_values + 2 * 4, bits);
  reseal(mismatch);
  CHECK_THROWS_AS(decode_weights(mismatch), FormatError);

  // A non-integer spec entry.
  auto fractional = good;
  bits = std::bit_cast<std::uint32_t>(2.5f);
  set_u32(fractional, spec_values + 1 * 4, bits);
  reseal(fractional);
  CHECK_THROWS_AS(decode_weights(fractional), FormatError);
}

TEST_CASE("parameter count guard applies to the standard architecture only") {
  const ModelWeights std_model = random_model();
  CHECK(parameter_count(std_model) == 44058);
  CHECK(parameter_count(std_model) >= kMinStandardParameters);
  CHECK(parameter_count(std_model) <= kMaxStandardParameters);
  ModelSpec small;
  small.estimator_hidden = 4;
  small.corrector_hidden = 2;
  const ModelWeights s = random_model(small);
  CHECK(parameter_count(s) < kMinStandardParameters);
  CHECK(bit_equal(decode_weights(encode_weights(s)), s));
}

TEST_CASE("non-finite weights cannot be saved") {
  ModelWeights m = random_model();
  m.estimator.head_bias.data()[0] = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS(encode_weights(m));

  auto bytes = encode_weights(random_model());
  const std::size_t first = first_parameter_record(bytes);
  const std::size_t name_len = bytes[first] | (bytes[first + 1] << 8);
  const std::size_t value0 = first + 2 + name_len + 1 + 2 * 4;
  set_u32(bytes, value0, std::bit_cast<std::uint32_t>(std::numeric_limits<float>::infinity()));
  reseal(bytes);
  CHECK_THROWS_AS(decode_weights(bytes), FormatError);
}
