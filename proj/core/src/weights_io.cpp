#include "smartposer/weights_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <string>

#include <zlib.h>

#include "smartposer/error.hpp"

namespace smartposer::nn {
namespace {

constexpr std::uint8_t kMagic[4] = {'S', 'P', 'W', 'V'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  std::vector<std::uint8_t>& buffer() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint8_t u8() {
    need(1);
    return in_[pos_++];
  }
  std::uint16_t u16() {
    need(2);
    const auto v = static_cast<std::uint16_t>(in_[pos_] | (in_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw FormatError("weight file truncated");
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

std::vector<float> spec_values(const ModelSpec& s) {
  return {static_cast<float>(s.input_dim),        static_cast<float>(s.corrector_layers),
          static_cast<float>(s.corrector_hidden), static_cast<float>(s.estimator_layers),
          static_cast<float>(s.estimator_hidden), static_cast<float>(s.pose_dim),
          static_cast<float>(s.window_len),       static_cast<float>(s.output_frame_lag),
          s.use_uwb ? 1.0f : 0.0f};
}

ModelSpec spec_from_values(std::span<const float> v) {
  if (v.size() != 9) throw FormatError("spec tensor must hold 9 values");
  for (float x : v) {
    if (!(x >= 0.0f) || x != static_cast<float>(static_cast<std::uint32_t>(x))) {
      throw FormatError("spec tensor holds a non-integer value");
    }
  }
  ModelSpec s;
  s.input_dim = static_cast<std::uint32_t>(v[0]);
  s.corrector_layers = static_cast<std::uint32_t>(v[1]);
  s.corrector_hidden = static_cast<std::uint32_t>(v[2]);
  s.estimator_layers = static_cast<std::uint32_t>(v[3]);
  s.estimator_hidden = static_cast<std::uint32_t>(v[4]);
  s.pose_dim = static_cast<std::uint32_t>(v[5]);
  s.window_len = static_cast<std::uint32_t>(v[6]);
  s.output_frame_lag = static_cast<std::uint32_t>(v[7]);
  s.use_uwb = v[8] != 0.0f;
  return s;
}

void write_tensor(Writer& w, const std::string& name, const Tensor& t) {
  if (name.size() > 0xFFFF) throw InvalidInput("tensor name too long");
  if (t.rank() > 0xFF) throw InvalidInput("tensor rank too large");
  w.u16(static_cast<std::uint16_t>(name.size()));
  w.bytes(name.data(), name.size());
  w.u8(static_cast<std::uint8_t>(t.rank()));
  for (std::uint32_t d : t.dims()) w.u32(d);
  for (float v : t.data()) w.f32(v);
}

}  // namespace

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  std::size_t off = 0;
  while (off < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - off, 1u << 30));
    crc = ::crc32(crc, bytes.data() + off, chunk);
    off += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::vector<std::uint8_t> encode_weights(const ModelWeights& weights) {
  validate_model(weights);
  const auto tensors = named_tensors(weights);
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.u32(kWeightFormatVersion);
  w.u32(static_cast<std::uint32_t>(tensors.size() + 1));
  const std::vector<float> spec = spec_values(weights.spec);
  write_tensor(w, kSpecTensorName, Tensor({static_cast<std::uint32_t>(spec.size())}, spec));
  for (const auto& nt : tensors) write_tensor(w, nt.name, *nt.tensor);
  const std::uint32_t crc = crc32(w.buffer());
  w.u32(crc);
  return std::move(w.buffer());
}

ModelWeights decode_weights(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError("weight file: bad magic (expected SPWV)");
  }
  if (bytes.size() < 16) throw FormatError("weight file truncated");
  const std::span<const std::uint8_t> body = bytes.first(bytes.size() - 4);
  Reader tail(bytes.last(4));
  if (crc32(body) != tail.u32()) throw FormatError("weight file: CRC mismatch");

  Reader r(body);
  r.str(4);
  const std::uint32_t version = r.u32();
  if (version > kWeightFormatVersion || version == 0) {
    throw FormatError("weight file: unsupported version " + std::to_string(version));
  }
  const std::uint32_t count = r.u32();

  std::map<std::string, Tensor> records;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint16_t name_len = r.u16();
    std::string name = r.str(name_len);
    const std::uint8_t rank = r.u8();
    Tensor::Dims dims(rank);
    std::size_t n = 1;
    for (auto& d : dims) {
      d = r.u32();
      n *= d;
      if (n > r.remaining() / 4) throw FormatError("weight file truncated in tensor '" + name + "'");
    }
    std::vector<float> data(n);
    for (auto& v : data) v = r.f32();
    if (!records.emplace(name, Tensor(std::move(dims), std::move(data))).second) {
      throw FormatError("weight file: duplicate tensor '" + name + "'");
    }
  }
  if (r.remaining() != 0) throw FormatError("weight file: tensor count does not match contents");

  const auto spec_it = records.find(kSpecTensorName);
  if (spec_it == records.end()) throw FormatError("weight file: missing spec tensor");
  ModelWeights model;
  try {
    model = make_model<float>(spec_from_values(spec_it->second.data()));
  } catch (const InvalidInput& e) {
    throw FormatError(std::string("weight file: invalid spec: ") + e.what());
  }
  records.erase(spec_it);

  for (auto& nt : named_tensors(model)) {
    auto it = records.find(nt.name);
    if (it == records.end()) throw FormatError("weight file: missing tensor '" + nt.name + "'");
    if (it->second.dims() != nt.tensor->dims()) {
      throw FormatError("weight file: tensor '" + nt.name + "' has the wrong shape");
    }
    *nt.tensor = std::move(it->second);
    records.erase(it);
  }
  if (!records.empty()) throw FormatError("weight file: unexpected tensor '" + records.begin()->first + "'");
  try {
    validate_model(model);
  } catch (const InvalidInput& e) {
    throw FormatError(std::string("weight file: ") + e.what());
  }
  // Bookkeeping sanity for the deployed architecture: total parameters must
  // land in the expected ~46k band.
  ModelSpec standard;
  standard.use_uwb = model.spec.use_uwb;
  if (model.spec == standard) {
    const std::size_t n = parameter_count(model);
    if (n < kMinStandardParameters || n > kMaxStandardParameters) {
      throw FormatError("weight file: parameter count " + std::to_string(n) + " outside the expected range");
    }
  }
  return model;
}

void save_weights(const std::filesystem::path& path, const ModelWeights& weights) {
  const std::vector<std::uint8_t> bytes = encode_weights(weights);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("failed writing " + path.string());
}

ModelWeights load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_weights(bytes);
}

}  // namespace smartposer::nn
