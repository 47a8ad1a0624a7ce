#include "retina/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "retina/errors.hpp"

namespace retina {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'R', 'K', 'C', 'K'};

class Writer {
 public:
  template <typename U>
  void put(U value) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
    bytes.insert(bytes.end(), p, p + sizeof(U));
  }
  void put_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    bytes.insert(bytes.end(), p, p + n);
  }
  void put_tensor(const std::string& name, const Tensor& t) {
    if (name.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw InvalidInput("checkpoint: tensor name too long");
    }
    put(static_cast<std::uint16_t>(name.size()));
    put_bytes(name.data(), name.size());
    put(static_cast<std::uint8_t>(t.rank()));
    for (std::size_t d : t.shape()) put(static_cast<std::uint32_t>(d));
    put_bytes(t.data().data(), t.size() * sizeof(float));
  }

  std::vector<std::uint8_t> bytes;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  template <typename U>
  U get() {
    need(sizeof(U));
    U value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(U));
    pos_ += sizeof(U);
    return value;
  }
  std::string get_string(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  Tensor get_tensor(std::string& name) {
    name = get_string(get<std::uint16_t>());
    const auto rank = get<std::uint8_t>();
    Shape shape;
    for (std::uint8_t i = 0; i < rank; ++i) shape.push_back(get<std::uint32_t>());
    const std::size_t count = shape_volume(shape);
    need(count * sizeof(float));
    std::vector<float> data(count);
    std::memcpy(data.data(), bytes_.data() + pos_, count * sizeof(float));
    pos_ += count * sizeof(float);
    return Tensor(std::move(shape), std::move(data));
  }
  std::size_t position() const { return pos_; }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw ParseError(ParseError::Kind::kTruncated, pos_, "checkpoint truncated");
    }
  }

  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ck) {
  const auto& p = ck.params;
  if (ck.adam.m.size() != p.size() || ck.adam.v.size() != p.size()) {
    throw InvalidInput("checkpoint: optimizer state does not match parameters");
  }
  Writer w;
  w.put_bytes(kMagic, 4);
  w.put(kCheckpointVersion);
  w.put(static_cast<std::uint32_t>(3 * p.size() + 1));
  for (std::size_t i = 0; i < p.size(); ++i) w.put_tensor(p.names[i], p.tensors[i]);
  for (std::size_t i = 0; i < p.size(); ++i) {
    w.put_tensor(p.names[i] + ".m", ck.adam.m.tensors[i]);
    w.put_tensor(p.names[i] + ".v", ck.adam.v.tensors[i]);
  }
  w.put_tensor("step", Tensor(Shape{}, {static_cast<float>(ck.adam.step)}));
  w.put(static_cast<std::uint32_t>(ck.config_json.size()));
  w.put_bytes(ck.config_json.data(), ck.config_json.size());
  return std::move(w.bytes);
}

Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  if (r.get_string(4) != std::string(kMagic, 4)) {
    throw ParseError(ParseError::Kind::kBadMagic, 0, "not an RKCK checkpoint");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw ParseError(ParseError::Kind::kBadVersion, 4,
                     "unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = r.get<std::uint32_t>();
  if (count == 0 || (count - 1) % 3 != 0) {
    throw ParseError(ParseError::Kind::kMalformedRecord, 8, "checkpoint tensor count is invalid");
  }
  const std::size_t n = (count - 1) / 3;

  Checkpoint ck;
  std::string name;
  for (std::size_t i = 0; i < n; ++i) {
    Tensor t = r.get_tensor(name);
    if (ck.params.find(name) != ck.params.size()) {
      throw ParseError(ParseError::Kind::kMalformedRecord, r.position(),
                       "duplicate tensor '" + name + "'");
    }
    ck.params.names.push_back(name);
    ck.params.tensors.push_back(std::move(t));
  }
  ck.adam.m.names = ck.params.names;
  ck.adam.v.names = ck.params.names;
  for (std::size_t i = 0; i < n; ++i) {
    for (auto* dst : {&ck.adam.m, &ck.adam.v}) {
      const std::string expected = ck.params.names[i] + (dst == &ck.adam.m ? ".m" : ".v");
      const std::size_t at = r.position();
      Tensor t = r.get_tensor(name);
      if (name != expected || t.shape() != ck.params.tensors[i].shape()) {
        throw ParseError(ParseError::Kind::kMalformedRecord, at,
                         "expected optimizer tensor '" + expected + "', found '" + name + "'");
      }
      dst->tensors.push_back(std::move(t));
    }
  }
  const std::size_t at = r.position();
  Tensor step = r.get_tensor(name);
  if (name != "step" || step.size() != 1) {
    throw ParseError(ParseError::Kind::kMalformedRecord, at, "missing step counter");
  }
  ck.adam.step = static_cast<std::uint64_t>(step[0]);
  ck.config_json = r.get_string(r.get<std::uint32_t>());
  if (!r.at_end()) {
    throw ParseError(ParseError::Kind::kMalformedRecord, r.position(),
                     "trailing bytes after checkpoint");
  }
  return ck;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(checkpoint);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace retina
