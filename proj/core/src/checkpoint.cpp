#include "waitk/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>

#include "waitk/error.hpp"

namespace waitk {

namespace {

constexpr std::uint32_t kVersion = 1;
const std::string kConfigName = "config";

template <typename T>
void put(std::string& buf, T value) {
  using U = std::make_unsigned_t<T>;
  auto u = static_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) buf.push_back(static_cast<char>((u >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    std::uint64_t u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      u |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += sizeof(T);
    return static_cast<T>(u);
  }

  std::string_view bytes(std::size_t n) {
    need(n);
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw DataError("checkpoint is truncated");
  }
  std::string_view data_;
  std::size_t pos_ = 0;
};

std::uint32_t crc_of(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

Tensor config_tensor(const ModelConfig& c) {
  return Tensor({8}, {static_cast<double>(c.enc_layers), static_cast<double>(c.dec_layers),
                      static_cast<double>(c.d_model), static_cast<double>(c.d_ff),
                      static_cast<double>(c.heads), static_cast<double>(c.vocab_size),
                      static_cast<double>(c.max_positions), c.dropout});
}

ModelConfig config_from(const Tensor& t) {
  if (t.shape() != Shape{8}) throw DataError("checkpoint config tensor has the wrong shape");
  auto count = [&](std::size_t i) {
    const double v = t[i];
    if (!(v >= 0.0) || v != std::floor(v)) throw DataError("checkpoint config holds a non-integer count");
    return static_cast<std::size_t>(v);
  };
  ModelConfig c;
  c.enc_layers = count(0);
  c.dec_layers = count(1);
  c.d_model = count(2);
  c.d_ff = count(3);
  c.heads = count(4);
  c.vocab_size = count(5);
  c.max_positions = count(6);
  c.dropout = std::round(t[7] * 1e6) / 1e6;
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint config is invalid: ") + e.what());
  }
  return c;
}

}  // namespace

void write_tensors(std::ostream& out, const NamedTensors& tensors) {
  std::string body;
  for (const auto& [name, t] : tensors) {
    if (name.size() > 0xFFFF) throw ConfigError("tensor name too long: " + name);
    if (t.rank() > 0xFF) throw ConfigError("tensor rank too large: " + name);
    put<std::uint16_t>(body, static_cast<std::uint16_t>(name.size()));
    body += name;
    put<std::uint8_t>(body, static_cast<std::uint8_t>(t.rank()));
    for (auto e : t.shape()) put<std::uint64_t>(body, e);
    for (double v : t.data()) put<std::uint32_t>(body, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  std::string head = "WKCK";
  put<std::uint32_t>(head, kVersion);
  put<std::uint32_t>(head, static_cast<std::uint32_t>(tensors.size()));
  std::string tail;
  put<std::uint32_t>(tail, crc_of(body));
  out.write(head.data(), static_cast<std::streamsize>(head.size()));
  out.write(body.data(), static_cast<std::streamsize>(body.size()));
  out.write(tail.data(), static_cast<std::streamsize>(tail.size()));
  if (!out) throw DataError("failed to write checkpoint");
}

NamedTensors read_tensors(std::istream& in) {
  const std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r(data);
  if (r.bytes(4) != "WKCK") throw DataError("not a checkpoint (bad magic)");
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));
  const auto count = r.get<std::uint32_t>();
  const std::size_t body_start = r.pos();
  NamedTensors out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = r.get<std::uint16_t>();
    std::string name(r.bytes(len));
    const auto rank = r.get<std::uint8_t>();
    Shape shape;
    std::size_t n = 1;
    for (std::uint8_t d = 0; d < rank; ++d) {
      shape.push_back(static_cast<std::size_t>(r.get<std::uint64_t>()));
      if (shape.back() != 0 && n > r.remaining() / shape.back()) throw DataError("checkpoint is truncated");
      n *= shape.back();
    }
    if (n > r.remaining() / 4) throw DataError("checkpoint is truncated");
    std::vector<double> vals(n);
    for (auto& v : vals) v = static_cast<double>(std::bit_cast<float>(r.get<std::uint32_t>()));
    if (!out.emplace(name, Tensor(shape, std::move(vals))).second)
      throw DataError("checkpoint repeats tensor " + name);
  }
  const std::size_t body_end = r.pos();
  const auto stored = r.get<std::uint32_t>();
  if (r.remaining() != 0) throw DataError("trailing bytes after checkpoint");
  if (stored != crc_of(std::string_view(data).substr(body_start, body_end - body_start)))
    throw DataError("checkpoint CRC mismatch");
  return out;
}

void save_checkpoint(std::ostream& out, const Parameters& params) {
  NamedTensors all = params.tensors;
  all[kConfigName] = config_tensor(params.config);
  write_tensors(out, all);
}

Parameters load_checkpoint(std::istream& in) {
  NamedTensors all = read_tensors(in);
  auto it = all.find(kConfigName);
  if (it == all.end()) throw DataError("checkpoint has no config tensor");
  Parameters p;
  p.config = config_from(it->second);
  all.erase(it);
  const auto layout = parameter_layout(p.config);
  if (all.size() != layout.size())
    throw DataError("checkpoint holds " + std::to_string(all.size()) + " tensors, config expects " +
                    std::to_string(layout.size()));
  for (const auto& [name, shape] : layout) {
    auto t = all.find(name);
    if (t == all.end()) throw DataError("checkpoint is missing tensor " + name);
    if (t->second.shape() != shape)
      throw DataError("checkpoint tensor " + name + " has shape " + shape_string(t->second.shape()) +
                      ", expected " + shape_string(shape));
  }
  p.tensors = std::move(all);
  return p;
}

void save_checkpoint(const std::filesystem::path& path, const Parameters& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  save_checkpoint(out, params);
}

Parameters load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  try {
    return load_checkpoint(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

Parameters round_to_f32(Parameters params) {
  for (auto& [name, t] : params.tensors)
    for (auto& v : t.data()) v = static_cast<double>(static_cast<float>(v));
  return params;
}

}  // namespace waitk
