#include "mmbattn/checkpoint.hpp"

#include "mmbattn/errors.hpp"

#include <bit>
#include <fstream>
#include <iterator>

namespace mmb::ckpt {

namespace {

class Writer {
 public:
  template <typename T>
  void put(T v) {
    const auto u = static_cast<std::uint64_t>(v);
    for (std::size_t i = 0; i < sizeof(T); ++i) bytes.push_back(static_cast<std::uint8_t>((u >> (8 * i)) & 0xff));
  }
  void put_f64(double v) { put<std::uint64_t>(std::bit_cast<std::uint64_t>(v)); }
  void put_bytes(std::string_view s) { bytes.insert(bytes.end(), s.begin(), s.end()); }

  std::vector<std::uint8_t> bytes;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }
  double get_f64() { return std::bit_cast<double>(get<std::uint64_t>("payload value")); }
  std::string get_bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) {
    if (n > remaining()) throw ParseError(std::string("truncated checkpoint while reading ") + what, pos_);
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::string to_hex(const std::string& raw) {
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned char c : raw) {
    out += hex[c >> 4];
    out += hex[c & 0xf];
  }
  return out;
}

std::string from_hex(const std::string& hex) {
  std::string out;
  for (std::size_t i = 0; i + 1 < hex.size(); i += 2) out += static_cast<char>(std::stoi(hex.substr(i, 2), nullptr, 16));
  return out;
}

}  // namespace

Checkpoint capture(const model::Model& model, const KeyValueFile& config) {
  Checkpoint c;
  c.config_text = config.canonical();
  c.digest = sha256_hex(c.config_text);
  for (const auto& p : model.parameters()) {
    c.manifest.push_back({p.name, p.tensor.shape(), c.payload.size()});
    c.payload.insert(c.payload.end(), p.tensor.value().begin(), p.tensor.value().end());
  }
  return c;
}

std::vector<std::uint8_t> encode(const Checkpoint& ckpt) {
  Writer w;
  w.put_bytes("MMBC");
  w.put<std::uint16_t>(kFormatVersion);
  w.put_bytes(from_hex(ckpt.digest));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ckpt.config_text.size()));
  w.put_bytes(ckpt.config_text);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ckpt.manifest.size()));
  for (const auto& e : ckpt.manifest) {
    w.put<std::uint16_t>(static_cast<std::uint16_t>(e.name.size()));
    w.put_bytes(e.name);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(e.shape.size()));
    for (auto extent : e.shape) w.put<std::uint64_t>(static_cast<std::uint64_t>(extent));
    w.put<std::uint64_t>(e.offset);
  }
  w.put<std::uint64_t>(ckpt.payload.size());
  for (double v : ckpt.payload) w.put_f64(v);
  return std::move(w.bytes);
}

Checkpoint decode(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  if (r.get_bytes(4, "magic") != "MMBC") throw ParseError("bad checkpoint magic (expected MMBC)", 0);
  const std::size_t version_at = r.pos();
  const auto version = r.get<std::uint16_t>("version");
  if (version != kFormatVersion)
    throw ParseError("unsupported checkpoint version " + std::to_string(version), version_at);
  Checkpoint c;
  c.digest = to_hex(r.get_bytes(32, "digest"));
  const auto config_len = r.get<std::uint32_t>("config length");
  c.config_text = r.get_bytes(config_len, "config text");
  const auto count = r.get<std::uint32_t>("manifest size");
  std::uint64_t expected_offset = 0;
  for (std::uint32_t i = 0; i < count; ++i) {
    Checkpoint::Entry e;
    const auto name_len = r.get<std::uint16_t>("name length");
    e.name = r.get_bytes(name_len, "parameter name");
    const auto rank = r.get<std::uint8_t>("rank");
    std::uint64_t size = 1;
    for (std::uint8_t k = 0; k < rank; ++k) {
      const auto extent = r.get<std::uint64_t>("extent");
      e.shape.push_back(static_cast<ag::Index>(extent));
      size *= extent;
    }
    const std::size_t offset_at = r.pos();
    e.offset = r.get<std::uint64_t>("offset");
    if (e.offset != expected_offset)
      throw ParseError("manifest entry '" + e.name + "' does not start where the previous one ended", offset_at);
    expected_offset += size;
    c.manifest.push_back(std::move(e));
  }
  const std::size_t payload_at = r.pos();
  const auto n = r.get<std::uint64_t>("payload length");
  if (n != expected_offset)
    throw ParseError("payload holds " + std::to_string(n) + " values but the manifest covers " +
                         std::to_string(expected_offset),
                     payload_at);
  if (r.remaining() != n * 8)
    throw ParseError("payload byte size mismatch: " + std::to_string(r.remaining()) + " bytes for " +
                         std::to_string(n) + " doubles",
                     r.pos());
  c.payload.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) c.payload.push_back(r.get_f64());
  if (sha256_hex(c.config_text) != c.digest) throw ParseError("config digest does not match stored config text", 6);
  return c;
}

void save(const model::Model& model, const KeyValueFile& config, const std::filesystem::path& path) {
  const auto bytes = encode(capture(model, config));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Checkpoint read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode(bytes);
}

void apply(const Checkpoint& ckpt, model::Model& model) {
  const auto& params = model.parameters();
  if (params.size() != ckpt.manifest.size())
    throw ContractError("checkpoint has " + std::to_string(ckpt.manifest.size()) + " parameters, model has " +
                        std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& e = ckpt.manifest[i];
    if (e.name != params[i].name || e.shape != params[i].tensor.shape())
      throw ContractError("checkpoint entry " + e.name + " " + ag::shape_string(e.shape) + " does not match model " +
                          params[i].name + " " + ag::shape_string(params[i].tensor.shape()));
    ag::Tensor t = params[i].tensor;
    t.value() = Eigen::Map<const Eigen::VectorXd>(ckpt.payload.data() + e.offset, t.size());
  }
}

model::Model load(const std::filesystem::path& path, const KeyValueFile& config, const data::FieldSchema& schema,
                  const data::Vocabulary& vocab, bool force) {
  const Checkpoint ckpt = read(path);
  const std::string expected = config.digest();
  KeyValueFile effective = config;
  if (expected != ckpt.digest) {
    if (!force)
      throw DigestMismatch("checkpoint config digest " + ckpt.digest + " does not match run config digest " + expected +
                           " (use --force to load anyway)");
    effective = KeyValueFile::parse(ckpt.config_text, path.string());
  }
  model::Model m = model::Model::build(schema, vocab, model::ModelConfig::from_config(effective));
  apply(ckpt, m);
  return m;
}

}  // namespace mmb::ckpt
