#include "emgtl/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <algorithm>
#include <fstream>
#include <sstream>

namespace emgtl {

namespace {

constexpr char kMagic[8] = {'E', 'M', 'G', 'T', 'L', 'C', 'K', 'P'};

class Writer {
 public:
  template <typename T>
  void put(T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
      v = byteswap(v);
    }
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  void put_string(const std::string& s) {
    put<std::uint32_t>(std::uint32_t(s.size()));
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  void put_raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

  template <typename T>
  static T byteswap(T v) {
    auto* p = reinterpret_cast<std::uint8_t*>(&v);
    std::reverse(p, p + sizeof(T));
    return v;
  }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
      v = Writer::byteswap(v);
    }
    return v;
  }
  std::string get_string() {
    const auto n = get<std::uint32_t>();
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) {
      throw DataError("checkpoint: truncated at byte offset " + std::to_string(pos_));
    }
  }
  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

std::string metadata_text(const std::map<std::string, std::string>& m) {
  std::string out;
  for (const auto& [k, v] : m) out += k + "=" + v + "\n";
  return out;
}

std::map<std::string, std::string> parse_metadata(const std::string& text) {
  std::map<std::string, std::string> m;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError("checkpoint: malformed metadata line");
    m[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return m;
}

template <typename Real>
constexpr DType dtype_of() {
  return std::is_same_v<Real, float> ? DType::kFloat32 : DType::kFloat64;
}

template <typename Real>
CheckpointEntry make_entry(std::string name, std::vector<std::size_t> shape,
                           std::span<const Real> values, bool trainable = true) {
  CheckpointEntry e;
  e.name = std::move(name);
  e.dtype = dtype_of<Real>();
  e.trainable = trainable;
  e.shape = std::move(shape);
  e.values.assign(values.begin(), values.end());
  return e;
}

template <typename Real>
std::vector<Real> as_real(const CheckpointEntry& e) {
  return std::vector<Real>(e.values.begin(), e.values.end());
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

const CheckpointEntry& Checkpoint::entry(const std::string& name) const {
  for (const auto& e : entries) {
    if (e.name == name) return e;
  }
  throw DataError("checkpoint: missing entry '" + name + "'");
}

bool Checkpoint::has_entry(const std::string& name) const {
  for (const auto& e : entries) {
    if (e.name == name) return true;
  }
  return false;
}

std::string Checkpoint::meta(const std::string& key) const {
  auto it = metadata.find(key);
  if (it == metadata.end()) throw DataError("checkpoint: missing metadata '" + key + "'");
  return it->second;
}

std::vector<std::uint8_t> Checkpoint::serialize() const {
  Writer w;
  w.put_raw(kMagic, sizeof kMagic);
  w.put<std::uint32_t>(kVersion);
  w.put_string(metadata_text(metadata));
  w.put_string(config_text);
  w.put<std::uint64_t>(entries.size());
  for (const auto& e : entries) {
    w.put_string(e.name);
    w.put<std::uint8_t>(std::uint8_t(e.dtype));
    w.put<std::uint8_t>(e.trainable ? 1 : 0);
    w.put<std::uint32_t>(std::uint32_t(e.shape.size()));
    for (std::size_t d : e.shape) w.put<std::uint64_t>(d);
    if (Tensor<double>::element_count(e.shape) != e.values.size()) {
      throw UsageError("checkpoint: entry '" + e.name + "' has inconsistent shape");
    }
    for (double v : e.values) {
      if (e.dtype == DType::kFloat32) {
        w.put<float>(float(v));
      } else {
        w.put<double>(v);
      }
    }
  }
  return w.take();
}

Checkpoint Checkpoint::deserialize(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  r.need(sizeof kMagic);
  if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw DataError("checkpoint: bad magic");
  }
  for (std::size_t i = 0; i < sizeof kMagic; ++i) r.get<char>();
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion) {
    throw DataError("checkpoint: unsupported version " + std::to_string(version));
  }
  Checkpoint c;
  c.metadata = parse_metadata(r.get_string());
  c.config_text = r.get_string();
  const auto count = r.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < count; ++i) {
    CheckpointEntry e;
    e.name = r.get_string();
    const auto dtype = r.get<std::uint8_t>();
    if (dtype != 1 && dtype != 2) throw DataError("checkpoint: unknown dtype in '" + e.name + "'");
    e.dtype = DType(dtype);
    e.trainable = (r.get<std::uint8_t>() & 1) != 0;
    const auto rank = r.get<std::uint32_t>();
    for (std::uint32_t d = 0; d < rank; ++d) e.shape.push_back(std::size_t(r.get<std::uint64_t>()));
    const std::size_t n = Tensor<double>::element_count(e.shape);
    r.need(n * (e.dtype == DType::kFloat32 ? 4 : 8));
    e.values.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      e.values[k] = e.dtype == DType::kFloat32 ? double(r.get<float>()) : r.get<double>();
    }
    c.entries.push_back(std::move(e));
  }
  if (!r.done()) throw DataError("checkpoint: trailing bytes at offset " + std::to_string(r.pos()));
  return c;
}

void Checkpoint::write(const std::filesystem::path& path) const {
  const auto bytes = serialize();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("checkpoint: cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) throw DataError("checkpoint: write failed for '" + path.string() + "'");
}

Checkpoint Checkpoint::read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("checkpoint: cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return deserialize(bytes);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

// --- model <-> checkpoint -------------------------------------------------------

template <typename Real>
void store_model(Checkpoint& ckpt, const TcnModel<Real>& model, const std::string& prefix) {
  if (ckpt.config_text.empty()) ckpt.config_text = model.config().to_text();
  for (const Parameter<Real>* p : model.parameters()) {
    ckpt.entries.push_back(make_entry<Real>("param/" + prefix + p->name, p->value.shape(),
                                            p->value.values(), p->trainable));
  }
  for (std::size_t b = 0; b < model.config().num_blocks(); ++b) {
    for (const auto& [key, stats] : model.bn_stats(b).banks()) {
      const std::string base = "bn/" + prefix + "block" + std::to_string(b) + "/" + key + "/";
      ckpt.entries.push_back(make_entry<Real>(base + "mean", {stats.mean.size()},
                                              std::span<const Real>(stats.mean)));
      ckpt.entries.push_back(make_entry<Real>(base + "var", {stats.var.size()},
                                              std::span<const Real>(stats.var)));
    }
  }
}

template <typename Real>
TcnModel<Real> load_model(const Checkpoint& ckpt, const std::string& prefix) {
  TcnModel<Real> model(TcnConfig::parse(ckpt.config_text), 0);
  for (Parameter<Real>* p : model.parameters()) {
    const CheckpointEntry& e = ckpt.entry("param/" + prefix + p->name);
    if (e.shape != p->value.shape()) {
      throw DataError("checkpoint: shape mismatch for '" + e.name + "'");
    }
    p->value = Tensor<Real>(e.shape, as_real<Real>(e));
    p->trainable = e.trainable;
  }
  const std::string bn_prefix = "bn/" + prefix;
  for (const auto& e : ckpt.entries) {
    if (e.name.rfind(bn_prefix, 0) != 0) continue;
    // <bn_prefix>block<i>/<domain>/<mean|var>
    const std::string rest = e.name.substr(bn_prefix.size());
    const auto s1 = rest.find('/'), s2 = rest.rfind('/');
    if (rest.rfind("block", 0) != 0 || s1 == std::string::npos || s1 == s2) continue;
    const std::size_t block = std::stoul(rest.substr(5, s1 - 5));
    const std::string domain = rest.substr(s1 + 1, s2 - s1 - 1);
    const std::string field = rest.substr(s2 + 1);
    if (block >= model.config().num_blocks()) throw DataError("checkpoint: bad block in " + e.name);
    auto& stats = model.bn_stats(block);
    stats.add(domain);
    auto& bank = stats.at(domain);
    if (e.values.size() != bank.mean.size()) throw DataError("checkpoint: bad bank size " + e.name);
    (field == "mean" ? bank.mean : bank.var) = as_real<Real>(e);
  }
  return model;
}

template <typename Real>
void store_tadann(Checkpoint& ckpt, const TadannModel<Real>& model) {
  ckpt.metadata["calibration_key"] = model.calibration_key();
  store_model(ckpt, model.source(), "source/");
  store_model(ckpt, model.target(), "target/");
  for (const auto& c : model.coefficients()) {
    ckpt.entries.push_back(
        make_entry<Real>("param/" + c.name, c.value.shape(), c.value.values(), c.trainable));
  }
}

template <typename Real>
TadannModel<Real> load_tadann(const Checkpoint& ckpt) {
  TadannModel<Real> model(load_model<Real>(ckpt, "source/"), load_model<Real>(ckpt, "target/"),
                          ckpt.meta("calibration_key"));
  for (auto& c : model.coefficients()) {
    const CheckpointEntry& e = ckpt.entry("param/" + c.name);
    c.value = Tensor<Real>(e.shape, as_real<Real>(e));
    c.trainable = e.trainable;
  }
  return model;
}

template <typename Real>
void store_optimizer(Checkpoint& ckpt, const Adam<Real>& adam) {
  ckpt.metadata["adam.lr"] = format_double(adam.lr());
  ckpt.metadata["adam.beta1"] = format_double(adam.options().beta1);
  ckpt.metadata["adam.beta2"] = format_double(adam.options().beta2);
  ckpt.metadata["adam.epsilon"] = format_double(adam.options().epsilon);
  ckpt.metadata["adam.steps"] = std::to_string(adam.step_count());
  for (const auto& [name, m] : adam.moments()) {
    ckpt.entries.push_back(make_entry<Real>("adam/" + name + "/m", m.first.shape(), m.first.values()));
    ckpt.entries.push_back(
        make_entry<Real>("adam/" + name + "/v", m.second.shape(), m.second.values()));
  }
}

template <typename Real>
Adam<Real> load_optimizer(const Checkpoint& ckpt) {
  AdamOptions opt;
  opt.lr = std::stod(ckpt.meta("adam.lr"));
  opt.beta1 = std::stod(ckpt.meta("adam.beta1"));
  opt.beta2 = std::stod(ckpt.meta("adam.beta2"));
  opt.epsilon = std::stod(ckpt.meta("adam.epsilon"));
  Adam<Real> adam(opt);
  std::map<std::string, typename Adam<Real>::Moments> moments;
  for (const auto& e : ckpt.entries) {
    if (e.name.rfind("adam/", 0) != 0) continue;
    const auto slash = e.name.rfind('/');
    const std::string name = e.name.substr(5, slash - 5);
    Tensor<Real> t(e.shape, as_real<Real>(e));
    if (e.name.substr(slash + 1) == "m") {
      moments[name].first = std::move(t);
    } else {
      moments[name].second = std::move(t);
    }
  }
  adam.restore(std::stoll(ckpt.meta("adam.steps")), std::move(moments));
  return adam;
}

template void store_model(Checkpoint&, const TcnModel<float>&, const std::string&);
template void store_model(Checkpoint&, const TcnModel<double>&, const std::string&);
template TcnModel<float> load_model(const Checkpoint&, const std::string&);
template TcnModel<double> load_model(const Checkpoint&, const std::string&);
template void store_tadann(Checkpoint&, const TadannModel<float>&);
template void store_tadann(Checkpoint&, const TadannModel<double>&);
template TadannModel<float> load_tadann(const Checkpoint&);
template TadannModel<double> load_tadann(const Checkpoint&);
template void store_optimizer(Checkpoint&, const Adam<float>&);
template void store_optimizer(Checkpoint&, const Adam<double>&);
template Adam<float> load_optimizer(const Checkpoint&);
template Adam<double> load_optimizer(const Checkpoint&);

}  // namespace emgtl
