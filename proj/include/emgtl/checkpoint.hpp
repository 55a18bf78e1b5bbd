#pragma once

// Self-describing binary checkpoint.
//
//   "EMGTLCKP"                      8-byte magic
//   u32 version                     currently 1
//   u32 n, n bytes                  metadata, `key=value` lines
//   u32 n, n bytes                  model config, `key=value` lines (TcnConfig::to_text)
//   u64 entry count
//   per entry:
//     u32 n, n bytes                name, e.g. "param/target/block0.conv.weight"
//     u8  dtype                     1 = float32, 2 = float64
//     u8  flags                     bit 0 = trainable
//     u32 rank, rank x u64 extents
//     raw little-endian values
//
// Entry names: "param/<prefix><parameter>", "bn/<prefix>block<i>/<domain>/{mean,var}",
// "adam/<parameter>/{m,v}". All integers are little-endian.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "emgtl/adam.hpp"
#include "emgtl/model.hpp"

namespace emgtl {

enum class DType : std::uint8_t { kFloat32 = 1, kFloat64 = 2 };

struct CheckpointEntry {
  std::string name;
  DType dtype = DType::kFloat32;
  bool trainable = true;
  std::vector<std::size_t> shape;
  std::vector<double> values;
};

class Checkpoint {
 public:
  static constexpr std::uint32_t kVersion = 1;

  std::map<std::string, std::string> metadata;
  std::string config_text;
  std::vector<CheckpointEntry> entries;

  const CheckpointEntry& entry(const std::string& name) const;
  bool has_entry(const std::string& name) const;
  std::string meta(const std::string& key) const;

  std::vector<std::uint8_t> serialize() const;
  static Checkpoint deserialize(const std::vector<std::uint8_t>& bytes);
  void write(const std::filesystem::path& path) const;
  static Checkpoint read(const std::filesystem::path& path);
};

template <typename Real>
void store_model(Checkpoint& ckpt, const TcnModel<Real>& model, const std::string& prefix = "");

/// Rebuilds a model from entries under `prefix`; the config comes from ckpt.config_text.
template <typename Real>
TcnModel<Real> load_model(const Checkpoint& ckpt, const std::string& prefix = "");

template <typename Real>
void store_tadann(Checkpoint& ckpt, const TadannModel<Real>& model);

template <typename Real>
TadannModel<Real> load_tadann(const Checkpoint& ckpt);

template <typename Real>
void store_optimizer(Checkpoint& ckpt, const Adam<Real>& adam);

template <typename Real>
Adam<Real> load_optimizer(const Checkpoint& ckpt);

}  // namespace emgtl
