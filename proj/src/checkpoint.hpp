#pragma once

#include <string>
#include <utility>
#include <vector>

#include "tensor.hpp"

namespace tpdr {

// Named tensor bundle. Entry order is preserved on disk so that
// save(load(x)) is byte-identical to x.
struct Checkpoint {
  std::vector<std::pair<std::string, Tensor>> entries;

  void put(const std::string& name, const Tensor& t);
  const Tensor* find(const std::string& name) const;
  Tensor require(const std::string& name) const;
  bool has(const std::string& name) const { return find(name) != nullptr; }
};

// File layout, all integers little-endian u32:
//   "TPDR" | version | entry_count | entries
// entry: name_len | name bytes | ndim | dims | data (f64 little-endian,
// count = product of dims). Values round-trip bit-exactly, including
// signed zeros and NaN payloads.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace tpdr
