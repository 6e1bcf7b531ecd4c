#include "checkpoint.hpp"
#include "errors.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace tpdr {

namespace {

constexpr uint32_t kVersion = 1;

void put_u32(std::string& buf, uint32_t v) {
  buf.push_back(static_cast<char>(v & 0xff));
  buf.push_back(static_cast<char>((v >> 8) & 0xff));
  buf.push_back(static_cast<char>((v >> 16) & 0xff));
  buf.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_f64(std::string& buf, double v) {
  const uint64_t bits = std::bit_cast<uint64_t>(v);
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

class Reader {
 public:
  Reader(std::string bytes, std::string path) : bytes_(std::move(bytes)), path_(std::move(path)) {}

  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }

  double f64() {
    need(8);
    uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return std::bit_cast<double>(bits);
  }

  std::string str(uint32_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool at_end() const { return pos_ == bytes_.size(); }

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError("checkpoint " + path_ + ": " + what);
  }

 private:
  void need(size_t n) {
    if (bytes_.size() - pos_ < n) fail("truncated file");
  }

  std::string bytes_;
  std::string path_;
  size_t pos_ = 0;
};

}  // namespace

void Checkpoint::put(const std::string& name, const Tensor& t) {
  for (auto& e : entries) {
    if (e.first == name) {
      e.second = t;
      return;
    }
  }
  entries.emplace_back(name, t);
}

const Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& e : entries) {
    if (e.first == name) return &e.second;
  }
  return nullptr;
}

Tensor Checkpoint::require(const std::string& name) const {
  const Tensor* t = find(name);
  if (!t) throw ParseError("checkpoint: missing tensor \"" + name + "\"");
  return *t;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::string buf;
  buf += "TPDR";
  put_u32(buf, kVersion);
  put_u32(buf, static_cast<uint32_t>(ckpt.entries.size()));
  for (const auto& [name, t] : ckpt.entries) {
    if (!t.defined()) throw std::invalid_argument("checkpoint: undefined tensor \"" + name + "\"");
    put_u32(buf, static_cast<uint32_t>(name.size()));
    buf += name;
    put_u32(buf, static_cast<uint32_t>(t.ndim()));
    for (int d = 0; d < t.ndim(); ++d) {
      if (t.dim(d) > std::numeric_limits<uint32_t>::max()) {
        throw std::invalid_argument("checkpoint: dimension too large in \"" + name + "\"");
      }
      put_u32(buf, static_cast<uint32_t>(t.dim(d)));
    }
    const double* p = t.data();
    for (int64_t i = 0; i < t.numel(); ++i) put_f64(buf, p[i]);
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("checkpoint: cannot open " + path + " for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r(std::move(bytes), path);

  if (r.str(4) != "TPDR") r.fail("bad magic");
  const uint32_t version = r.u32();
  if (version != kVersion) r.fail("unsupported version " + std::to_string(version));
  const uint32_t count = r.u32();

  Checkpoint ckpt;
  ckpt.entries.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t name_len = r.u32();
    std::string name = r.str(name_len);
    const uint32_t ndim = r.u32();
    Shape shape(ndim);
    int64_t numel = 1;
    for (uint32_t d = 0; d < ndim; ++d) {
      shape[d] = static_cast<int64_t>(r.u32());
      numel *= shape[d];
    }
    std::vector<double> data(static_cast<size_t>(numel));
    for (int64_t k = 0; k < numel; ++k) data[static_cast<size_t>(k)] = r.f64();
    ckpt.entries.emplace_back(std::move(name), Tensor::from_data(std::move(shape), std::move(data)));
  }
  if (!r.at_end()) r.fail("trailing bytes after last entry");
  return ckpt;
}

}  // namespace tpdr
