#include "datoc/tensor_io.hpp"

#include <cstring>
#include <fstream>

namespace datoc {

namespace {

constexpr char kMagic[4] = {'D', 'A', 'T', 'O'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<char*>(b), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
  put_u32(os, static_cast<std::uint32_t>(v));
  put_u32(os, static_cast<std::uint32_t>(v >> 32));
}

bool get_u32(std::istream& is, std::uint32_t& v) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) return false;
  v = b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  return true;
}

bool get_u64(std::istream& is, std::uint64_t& v) {
  std::uint32_t lo, hi;
  if (!get_u32(is, lo) || !get_u32(is, hi)) return false;
  v = lo | (static_cast<std::uint64_t>(hi) << 32);
  return true;
}

int payload_bytes(ElemKind k) {
  switch (k) {
    case ElemKind::I4:
    case ElemKind::I8: return 1;
    case ElemKind::I16:
    case ElemKind::BF16: return 2;
    case ElemKind::I32:
    case ElemKind::F32: return 4;
  }
  return 4;
}

}  // namespace

bool write_tensors(const std::string& path, const std::map<std::string, TensorValue>& tensors) {
  std::ofstream os(path, std::ios::binary);
  if (!os) return false;
  os.write(kMagic, 4);
  put_u32(os, kVersion);
  put_u32(os, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, v] : tensors) {
    put_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(os, static_cast<std::uint32_t>(v.type.elem.kind));
    put_u32(os, static_cast<std::uint32_t>(v.type.rank()));
    for (auto d : v.type.shape) put_u64(os, static_cast<std::uint64_t>(d));
    std::int64_t n = v.count();
    int bytes = payload_bytes(v.type.elem.kind);
    for (std::int64_t i = 0; i < n; ++i) {
      std::uint32_t raw;
      if (v.is_float()) {
        float f = v.get_f(i);
        std::memcpy(&raw, &f, 4);
        if (v.type.elem.kind == ElemKind::BF16) raw >>= 16;
      } else {
        raw = static_cast<std::uint32_t>(static_cast<std::uint64_t>(v.get_i(i)));
      }
      for (int b = 0; b < bytes; ++b) {
        char c = static_cast<char>((raw >> (8 * b)) & 0xFF);
        os.write(&c, 1);
      }
    }
  }
  return static_cast<bool>(os);
}

std::optional<std::map<std::string, TensorValue>> read_tensors(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) return std::nullopt;
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) return std::nullopt;
  std::uint32_t version = 0, count = 0;
  if (!get_u32(is, version) || version != kVersion) return std::nullopt;
  if (!get_u32(is, count)) return std::nullopt;

  std::map<std::string, TensorValue> out;
  for (std::uint32_t t = 0; t < count; ++t) {
    std::uint32_t name_len = 0;
    if (!get_u32(is, name_len) || name_len > 4096) return std::nullopt;
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len)) return std::nullopt;
    std::uint32_t kind = 0, rank = 0;
    if (!get_u32(is, kind) || !get_u32(is, rank) || rank > 16) return std::nullopt;
    TensorType type;
    type.elem.kind = static_cast<ElemKind>(kind);
    for (std::uint32_t d = 0; d < rank; ++d) {
      std::uint64_t dim = 0;
      if (!get_u64(is, dim)) return std::nullopt;
      type.shape.push_back(static_cast<std::int64_t>(dim));
    }
    TensorValue v = TensorValue::zeros(type);
    std::int64_t n = v.count();
    int bytes = payload_bytes(type.elem.kind);
    for (std::int64_t i = 0; i < n; ++i) {
      std::uint32_t raw = 0;
      for (int b = 0; b < bytes; ++b) {
        char c;
        if (!is.read(&c, 1)) return std::nullopt;
        raw |= static_cast<std::uint32_t>(static_cast<unsigned char>(c)) << (8 * b);
      }
      if (v.is_float()) {
        if (type.elem.kind == ElemKind::BF16) raw <<= 16;
        float f;
        std::memcpy(&f, &raw, 4);
        v.fdata[static_cast<size_t>(i)] = f;
      } else {
        // Sign-extend from the stored width.
        std::int64_t sv = static_cast<std::int32_t>(raw << (8 * (4 - bytes))) >>
                          (8 * (4 - bytes));
        v.idata[static_cast<size_t>(i)] = wrap_int(type.elem.kind, sv);
      }
    }
    out.emplace(std::move(name), std::move(v));
  }
  return out;
}

}  // namespace datoc
