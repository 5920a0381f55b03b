#include "datoc/value.hpp"

#include <cmath>
#include <cstring>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace datoc {

std::int64_t wrap_int(ElemKind kind, std::int64_t v) {
  int bits = 32;
  switch (kind) {
    case ElemKind::I4: bits = 4; break;
    case ElemKind::I8: bits = 8; break;
    case ElemKind::I16: bits = 16; break;
    case ElemKind::I32: bits = 32; break;
    default: return v;
  }
  std::uint64_t mask = (1ull << bits) - 1;
  std::uint64_t u = static_cast<std::uint64_t>(v) & mask;
  std::uint64_t sign = 1ull << (bits - 1);
  return static_cast<std::int64_t>(u ^ sign) - static_cast<std::int64_t>(sign);
}

float store_float(ElemKind kind, float v) {
  // Written as an unconditional bit operation with a selected mask: gcc 11
  // miscompiles the branchy form (a float/int view-convert PHI in the
  // return path collapses to a no-op at -O2).
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  std::uint32_t is_bf16 = kind == ElemKind::BF16 ? 1u : 0u;
  bits &= ~(0x0000FFFFu * is_bf16);
  float out;
  std::memcpy(&out, &bits, 4);
  return out;
}

TensorValue TensorValue::zeros(TensorType t) {
  TensorValue v;
  v.type = std::move(t);
  if (v.type.elem.is_float())
    v.fdata.assign(static_cast<size_t>(v.type.elem_count()), 0.0f);
  else
    v.idata.assign(static_cast<size_t>(v.type.elem_count()), 0);
  return v;
}

TensorValue TensorValue::scalar(ElemType elem, double x) {
  TensorValue v = zeros(TensorType{elem, {}});
  if (elem.is_float())
    v.set(std::int64_t{0}, static_cast<float>(x));
  else
    v.set(std::int64_t{0}, static_cast<std::int64_t>(x));
  return v;
}

void TensorValue::set(std::int64_t flat, std::int64_t v) {
  idata[static_cast<size_t>(flat)] = wrap_int(type.elem.kind, v);
}

void TensorValue::set(std::int64_t flat, float v) {
  fdata[static_cast<size_t>(flat)] = store_float(type.elem.kind, v);
}

TensorValue random_tensor(TensorType t, Lcg& gen) {
  TensorValue v = TensorValue::zeros(std::move(t));
  std::int64_t n = v.count();
  for (std::int64_t i = 0; i < n; ++i) {
    std::uint64_t s = gen.next();
    if (v.is_float()) {
      float x = static_cast<float>(static_cast<std::int16_t>(s & 0xFFFF)) / 256.0f;
      v.set(i, x);
    } else {
      v.set(i, static_cast<std::int64_t>(s));
    }
  }
  return v;
}

namespace {

std::int64_t apply_i(EltOp op, std::int64_t a, std::int64_t b) {
  switch (op) {
    case EltOp::Add: return a + b;
    case EltOp::Sub: return a - b;
    case EltOp::Mul: return a * b;
    case EltOp::Max: return a > b ? a : b;
    case EltOp::Min: return a < b ? a : b;
  }
  return 0;
}

float apply_f(EltOp op, float a, float b) {
  switch (op) {
    case EltOp::Add: return a + b;
    case EltOp::Sub: return a - b;
    case EltOp::Mul: return a * b;
    case EltOp::Max: return a > b ? a : b;
    case EltOp::Min: return a < b ? a : b;
  }
  return 0;
}

std::int64_t apply_i(ReduceOp op, std::int64_t a, std::int64_t b) {
  switch (op) {
    case ReduceOp::Add: return a + b;
    case ReduceOp::Mul: return a * b;
    case ReduceOp::Max: return a > b ? a : b;
    case ReduceOp::Min: return a < b ? a : b;
  }
  return 0;
}

float apply_f(ReduceOp op, float a, float b) {
  switch (op) {
    case ReduceOp::Add: return a + b;
    case ReduceOp::Mul: return a * b;
    case ReduceOp::Max: return a > b ? a : b;
    case ReduceOp::Min: return a < b ? a : b;
  }
  return 0;
}

[[noreturn]] void shape_error(const char* what, const TensorValue& a, const TensorValue& b) {
  throw std::runtime_error(std::string(what) + ": " + a.type.str() + " vs " + b.type.str());
}

double as_double(const TensorValue& v, std::int64_t i) {
  return v.is_float() ? static_cast<double>(v.get_f(i)) : static_cast<double>(v.get_i(i));
}

}  // namespace

TensorValue eltwise(EltOp op, const TensorValue& a, const TensorValue& b) {
  bool a_scalar = a.type.rank() == 0;
  bool b_scalar = b.type.rank() == 0;
  const TensorValue& shaped = (a_scalar && !b_scalar) ? b : a;
  if (!a_scalar && !b_scalar && !(a.type.shape == b.type.shape))
    shape_error("eltwise shape", a, b);

  TensorValue out = TensorValue::zeros(TensorType{shaped.type.elem, shaped.type.shape});
  std::int64_t n = out.count();
  for (std::int64_t i = 0; i < n; ++i) {
    std::int64_t ia = a_scalar ? 0 : i;
    std::int64_t ib = b_scalar ? 0 : i;
    if (out.is_float()) {
      out.set(i, apply_f(op, static_cast<float>(as_double(a, ia)),
                         static_cast<float>(as_double(b, ib))));
    } else {
      std::int64_t x = a.is_float() ? static_cast<std::int64_t>(a.get_f(ia)) : a.get_i(ia);
      std::int64_t y = b.is_float() ? static_cast<std::int64_t>(b.get_f(ib)) : b.get_i(ib);
      out.set(i, apply_i(op, x, y));
    }
  }
  return out;
}

TensorValue matmul(const TensorValue& a, const TensorValue& b) {
  if (a.type.rank() != 2 || b.type.rank() != 2 || a.type.shape[1] != b.type.shape[0])
    shape_error("matmul shape", a, b);
  std::int64_t m = a.type.shape[0], k = a.type.shape[1], n = b.type.shape[1];
  TensorValue out = TensorValue::zeros(TensorType{a.type.elem, {m, n}});
  if (out.is_float()) {
    for (std::int64_t i = 0; i < m; ++i)
      for (std::int64_t j = 0; j < n; ++j) {
        float acc = 0.0f;  // accumulate in f32, truncate once at store
        for (std::int64_t kk = 0; kk < k; ++kk)
          acc += a.get_f(i * k + kk) * b.get_f(kk * n + j);
        out.set(i * n + j, acc);
      }
  } else {
    for (std::int64_t i = 0; i < m; ++i)
      for (std::int64_t j = 0; j < n; ++j) {
        std::int64_t acc = 0;
        for (std::int64_t kk = 0; kk < k; ++kk)
          acc += a.get_i(i * k + kk) * b.get_i(kk * n + j);
        out.set(i * n + j, acc);
      }
  }
  return out;
}

TensorValue reduce(ReduceOp op, int axis, const TensorValue& a) {
  int rank = a.type.rank();
  if (axis < 0 || axis >= rank) throw std::runtime_error("reduce axis out of range");
  std::vector<std::int64_t> out_shape = a.type.shape;
  std::int64_t extent = out_shape[static_cast<size_t>(axis)];
  out_shape.erase(out_shape.begin() + axis);
  TensorValue out = TensorValue::zeros(TensorType{a.type.elem, out_shape});

  std::int64_t outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= a.type.shape[static_cast<size_t>(d)];
  for (int d = axis + 1; d < rank; ++d) inner *= a.type.shape[static_cast<size_t>(d)];

  for (std::int64_t o = 0; o < outer; ++o)
    for (std::int64_t in = 0; in < inner; ++in) {
      if (out.is_float()) {
        float acc = a.get_f(o * extent * inner + in);
        for (std::int64_t e = 1; e < extent; ++e)
          acc = apply_f(op, acc, a.get_f((o * extent + e) * inner + in));
        out.set(o * inner + in, acc);
      } else {
        std::int64_t acc = a.get_i(o * extent * inner + in);
        for (std::int64_t e = 1; e < extent; ++e)
          acc = apply_i(op, acc, a.get_i((o * extent + e) * inner + in));
        out.set(o * inner + in, acc);
      }
    }
  return out;
}

TensorValue combine(ReduceOp op, const TensorValue& a, const TensorValue& b) {
  if (!(a.type.shape == b.type.shape)) shape_error("combine shape", a, b);
  TensorValue out = TensorValue::zeros(a.type);
  std::int64_t n = out.count();
  for (std::int64_t i = 0; i < n; ++i) {
    if (out.is_float())
      out.set(i, apply_f(op, a.get_f(i), b.get_f(i)));
    else
      out.set(i, apply_i(op, a.get_i(i), b.get_i(i)));
  }
  return out;
}

namespace {

void region_walk(const std::vector<std::int64_t>& shape, const Region& r,
                 const std::function<void(std::int64_t outer, std::int64_t inner)>& fn) {
  int rank = static_cast<int>(shape.size());
  std::vector<std::int64_t> idx(static_cast<size_t>(rank), 0);
  std::int64_t total = 1;
  for (const auto& [off, size] : r) {
    (void)off;
    total *= size;
  }
  for (std::int64_t c = 0; c < total; ++c) {
    std::int64_t outer = 0, inner = 0;
    for (int d = 0; d < rank; ++d) {
      outer = outer * shape[static_cast<size_t>(d)] + r[static_cast<size_t>(d)].first +
              idx[static_cast<size_t>(d)];
      inner = inner * r[static_cast<size_t>(d)].second + idx[static_cast<size_t>(d)];
    }
    fn(outer, inner);
    for (int d = rank - 1; d >= 0; --d) {
      if (++idx[static_cast<size_t>(d)] < r[static_cast<size_t>(d)].second) break;
      idx[static_cast<size_t>(d)] = 0;
    }
  }
}

}  // namespace

TensorValue read_region(const TensorValue& src, const Region& r) {
  if (static_cast<int>(r.size()) != src.type.rank())
    throw std::runtime_error("region rank mismatch");
  std::vector<std::int64_t> shape;
  for (const auto& [off, size] : r) {
    (void)off;
    shape.push_back(size);
  }
  TensorValue out = TensorValue::zeros(TensorType{src.type.elem, shape});
  region_walk(src.type.shape, r, [&](std::int64_t s, std::int64_t d) {
    if (src.is_float())
      out.fdata[static_cast<size_t>(d)] = src.get_f(s);
    else
      out.idata[static_cast<size_t>(d)] = src.get_i(s);
  });
  return out;
}

void write_region(TensorValue& dst, const Region& r, const TensorValue& src) {
  if (static_cast<int>(r.size()) != dst.type.rank())
    throw std::runtime_error("region rank mismatch");
  region_walk(dst.type.shape, r, [&](std::int64_t d, std::int64_t s) {
    if (dst.is_float())
      dst.fdata[static_cast<size_t>(d)] = store_float(dst.type.elem.kind, src.get_f(s));
    else
      dst.idata[static_cast<size_t>(d)] = wrap_int(dst.type.elem.kind, src.get_i(s));
  });
}

std::string digest(const TensorValue& v) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&](const void* p, size_t n) {
    const unsigned char* b = static_cast<const unsigned char*>(p);
    for (size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ull;
    }
  };
  std::string name = v.type.str();
  mix(name.data(), name.size());
  if (v.is_float())
    mix(v.fdata.data(), v.fdata.size() * sizeof(float));
  else
    mix(v.idata.data(), v.idata.size() * sizeof(std::int64_t));
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

std::string digest(const std::map<std::string, TensorValue>& named) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ull;
    }
  };
  for (const auto& [name, v] : named) {
    mix(name);
    mix(digest(v));
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

}  // namespace datoc
