// Concrete tensor values with per-kind storage semantics: integer kinds
// wrap two's-complement on store, bf16 is f32 truncated to an 8-bit
// mantissa on every store.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "datoc/ast.hpp"
#include "datoc/types.hpp"

namespace datoc {

struct TensorValue {
  TensorType type;
  std::vector<std::int64_t> idata;  // integer kinds
  std::vector<float> fdata;         // float kinds

  bool is_float() const { return type.elem.is_float(); }
  std::int64_t count() const { return type.elem_count(); }

  static TensorValue zeros(TensorType t);
  static TensorValue scalar(ElemType elem, double v);

  std::int64_t get_i(std::int64_t flat) const { return idata[static_cast<size_t>(flat)]; }
  float get_f(std::int64_t flat) const { return fdata[static_cast<size_t>(flat)]; }
  void set(std::int64_t flat, std::int64_t v);
  void set(std::int64_t flat, float v);

  bool operator==(const TensorValue&) const = default;
};

// Store conversion: wraps integers to the kind's width, truncates bf16.
std::int64_t wrap_int(ElemKind kind, std::int64_t v);
float store_float(ElemKind kind, float v);

// Deterministic fill from the documented 64-bit LCG. The state is advanced
// once per element; integers take the low bits two's-complement, floats
// take (int16)(low 16 bits) / 256.0.
struct Lcg {
  std::uint64_t state = 0;
  explicit Lcg(std::uint64_t seed) : state(seed) {}
  std::uint64_t next() {
    state = state * 6364136223846793005ull + 1442695040888963407ull;
    return state;
  }
};

TensorValue random_tensor(TensorType t, Lcg& gen);

// Elementwise with scalar broadcast (either side rank-0 or scalar const).
TensorValue eltwise(EltOp op, const TensorValue& a, const TensorValue& b);
TensorValue matmul(const TensorValue& a, const TensorValue& b);
TensorValue reduce(ReduceOp op, int axis, const TensorValue& a);
TensorValue combine(ReduceOp op, const TensorValue& a, const TensorValue& b);  // pointwise

// Region = per-dim (offset, size) in the source tensor.
using Region = std::vector<std::pair<std::int64_t, std::int64_t>>;

TensorValue read_region(const TensorValue& src, const Region& r);
void write_region(TensorValue& dst, const Region& r, const TensorValue& src);

std::string digest(const TensorValue& v);  // FNV-1a hex over canonical bytes
std::string digest(const std::map<std::string, TensorValue>& named);

}  // namespace datoc
