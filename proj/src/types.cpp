#include "datoc/types.hpp"

#include <sstream>

namespace datoc {

int ElemType::bitwidth() const {
  switch (kind) {
    case ElemKind::I4: return 4;
    case ElemKind::I8: return 8;
    case ElemKind::I16: return 16;
    case ElemKind::I32: return 32;
    case ElemKind::BF16: return 16;
    case ElemKind::F32: return 32;
  }
  return 32;
}

std::string ElemType::name() const {
  switch (kind) {
    case ElemKind::I4: return "i4";
    case ElemKind::I8: return "i8";
    case ElemKind::I16: return "i16";
    case ElemKind::I32: return "i32";
    case ElemKind::BF16: return "bf16";
    case ElemKind::F32: return "f32";
  }
  return "i32";
}

std::optional<ElemType> elem_from_name(const std::string& name) {
  if (name == "i4") return ElemType{ElemKind::I4};
  if (name == "i8") return ElemType{ElemKind::I8};
  if (name == "i16") return ElemType{ElemKind::I16};
  if (name == "i32") return ElemType{ElemKind::I32};
  if (name == "bf16") return ElemType{ElemKind::BF16};
  if (name == "f32") return ElemType{ElemKind::F32};
  return std::nullopt;
}

std::int64_t TensorType::elem_count() const {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string TensorType::str() const {
  std::ostringstream os;
  os << elem.name();
  if (!shape.empty()) {
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) {
      if (i) os << ", ";
      os << shape[i];
    }
    os << "]";
  }
  return os.str();
}

bool LayoutType::all_r() const {
  for (const auto& a : axes)
    if (a.is_sharded()) return false;
  return true;
}

std::vector<int> LayoutType::sharded_axes() const {
  std::vector<int> out;
  for (const auto& a : axes)
    if (a.is_sharded()) out.push_back(a.device_axis);
  return out;
}

std::string LayoutType::str() const {
  std::string s;
  for (const auto& a : axes) {
    if (a.is_sharded())
      s += "S" + std::to_string(a.device_axis);
    else
      s += "R";
  }
  return s;
}

std::optional<LayoutType> layout_from_string(const std::string& s) {
  LayoutType l;
  size_t i = 0;
  while (i < s.size()) {
    char c = s[i++];
    if (c == 'R') {
      l.axes.push_back(AxisLayout::replicated());
    } else if (c == 'S') {
      int axis = 0;
      bool digits = false;
      while (i < s.size() && s[i] >= '0' && s[i] <= '9') {
        axis = axis * 10 + (s[i] - '0');
        ++i;
        digits = true;
      }
      (void)digits;  // bare "S" means device axis 0
      l.axes.push_back(AxisLayout::sharded(axis));
    } else {
      return std::nullopt;
    }
  }
  return l;
}

const char* reduce_op_name(ReduceOp op) {
  switch (op) {
    case ReduceOp::Add: return "+";
    case ReduceOp::Max: return "max";
    case ReduceOp::Min: return "min";
    case ReduceOp::Mul: return "*";
  }
  return "+";
}

std::optional<ReduceOp> reduce_op_from_name(const std::string& s) {
  if (s == "+") return ReduceOp::Add;
  if (s == "max") return ReduceOp::Max;
  if (s == "min") return ReduceOp::Min;
  if (s == "*") return ReduceOp::Mul;
  return std::nullopt;
}

std::set<ReduceOp> EffectSet::ops() const {
  std::set<ReduceOp> s;
  for (const auto& [op, _] : pending) s.insert(op);
  return s;
}

std::set<int> EffectSet::discharge(ReduceOp op) {
  auto it = pending.find(op);
  if (it == pending.end()) return {};
  std::set<int> axes = it->second;
  pending.erase(it);
  return axes;
}

std::string EffectSet::str() const {
  if (pending.empty()) return "{}";
  std::string s = "{";
  bool first = true;
  for (const auto& [op, _] : pending) {
    if (!first) s += ",";
    s += reduce_op_name(op);
    first = false;
  }
  return s + "}";
}

EffectSet effect_union(const EffectSet& a, const EffectSet& b) {
  EffectSet out = a;
  for (const auto& [op, axes] : b.pending) out.pending[op].insert(axes.begin(), axes.end());
  return out;
}

std::vector<std::int64_t> tile_shape(const TensorType& t, const LayoutType& l,
                                     const std::vector<std::int64_t>& extents) {
  std::vector<std::int64_t> out = t.shape;
  for (size_t i = 0; i < out.size() && i < l.axes.size(); ++i) {
    const auto& a = l.axes[i];
    if (a.is_sharded() && a.device_axis >= 0 &&
        a.device_axis < static_cast<int>(extents.size())) {
      out[i] /= extents[static_cast<size_t>(a.device_axis)];
    }
  }
  return out;
}

}  // namespace datoc
