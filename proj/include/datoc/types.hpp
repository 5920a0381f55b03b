// Semantic types: elements, tensors, stream types, layouts and effect sets.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace datoc {

enum class ElemKind { I4, I8, I16, I32, BF16, F32 };

struct ElemType {
  ElemKind kind = ElemKind::I32;

  int bitwidth() const;
  bool is_float() const { return kind == ElemKind::BF16 || kind == ElemKind::F32; }
  std::string name() const;
  bool operator==(const ElemType&) const = default;
};

std::optional<ElemType> elem_from_name(const std::string& name);

struct TensorType {
  ElemType elem;
  std::vector<std::int64_t> shape;  // empty = rank-0 scalar

  int rank() const { return static_cast<int>(shape.size()); }
  std::int64_t elem_count() const;
  std::int64_t byte_size() const { return elem_count() * ((elem.bitwidth() + 7) / 8); }
  std::string str() const;
  bool operator==(const TensorType&) const = default;
};

enum class AxisLabel { R, S };

// Per-axis layout label. device_axis is meaningful only for S.
struct AxisLayout {
  AxisLabel label = AxisLabel::R;
  int device_axis = -1;

  static AxisLayout replicated() { return {AxisLabel::R, -1}; }
  static AxisLayout sharded(int axis) { return {AxisLabel::S, axis}; }
  bool is_sharded() const { return label == AxisLabel::S; }
  bool operator==(const AxisLayout&) const = default;
};

struct LayoutType {
  std::vector<AxisLayout> axes;

  static LayoutType all_replicated(int rank) {
    return LayoutType{std::vector<AxisLayout>(static_cast<size_t>(rank), AxisLayout::replicated())};
  }
  int rank() const { return static_cast<int>(axes.size()); }
  bool all_r() const;
  std::vector<int> sharded_axes() const;  // device axes appearing as S
  std::string str() const;                // e.g. "S1S2", "RS0", "RR"
  bool operator==(const LayoutType&) const = default;
};

// Parses layout strings like "S1S2", "RS0", "S", "R".
// A bare "S" means S0.
std::optional<LayoutType> layout_from_string(const std::string& s);

enum class ReduceOp { Add, Max, Min, Mul };

const char* reduce_op_name(ReduceOp op);                       // "+", "max", "min", "*"
std::optional<ReduceOp> reduce_op_from_name(const std::string& s);

// Pending-collective effects: the set of reduction operators a value still
// owes across shards. Device axes are tracked per operator so that the
// allreduce lowering knows which mapping axes to combine over.
struct EffectSet {
  std::map<ReduceOp, std::set<int>> pending;

  bool empty() const { return pending.empty(); }
  std::set<ReduceOp> ops() const;
  void add(ReduceOp op, int device_axis) { pending[op].insert(device_axis); }
  // Removes op entirely; returns the device axes it covered (empty if absent).
  std::set<int> discharge(ReduceOp op);
  std::string str() const;
  bool operator==(const EffectSet&) const = default;
};

EffectSet effect_union(const EffectSet& a, const EffectSet& b);

struct StreamType {
  TensorType elem;
  int depth = 2;  // logical capacity in payload slots
  int pack = 1;   // elements bundled per transfer (cost model only)

  bool operator==(const StreamType&) const = default;
};

// Tile shape of a tensor under a layout on the given mapping extents:
// S axes are divided by their device-axis extent, R axes kept whole.
std::vector<std::int64_t> tile_shape(const TensorType& t, const LayoutType& l,
                                     const std::vector<std::int64_t>& extents);

}  // namespace datoc
