// Intra-PE layout algebra: explicit (offsets, sizes, strides) maps,
// symbolic composition with exact small-domain affinity checking,
// normalization & collapse of transform chains, and DMA-aware hoisting
// that splits a chain into a descriptor-executable prefix and an on-core
// residual.
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace datoc {

// addr(i) = sum_d (offsets[d] + i_d) * strides[d], i_d in [0, sizes[d]).
struct LayoutMap {
  std::vector<std::int64_t> offsets;
  std::vector<std::int64_t> sizes;
  std::vector<std::int64_t> strides;

  int rank() const { return static_cast<int>(sizes.size()); }
  std::int64_t domain_size() const;
  std::int64_t addr(const std::vector<std::int64_t>& index) const;
  // Addresses in row-major index order over the whole domain.
  std::vector<std::int64_t> enumerate() const;

  static LayoutMap identity(const std::vector<std::int64_t>& shape);
  bool is_identity() const;
  bool operator==(const LayoutMap&) const = default;
};

// Composition "apply a then b": b's addresses index a's view row-major.
// Returns nullopt when the composite is not expressible as a single map
// (kept as a two-step chain by callers).
std::optional<LayoutMap> compose(const LayoutMap& a, const LayoutMap& b);

// -- transform chains --------------------------------------------------------

enum class TransformKind { Tile, Pack, Transpose, Slice, Reshape, Collapsed };

struct Transform {
  TransformKind kind = TransformKind::Collapsed;
  int axis = 0;                         // Tile, Pack
  std::int64_t factor = 1;              // Tile
  std::vector<int> perm;                // Transpose
  std::vector<std::int64_t> offsets;    // Slice
  std::vector<std::int64_t> sizes;      // Slice, Reshape (target shape)
  LayoutMap map;                        // Collapsed

  static Transform tile(int axis, std::int64_t factor);
  static Transform pack(int axis);  // merges axis and axis + 1
  static Transform transpose(std::vector<int> perm);
  static Transform slice(std::vector<std::int64_t> offsets, std::vector<std::int64_t> sizes);
  static Transform reshape(std::vector<std::int64_t> shape);
  static Transform collapsed(LayoutMap m);
};

struct TransformChain {
  std::vector<std::int64_t> input_shape;
  std::vector<Transform> steps;
};

struct DivisibilityError {
  int step = -1;
  std::string message;
};

struct ChainResult {
  std::optional<TransformChain> chain;
  std::optional<DivisibilityError> error;
  bool ok() const { return chain.has_value(); }
};

// The map a single step induces over its input view; also yields the
// output shape. Returns an error message on rank/divisibility violations.
std::optional<LayoutMap> step_map(const Transform& t,
                                  const std::vector<std::int64_t>& in_shape,
                                  std::string* error);

// Output shape of a whole chain (validating as it goes).
std::optional<std::vector<std::int64_t>> chain_output_shape(const TransformChain& c,
                                                            std::string* error);

// Full chain as one index map when every step composes; nullopt otherwise.
std::optional<LayoutMap> chain_to_map(const TransformChain& c);

// Index-map oracle: source address for every output index, by stepwise
// application (independent of compose()).
std::vector<std::int64_t> apply_chain_pointwise(const TransformChain& c);

// Canonicalization: maximal left-fused runs of affine-composable steps,
// each materialized as a single collapsed map; identity runs vanish.
// Idempotent; never longer than the input.
ChainResult normalize(const TransformChain& c);

// -- DMA-aware hoisting ------------------------------------------------------

struct DmaCapability {
  int max_dims = 3;
  std::int64_t stride_min = 0;
  std::int64_t stride_max = 1 << 20;
  std::int64_t burst_alignment = 1;  // base address multiple, in elements
  bool supports_transpose2d = true;
  // Hardware-specific bank-mapping legality; always true by default.
  std::function<bool(const LayoutMap&)> bank_ok;
};

struct HoistResult {
  std::vector<LayoutMap> descriptors;
  TransformChain residual;
};

// Splits a normalized chain into descriptors executable in flight and an
// on-core residual; descriptors then residual reproduce the chain exactly.
// Worst case: no descriptors, full residual.
HoistResult hoist_to_dma(const TransformChain& chain, const DmaCapability& cap);

// Whether a single map fits the capability (after merging contiguous dims).
bool dma_expressible(const LayoutMap& m, const DmaCapability& cap);

nlohmann::ordered_json to_json(const LayoutMap& m);
nlohmann::ordered_json to_json(const TransformChain& c);

}  // namespace datoc
