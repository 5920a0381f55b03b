// Kernel contract registry: admissible shapes, required layouts and cost
// hints for library kernels matched during lowering and timing.
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "datoc/ast.hpp"
#include "datoc/types.hpp"

namespace datoc {

// One dimension of a shape pattern: a concrete size or a named wildcard.
struct DimPattern {
  bool wildcard = false;
  std::int64_t size = 0;   // concrete size when !wildcard
  std::string name;        // wildcard name, e.g. "m"
  std::int64_t multiple_of = 1;  // divisibility requirement for wildcards

  static DimPattern fixed(std::int64_t n) { return {false, n, "", 1}; }
  static DimPattern any(std::string name, std::int64_t multiple = 1) {
    return {true, 0, std::move(name), multiple};
  }
};

using ShapePattern = std::vector<DimPattern>;  // one per operand dimension

struct OperandPattern {
  ElemType elem;
  ShapePattern shape;
};

// Required operand layout, in the fine-grained (intra-PE) sense: tile sizes
// per dimension and pack factor. Zero tile size means "no requirement".
struct OperandLayoutReq {
  std::vector<std::int64_t> tile;  // per-dim tile size; empty = none
  int pack = 1;
};

using ShapeBinding = std::map<std::string, std::int64_t>;

struct KernelContract {
  std::string name;
  std::vector<std::vector<OperandPattern>> admissible_shapes;  // variants
  std::vector<OperandLayoutReq> required_layout;               // per operand
  std::optional<OperandPattern> result;  // result shape over the same wildcards
  std::function<std::int64_t(const ShapeBinding&)> latency_cycles;
  int initiation_interval = 1;
};

struct DuplicateKernel : std::runtime_error {
  explicit DuplicateKernel(const std::string& name)
      : std::runtime_error("kernel already registered: " + name) {}
};

struct KernelMatch {
  const KernelContract* contract = nullptr;
  int variant = 0;
  ShapeBinding binding;
};

class KernelRegistry {
 public:
  // Returns the handle (insertion index).
  int register_kernel(KernelContract contract);

  const KernelContract* find(const std::string& name) const;
  const std::vector<KernelContract>& contracts() const { return contracts_; }

 private:
  std::vector<KernelContract> contracts_;  // insertion order
  std::map<std::string, int> by_name_;
};

// Matches an op (Matmul/Eltwise/KernelCall) with concrete operand types
// against the registry; first contract in insertion order wins.
std::optional<KernelMatch> match_kernel(const Expr& op,
                                        const std::vector<TensorType>& operand_types,
                                        const KernelRegistry& registry);

}  // namespace datoc
