#include "datoc/kernel.hpp"

namespace datoc {

int KernelRegistry::register_kernel(KernelContract contract) {
  if (by_name_.count(contract.name)) throw DuplicateKernel(contract.name);
  if (contract.admissible_shapes.empty())
    throw std::invalid_argument("kernel contract needs at least one admissible shape: " +
                                contract.name);
  int handle = static_cast<int>(contracts_.size());
  by_name_.emplace(contract.name, handle);
  contracts_.push_back(std::move(contract));
  return handle;
}

const KernelContract* KernelRegistry::find(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) return nullptr;
  return &contracts_[static_cast<size_t>(it->second)];
}

namespace {

bool unify_operand(const OperandPattern& pat, const TensorType& t, ShapeBinding& binding) {
  if (!(pat.elem == t.elem)) return false;
  if (pat.shape.size() != t.shape.size()) return false;
  for (size_t i = 0; i < pat.shape.size(); ++i) {
    const auto& d = pat.shape[i];
    std::int64_t got = t.shape[i];
    if (!d.wildcard) {
      if (d.size != got) return false;
      continue;
    }
    if (d.multiple_of > 1 && got % d.multiple_of != 0) return false;
    auto it = binding.find(d.name);
    if (it == binding.end())
      binding[d.name] = got;
    else if (it->second != got)
      return false;
  }
  return true;
}

std::string op_kernel_name(const Expr& op) {
  switch (op.kind) {
    case ExprKind::Matmul: return "matmul";
    case ExprKind::Eltwise: return std::string("eltwise_") + elt_op_name(op.elt_op);
    case ExprKind::KernelCall: return op.name;
    default: return "";
  }
}

}  // namespace

std::optional<KernelMatch> match_kernel(const Expr& op,
                                        const std::vector<TensorType>& operand_types,
                                        const KernelRegistry& registry) {
  std::string want = op_kernel_name(op);
  if (want.empty()) return std::nullopt;
  for (const auto& c : registry.contracts()) {
    if (c.name != want) continue;
    for (size_t v = 0; v < c.admissible_shapes.size(); ++v) {
      const auto& variant = c.admissible_shapes[v];
      if (variant.size() != operand_types.size()) continue;
      ShapeBinding binding;
      bool ok = true;
      for (size_t i = 0; i < variant.size() && ok; ++i)
        ok = unify_operand(variant[i], operand_types[i], binding);
      if (!ok) continue;
      // Required tile sizes must divide the concrete operand dims.
      if (!c.required_layout.empty()) {
        for (size_t i = 0; i < operand_types.size() && ok; ++i) {
          if (i >= c.required_layout.size()) break;
          const auto& req = c.required_layout[i];
          for (size_t d = 0; d < req.tile.size() && ok; ++d) {
            if (req.tile[d] <= 0) continue;
            if (d >= operand_types[i].shape.size() ||
                operand_types[i].shape[d] % req.tile[d] != 0)
              ok = false;
          }
        }
        if (!ok) continue;
      }
      return KernelMatch{&c, static_cast<int>(v), std::move(binding)};
    }
  }
  return std::nullopt;
}

}  // namespace datoc
