// Affine forms over tid components and loop induction variables, used for
// stream index resolution and slice bound checking.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "datoc/ast.hpp"

namespace datoc {

struct AffineVar {
  bool is_tid = false;
  int tid_axis = -1;
  std::string iv;
  auto operator<=>(const AffineVar&) const = default;
};

struct AffineForm {
  std::int64_t constant = 0;
  std::map<AffineVar, std::int64_t> coeffs;

  bool is_const() const { return coeffs.empty(); }
};

// Extracts an affine form where variables are tid(axis) references and the
// loop ivs named in `ivs`. Returns nullopt when the expression is not
// affine (products of variables, gets, slices, params, ...).
std::optional<AffineForm> extract_affine(const Expr& e, const std::map<std::string, bool>& ivs);

// Evaluates with the given bindings; unbound variables are an error.
std::int64_t eval_affine(const AffineForm& f,
                         const std::map<AffineVar, std::int64_t>& binding);

}  // namespace datoc
