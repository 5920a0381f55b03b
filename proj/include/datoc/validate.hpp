#pragma once

#include "datoc/ast.hpp"
#include "datoc/diag.hpp"

namespace datoc {

// Structural validation: type invariants, layout well-formedness, shape
// divisibility, device-axis bounds, affine stream indices, buffer-sharing
// rules. Returns diagnostics; an empty error set means structurally valid.
Diagnostics validate_program(const Program& p);

}  // namespace datoc
