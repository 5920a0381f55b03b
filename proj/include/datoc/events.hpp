// Task-instance instantiation and static event extraction. Used by the
// stream checker (token scheduling), the mapping legality analysis and the
// DMA pass. Loops with constant bounds are unrolled up to a cap; larger
// loops fall back to a steady-state one-iteration summary.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "datoc/ast.hpp"
#include "datoc/diag.hpp"

namespace datoc {

inline constexpr std::int64_t kEventCap = 1 << 16;

struct StreamInstance {
  int stream = -1;        // index into Program::streams
  std::int64_t flat = 0;  // row-major index into the grid
  auto operator<=>(const StreamInstance&) const = default;
};

std::string stream_instance_name(const Program& p, StreamInstance si);

struct Event {
  enum class Kind { Put, Get } kind;
  StreamInstance inst;
  SourceSpan span;
  int get_id = -1;  // sequential id among Get events
};

// One parameter access with a tile-relative region; empty ranges = full tile.
struct RegionAccess {
  std::string param;
  bool write = false;
  std::vector<std::pair<std::int64_t, std::int64_t>> ranges;  // (offset, size) per dim
  int seq = 0;  // program order of writes within the unit
};

struct UnitProfile {
  std::vector<Event> events;
  std::vector<RegionAccess> accesses;
  std::map<int, int> future_uses;       // get_id -> use count
  std::vector<SourceSpan> get_spans;    // get_id -> source span
  bool summarized = false;              // some loop was summarized
  Diagnostics diags;
  bool ok() const { return !has_error(diags); }
};

// Substitutes tid(axis) with coord[axis] and folds integer constants.
std::vector<StmtPtr> instantiate_body(const TaskDef& t, const std::vector<std::int64_t>& coord);

// Bottom-up integer constant folding over elementwise operators.
ExprPtr fold_constants(ExprPtr e);

UnitProfile extract_unit_profile(const std::vector<StmtPtr>& body, const Program& p,
                                 std::int64_t cap = kEventCap);

// All coordinates of a mapping lattice in lexicographic order.
std::vector<std::vector<std::int64_t>> enumerate_coords(const std::vector<std::int64_t>& extents);

std::string coord_str(const std::vector<std::int64_t>& coord);

}  // namespace datoc
