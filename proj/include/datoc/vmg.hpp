// Virtual mapping graph: one node per task instance, stream edges wired
// from put/get resolution, reduction edges synthesized from allreduce
// sites. Nodes hold immutable units; bundle/chain reshape node membership.
#pragma once

#include <memory>
#include <optional>

#include "datoc/ast.hpp"
#include "datoc/diag.hpp"
#include "datoc/events.hpp"
#include "datoc/typecheck.hpp"
#include "datoc/value.hpp"

namespace datoc {

// Per-dim (offset, size) in the global tensor frame.
struct TileRegion {
  std::string param;
  Region region;

  std::int64_t elements() const {
    std::int64_t n = 1;
    for (const auto& [off, size] : region) {
      (void)off;
      n *= size;
    }
    return n;
  }
};

// Computes the tile region a task instance owns for a parameter.
TileRegion shard_region(const std::string& param, const TensorType& type,
                        const LayoutType& layout, const std::vector<std::int64_t>& extents,
                        const std::vector<std::int64_t>& coord);

// One task instance (or synthesized combine) with its closed body.
struct Unit {
  std::string id;                   // stable unique id, e.g. "gemm@(0,0,1)"
  std::string task;                 // owning task (param table, mapping extents)
  std::vector<std::int64_t> coord;  // representative instance coordinate
  bool is_combine = false;
  std::vector<StmtPtr> body;
  UnitProfile profile;       // events + region accesses
  std::string body_key;      // canonical body for isomorphism checks
  std::int64_t local_bytes = 0;  // per-shot scratch footprint estimate
};

using UnitPtr = std::shared_ptr<const Unit>;

// Parallel replicas merged by bundle; executed one shot per unit.
struct Stage {
  std::vector<UnitPtr> units;
};

// A virtual (and eventually physical) node: stages execute in order.
struct Node {
  std::string id;  // smallest member unit id
  std::vector<Stage> stages;

  int shot_count() const {
    int n = 0;
    for (const auto& s : stages) n += static_cast<int>(s.units.size());
    return n;
  }
  // Units in execution order (stage-major).
  std::vector<UnitPtr> shots() const;
};

struct VEdge {
  enum class Kind { Stream, Reduction };
  Kind kind = Kind::Stream;
  ReduceOp reduce_op = ReduceOp::Add;
  StreamInstance inst;
  std::string src_unit;
  std::string dst_unit;
  TensorType payload;
};

struct Vmg {
  std::shared_ptr<const Program> program;  // includes synthetic reduction streams
  std::vector<Node> nodes;
  std::vector<VEdge> edges;
  std::map<int, ReduceOp> reduction_streams;  // stream index -> combine op

  int node_count() const { return static_cast<int>(nodes.size()); }
  // unit id -> node index; rebuilt O(units).
  std::map<std::string, int> unit_to_node() const;
  const TaskDef* task_of(const Unit& u) const { return program->find_task(u.task); }
  std::vector<std::int64_t> extents_of(const Unit& u) const;
};

struct VmgBuildResult {
  std::optional<Vmg> vmg;
  Diagnostics diags;
  bool ok() const { return vmg.has_value() && !has_error(diags); }
};

// Instantiates the mapping lattice of every task. Precondition: validation
// and both checkers accepted (awaits inserted).
VmgBuildResult build_vmg(const Program& p);

// Rewrites allreduce sites into explicit binary reduction trees with
// synthesized combine nodes, using the device axes recorded per site.
Vmg lower_allreduce(const Vmg& g, const LayoutReport& layouts);

std::string to_dot(const Vmg& g);
nlohmann::ordered_json vmg_to_json(const Vmg& g);

}  // namespace datoc
