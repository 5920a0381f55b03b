// Bundle/chain rewrites with architecture-aware legality, the
// branch-and-reduce mapping search, and physical placement.
#pragma once

#include <stdexcept>

#include "datoc/fabric.hpp"
#include "datoc/vmg.hpp"

namespace datoc {

struct PortPressure {
  int ins = 0;
  int outs = 0;
};

// Coarse per-node global port accounting: inter-node stream links grouped
// by (peer node, stream array), DMA argument roles grouped positionally and
// maximized over chain segments (successive segments reuse ports across
// epochs).
PortPressure node_port_pressure(const Vmg& g, int node_index);

struct LegalityResult {
  bool ok = false;
  std::string reason;
};

LegalityResult is_valid_bundle(const Vmg& g, const std::vector<std::string>& node_ids,
                               const FabricConfig& fabric);
LegalityResult is_valid_chain(const Vmg& g, const std::string& u, const std::string& v,
                              const FabricConfig& fabric);

struct IllegalRewrite : std::runtime_error {
  explicit IllegalRewrite(const std::string& why) : std::runtime_error(why) {}
};

Vmg apply_bundle(const Vmg& g, const std::vector<std::string>& node_ids);
Vmg apply_chain(const Vmg& g, const std::string& u, const std::string& v);

// Deadlock-freedom of the rewritten graph at shot granularity: program
// order within nodes, data edges put_k -> get_k and capacity edges
// get_k -> put_{k+depth} must form a DAG.
bool events_acyclic(const Vmg& g);

struct Application {
  enum class Kind { Bundle, Chain };
  Kind kind = Kind::Bundle;
  std::vector<std::string> nodes;
};

struct MapState {
  Vmg vmg;
  std::vector<Application> applied;
  int v_node_number = 0;
  std::map<std::string, PortPressure> port_pressure;
  std::int64_t estimated_cycles = -1;  // filled by select_best
};

struct NoFeasibleMapping : std::runtime_error {
  explicit NoFeasibleMapping(const std::string& why) : std::runtime_error(why) {}
};

struct PlacementError : std::runtime_error {
  explicit PlacementError(const std::string& why) : std::runtime_error(why) {}
};

struct PlacedNode {
  std::string node_id;
  TileCoord tile;
};

struct PhysicalMapping {
  Vmg vmg;
  FabricConfig fabric;
  std::vector<PlacedNode> placement;  // one entry per node, injective tiles
  std::int64_t estimated_cycles = -1;

  int tile_of_node(int node_index) const;
  int tile_of_unit(const std::string& unit_id) const;
};

// Row-major placement by topological layer. Throws PlacementError when the
// graph does not fit or a node exceeds per-tile memory.
PhysicalMapping place_topological(const Vmg& g, const FabricConfig& fabric);

// Replays an application list against a root graph.
Vmg replay(const Vmg& root, const std::vector<Application>& applied);

// Structural graph equality (node membership and edges).
bool same_graph(const Vmg& a, const Vmg& b);

struct SearchStats {
  std::int64_t states_explored = 0;
  std::int64_t states_deduped = 0;
};

// Depth-first branch-and-reduce search (priority-ordered children); stops
// after `threshold` feasible candidates. Throws NoFeasibleMapping when the
// tree is exhausted with zero candidates.
std::vector<MapState> search_mapping(const Vmg& g, const FabricConfig& fabric, int budget,
                                     int threshold = 16, SearchStats* stats = nullptr);

// Lexicographic candidate priority, exposed for tests: higher is better.
// (edges internalized, -resulting max port pressure, tie on ids.)
std::tuple<int, int, std::string, std::string> priority_key(const Vmg& g,
                                                            const Application& app);

}  // namespace datoc
