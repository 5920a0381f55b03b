#include <algorithm>
#include <functional>
#include <queue>

#include "datoc/mapping.hpp"

namespace datoc {

namespace {

// Topological layer per node; strongly connected components (stream cycles
// between nodes are legal) share a layer.
std::vector<int> node_layers(const Vmg& g) {
  size_t n = g.nodes.size();
  auto u2n = g.unit_to_node();
  std::vector<std::vector<int>> adj(n);
  for (const auto& e : g.edges) {
    auto s = u2n.find(e.src_unit);
    auto d = u2n.find(e.dst_unit);
    if (s == u2n.end() || d == u2n.end() || s->second == d->second) continue;
    adj[static_cast<size_t>(s->second)].push_back(d->second);
  }

  // Tarjan SCC.
  std::vector<int> comp(n, -1), low(n, 0), num(n, -1), stk;
  std::vector<bool> on_stack(n, false);
  int counter = 0, ncomp = 0;
  std::function<void(int)> dfs = [&](int v) {
    num[static_cast<size_t>(v)] = low[static_cast<size_t>(v)] = counter++;
    stk.push_back(v);
    on_stack[static_cast<size_t>(v)] = true;
    for (int w : adj[static_cast<size_t>(v)]) {
      if (num[static_cast<size_t>(w)] < 0) {
        dfs(w);
        low[static_cast<size_t>(v)] = std::min(low[static_cast<size_t>(v)], low[static_cast<size_t>(w)]);
      } else if (on_stack[static_cast<size_t>(w)]) {
        low[static_cast<size_t>(v)] = std::min(low[static_cast<size_t>(v)], num[static_cast<size_t>(w)]);
      }
    }
    if (low[static_cast<size_t>(v)] == num[static_cast<size_t>(v)]) {
      while (true) {
        int w = stk.back();
        stk.pop_back();
        on_stack[static_cast<size_t>(w)] = false;
        comp[static_cast<size_t>(w)] = ncomp;
        if (w == v) break;
      }
      ++ncomp;
    }
  };
  for (size_t v = 0; v < n; ++v)
    if (num[v] < 0) dfs(static_cast<int>(v));

  // Longest-path layering over the condensation.
  std::vector<std::set<int>> cadj(static_cast<size_t>(ncomp));
  std::vector<int> indeg(static_cast<size_t>(ncomp), 0);
  for (size_t v = 0; v < n; ++v)
    for (int w : adj[v]) {
      int a = comp[v], b = comp[static_cast<size_t>(w)];
      if (a != b && cadj[static_cast<size_t>(a)].insert(b).second)
        indeg[static_cast<size_t>(b)]++;
    }
  std::vector<int> clayer(static_cast<size_t>(ncomp), 0);
  std::queue<int> q;
  for (int c = 0; c < ncomp; ++c)
    if (indeg[static_cast<size_t>(c)] == 0) q.push(c);
  while (!q.empty()) {
    int c = q.front();
    q.pop();
    for (int d : cadj[static_cast<size_t>(c)]) {
      clayer[static_cast<size_t>(d)] =
          std::max(clayer[static_cast<size_t>(d)], clayer[static_cast<size_t>(c)] + 1);
      if (--indeg[static_cast<size_t>(d)] == 0) q.push(d);
    }
  }
  std::vector<int> layer(n, 0);
  for (size_t v = 0; v < n; ++v) layer[v] = clayer[static_cast<size_t>(comp[v])];
  return layer;
}

}  // namespace

PhysicalMapping place_topological(const Vmg& g, const FabricConfig& fabric) {
  if (g.node_count() > fabric.tile_count())
    throw PlacementError("graph needs " + std::to_string(g.node_count()) + " tiles but the fabric has " +
                         std::to_string(fabric.tile_count()));
  for (const auto& n : g.nodes) {
    for (const auto& u : n.shots()) {
      if (u->local_bytes > fabric.local_mem_bytes)
        throw PlacementError("unit " + u->id + " needs " + std::to_string(u->local_bytes) +
                             " bytes of tile memory (limit " +
                             std::to_string(fabric.local_mem_bytes) + ")");
    }
  }

  std::vector<int> layer = node_layers(g);
  std::vector<int> order(g.nodes.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return std::tie(layer[static_cast<size_t>(a)], g.nodes[static_cast<size_t>(a)].id) <
           std::tie(layer[static_cast<size_t>(b)], g.nodes[static_cast<size_t>(b)].id);
  });

  PhysicalMapping m;
  m.vmg = g;
  m.fabric = fabric;
  m.placement.resize(g.nodes.size());
  int slot = 0;
  for (int ni : order) {
    TileCoord t{slot / fabric.cols, slot % fabric.cols};
    m.placement[static_cast<size_t>(ni)] = PlacedNode{g.nodes[static_cast<size_t>(ni)].id, t};
    ++slot;
  }
  return m;
}

}  // namespace datoc
