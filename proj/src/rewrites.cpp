#include <algorithm>
#include <queue>
#include <sstream>

#include "datoc/mapping.hpp"

namespace datoc {

int PhysicalMapping::tile_of_node(int node_index) const {
  const auto& pn = placement[static_cast<size_t>(node_index)];
  return pn.tile.row * fabric.cols + pn.tile.col;
}

int PhysicalMapping::tile_of_unit(const std::string& unit_id) const {
  auto u2n = vmg.unit_to_node();
  auto it = u2n.find(unit_id);
  if (it == u2n.end()) return -1;
  return tile_of_node(it->second);
}

namespace {

// Ordered distinct parameter roles of a unit (first-use order).
std::vector<std::string> param_roles(const Unit& u, bool writes) {
  std::vector<std::string> roles;
  for (const auto& a : u.profile.accesses) {
    if (a.write != writes) continue;
    if (std::find(roles.begin(), roles.end(), a.param) == roles.end()) roles.push_back(a.param);
  }
  return roles;
}

int stage_dma_roles(const Stage& st, bool writes) {
  int n = 0;
  for (const auto& u : st.units)
    n = std::max(n, static_cast<int>(param_roles(*u, writes).size()));
  return n;
}

}  // namespace

PortPressure node_port_pressure(const Vmg& g, int node_index) {
  const Node& n = g.nodes[static_cast<size_t>(node_index)];
  auto u2n = g.unit_to_node();

  std::set<std::pair<int, int>> in_links, out_links;  // (peer node, stream decl)
  for (const auto& e : g.edges) {
    int src = u2n.count(e.src_unit) ? u2n.at(e.src_unit) : -1;
    int dst = u2n.count(e.dst_unit) ? u2n.at(e.dst_unit) : -1;
    if (src == node_index && dst != node_index && dst >= 0)
      out_links.insert({dst, e.inst.stream});
    if (dst == node_index && src != node_index && src >= 0)
      in_links.insert({src, e.inst.stream});
  }

  int dma_in = 0, dma_out = 0;
  for (const auto& st : n.stages) {
    dma_in = std::max(dma_in, stage_dma_roles(st, /*writes=*/false));
    dma_out = std::max(dma_out, stage_dma_roles(st, /*writes=*/true));
  }

  PortPressure p;
  p.ins = static_cast<int>(in_links.size()) + dma_in;
  p.outs = static_cast<int>(out_links.size()) + dma_out;
  return p;
}

// ---------------------------------------------------------------------------
// Event graph acyclicity (shot granularity, with FIFO capacity edges)
// ---------------------------------------------------------------------------

bool events_acyclic(const Vmg& g) {
  std::vector<std::vector<int>> succ;
  std::map<StreamInstance, std::vector<int>> puts, gets;

  int vid = 0;
  for (const auto& n : g.nodes) {
    int prev = -1;
    for (const auto& u : n.shots()) {
      for (const auto& ev : u->profile.events) {
        succ.emplace_back();
        if (prev >= 0) succ[static_cast<size_t>(prev)].push_back(vid);
        if (ev.kind == Event::Kind::Put)
          puts[ev.inst].push_back(vid);
        else
          gets[ev.inst].push_back(vid);
        prev = vid;
        ++vid;
      }
    }
  }
  for (const auto& [inst, ps] : puts) {
    const auto git = gets.find(inst);
    size_t gcount = git == gets.end() ? 0 : git->second.size();
    std::int64_t depth = g.program->streams[static_cast<size_t>(inst.stream)].type.depth;
    for (size_t k = 0; k < ps.size(); ++k) {
      if (k < gcount) succ[static_cast<size_t>(ps[k])].push_back(git->second[k]);
      // put_{k} needs the slot freed by get_{k-depth}.
      if (k >= static_cast<size_t>(depth)) {
        size_t need = k - static_cast<size_t>(depth);
        if (need < gcount)
          succ[static_cast<size_t>(git->second[need])].push_back(ps[k]);
        else
          return false;  // slot can never free: blocked forever
      }
    }
  }

  std::vector<int> indeg(static_cast<size_t>(vid), 0);
  for (const auto& ss : succ)
    for (int s : ss) indeg[static_cast<size_t>(s)]++;
  std::queue<int> q;
  for (int v = 0; v < vid; ++v)
    if (indeg[static_cast<size_t>(v)] == 0) q.push(v);
  int seen = 0;
  while (!q.empty()) {
    int v = q.front();
    q.pop();
    ++seen;
    for (int s : succ[static_cast<size_t>(v)])
      if (--indeg[static_cast<size_t>(s)] == 0) q.push(s);
  }
  return seen == vid;
}

// ---------------------------------------------------------------------------
// Rewrites
// ---------------------------------------------------------------------------

namespace {

int find_node(const Vmg& g, const std::string& id) {
  for (size_t i = 0; i < g.nodes.size(); ++i)
    if (g.nodes[i].id == id) return static_cast<int>(i);
  return -1;
}

// Stream payload and parameter-region signature of a unit, for interface
// compatibility checks.
std::string unit_signature(const Vmg& g, const Unit& u) {
  std::ostringstream os;
  os << u.body_key << "#";
  for (const auto& ev : u.profile.events) {
    os << (ev.kind == Event::Kind::Put ? "P" : "G")
       << g.program->streams[static_cast<size_t>(ev.inst.stream)].type.elem.str() << ";";
  }
  os << "#";
  const TaskDef* t = g.task_of(u);
  for (const auto& a : u.profile.accesses) {
    os << (a.write ? "W" : "R");
    const Param* prm = t ? t->find_param(a.param) : nullptr;
    if (prm) {
      auto tile = tile_shape(prm->type, prm->layout, t->mapping);
      if (!a.ranges.empty()) {
        for (size_t d = 0; d < a.ranges.size(); ++d)
          os << (a.ranges[d].second < 0 ? (d < tile.size() ? tile[d] : 0) : a.ranges[d].second)
             << ",";
      } else {
        for (auto s : tile) os << s << ",";
      }
      os << prm->type.elem.name();
    }
    os << ";";
  }
  return os.str();
}

void sort_stage(Stage& st) {
  std::sort(st.units.begin(), st.units.end(), [](const UnitPtr& a, const UnitPtr& b) {
    return std::tie(a->task, a->coord, a->id) < std::tie(b->task, b->coord, b->id);
  });
}

Vmg merge_bundle(const Vmg& g, const std::vector<int>& nodes) {
  Vmg out;
  out.program = g.program;
  out.reduction_streams = g.reduction_streams;
  out.edges = g.edges;
  std::set<int> member(nodes.begin(), nodes.end());

  Node merged;
  size_t stage_count = g.nodes[static_cast<size_t>(nodes[0])].stages.size();
  merged.stages.resize(stage_count);
  std::string min_id;
  for (int ni : nodes) {
    const Node& n = g.nodes[static_cast<size_t>(ni)];
    if (min_id.empty() || n.id < min_id) min_id = n.id;
    for (size_t s = 0; s < stage_count; ++s)
      for (const auto& u : n.stages[s].units) merged.stages[s].units.push_back(u);
  }
  for (auto& st : merged.stages) sort_stage(st);
  merged.id = min_id;

  for (size_t i = 0; i < g.nodes.size(); ++i) {
    if (member.count(static_cast<int>(i))) continue;
    out.nodes.push_back(g.nodes[i]);
  }
  out.nodes.push_back(merged);
  std::sort(out.nodes.begin(), out.nodes.end(),
            [](const Node& a, const Node& b) { return a.id < b.id; });
  return out;
}

Vmg merge_chain(const Vmg& g, int first, int second) {
  Vmg out;
  out.program = g.program;
  out.reduction_streams = g.reduction_streams;
  out.edges = g.edges;

  const Node& a = g.nodes[static_cast<size_t>(first)];
  const Node& b = g.nodes[static_cast<size_t>(second)];
  Node merged;
  merged.id = std::min(a.id, b.id);
  merged.stages = a.stages;
  for (const auto& st : b.stages) merged.stages.push_back(st);

  for (size_t i = 0; i < g.nodes.size(); ++i) {
    if (static_cast<int>(i) == first || static_cast<int>(i) == second) continue;
    out.nodes.push_back(g.nodes[i]);
  }
  out.nodes.push_back(merged);
  std::sort(out.nodes.begin(), out.nodes.end(),
            [](const Node& a2, const Node& b2) { return a2.id < b2.id; });
  return out;
}

bool ports_ok(const Vmg& g, const FabricConfig& fab, std::string* why) {
  for (int i = 0; i < g.node_count(); ++i) {
    PortPressure p = node_port_pressure(g, i);
    if (p.ins > fab.ports_in_per_tile || p.outs > fab.ports_out_per_tile) {
      if (why)
        *why = "node " + g.nodes[static_cast<size_t>(i)].id + " needs " +
               std::to_string(p.ins) + "-in/" + std::to_string(p.outs) +
               "-out ports over the " + std::to_string(fab.ports_in_per_tile) + "/" +
               std::to_string(fab.ports_out_per_tile) + " budget";
      return false;
    }
  }
  return true;
}

// Node-level reachability excluding direct u-v edges (criterion iii).
bool reachable_excluding(const Vmg& g, int from, int to, int skip_a, int skip_b) {
  auto u2n = g.unit_to_node();
  std::vector<std::vector<int>> adj(g.nodes.size());
  for (const auto& e : g.edges) {
    auto s = u2n.find(e.src_unit);
    auto d = u2n.find(e.dst_unit);
    if (s == u2n.end() || d == u2n.end()) continue;
    if (s->second == d->second) continue;
    bool is_uv = (s->second == skip_a && d->second == skip_b) ||
                 (s->second == skip_b && d->second == skip_a);
    if (is_uv) continue;
    adj[static_cast<size_t>(s->second)].push_back(d->second);
  }
  std::vector<bool> seen(g.nodes.size(), false);
  std::queue<int> q;
  q.push(from);
  seen[static_cast<size_t>(from)] = true;
  while (!q.empty()) {
    int v = q.front();
    q.pop();
    if (v == to) return true;
    for (int s : adj[static_cast<size_t>(v)]) {
      if (!seen[static_cast<size_t>(s)]) {
        seen[static_cast<size_t>(s)] = true;
        q.push(s);
      }
    }
  }
  return false;
}

// Direct edge direction between two nodes: -1 none, 0 u->v, 1 v->u, 2 both.
int direct_edges(const Vmg& g, int u, int v) {
  auto u2n = g.unit_to_node();
  bool uv = false, vu = false;
  for (const auto& e : g.edges) {
    auto s = u2n.find(e.src_unit);
    auto d = u2n.find(e.dst_unit);
    if (s == u2n.end() || d == u2n.end()) continue;
    if (s->second == u && d->second == v) uv = true;
    if (s->second == v && d->second == u) vu = true;
  }
  if (uv && vu) return 2;
  if (uv) return 0;
  if (vu) return 1;
  return -1;
}

}  // namespace

LegalityResult is_valid_bundle(const Vmg& g, const std::vector<std::string>& node_ids,
                               const FabricConfig& fabric) {
  if (node_ids.size() < 2) return {false, "bundle needs at least two nodes"};
  std::vector<int> idx;
  std::set<int> uniq;
  for (const auto& id : node_ids) {
    int i = find_node(g, id);
    if (i < 0) return {false, "unknown node " + id};
    if (!uniq.insert(i).second) return {false, "duplicate node " + id};
    idx.push_back(i);
  }
  const Node& first = g.nodes[static_cast<size_t>(idx[0])];
  for (int i : idx) {
    const Node& n = g.nodes[static_cast<size_t>(i)];
    if (n.stages.size() != first.stages.size())
      return {false, "stage structure differs between " + first.id + " and " + n.id};
    for (size_t s = 0; s < n.stages.size(); ++s) {
      std::string want = unit_signature(g, *first.stages[s].units[0]);
      for (const auto& u : n.stages[s].units) {
        if (unit_signature(g, *u) != want)
          return {false,
                  "units are not isomorphic (" + first.stages[s].units[0]->id + " vs " +
                      u->id + ")"};
      }
    }
  }
  Vmg merged = merge_bundle(g, idx);
  std::string why;
  if (!ports_ok(merged, fabric, &why)) return {false, why};
  if (!events_acyclic(merged))
    return {false, "bundled shot order would deadlock on bounded FIFOs"};
  return {true, ""};
}

LegalityResult is_valid_chain(const Vmg& g, const std::string& u, const std::string& v,
                              const FabricConfig& fabric) {
  if (u == v) return {false, "cannot chain a node with itself"};
  int ui = find_node(g, u), vi = find_node(g, v);
  if (ui < 0 || vi < 0) return {false, "unknown node"};
  int dir = direct_edges(g, ui, vi);
  if (dir == 2) return {false, "nodes exchange streams in both directions"};
  // Any transitive path (excluding direct edges) makes fusion cyclic.
  if (reachable_excluding(g, ui, vi, ui, vi) || reachable_excluding(g, vi, ui, ui, vi))
    return {false, "fusing would close a cycle through a transitive path"};
  int first = ui, second = vi;
  if (dir == 1) std::swap(first, second);
  Vmg merged = merge_chain(g, first, second);
  std::string why;
  if (!ports_ok(merged, fabric, &why)) return {false, why};
  if (!events_acyclic(merged))
    return {false, "serialized shot order would deadlock on bounded FIFOs"};
  return {true, ""};
}

Vmg apply_bundle(const Vmg& g, const std::vector<std::string>& node_ids) {
  // Port budgets are search policy; structural legality is what the rewrite
  // itself requires. Use a permissive fabric here.
  FabricConfig wide;
  wide.ports_in_per_tile = 1 << 20;
  wide.ports_out_per_tile = 1 << 20;
  LegalityResult r = is_valid_bundle(g, node_ids, wide);
  if (!r.ok) throw IllegalRewrite(r.reason);
  std::vector<int> idx;
  for (const auto& id : node_ids) idx.push_back(find_node(g, id));
  return merge_bundle(g, idx);
}

Vmg apply_chain(const Vmg& g, const std::string& u, const std::string& v) {
  FabricConfig wide;
  wide.ports_in_per_tile = 1 << 20;
  wide.ports_out_per_tile = 1 << 20;
  LegalityResult r = is_valid_chain(g, u, v, wide);
  if (!r.ok) throw IllegalRewrite(r.reason);
  int ui = find_node(g, u), vi = find_node(g, v);
  int dir = direct_edges(g, ui, vi);
  int first = ui, second = vi;
  if (dir == 1) std::swap(first, second);
  return merge_chain(g, first, second);
}

Vmg replay(const Vmg& root, const std::vector<Application>& applied) {
  Vmg g = root;
  for (const auto& app : applied) {
    if (app.kind == Application::Kind::Bundle)
      g = apply_bundle(g, app.nodes);
    else
      g = apply_chain(g, app.nodes[0], app.nodes[1]);
  }
  return g;
}

bool same_graph(const Vmg& a, const Vmg& b) {
  auto fingerprint = [](const Vmg& g) {
    std::ostringstream os;
    for (const auto& n : g.nodes) {
      os << n.id << "{";
      for (const auto& st : n.stages) {
        os << "[";
        for (const auto& u : st.units) os << u->id << ",";
        os << "]";
      }
      os << "}";
    }
    os << "|";
    for (const auto& e : g.edges)
      os << e.inst.stream << ":" << e.inst.flat << ":" << e.src_unit << ">" << e.dst_unit
         << ";";
    return os.str();
  };
  return fingerprint(a) == fingerprint(b);
}

}  // namespace datoc
