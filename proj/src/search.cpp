#include <algorithm>
#include <sstream>

#include "datoc/dma.hpp"
#include "datoc/sim.hpp"

namespace datoc {

namespace {

struct NodeCache {
  PortPressure pressure;
  std::string bundle_sig;  // stage-joined unit signature
};

// Cheap structural signature: stage count plus per-stage body keys. The
// full isomorphism check runs in is_valid_bundle.
std::string node_bundle_sig(const Vmg& g, const Node& n) {
  (void)g;
  std::ostringstream os;
  os << n.stages.size() << "|";
  for (const auto& st : n.stages) {
    os << st.units[0]->body_key << "&" << st.units.size() << ";";
  }
  return os.str();
}

std::string graph_fingerprint(const Vmg& g) {
  std::ostringstream os;
  for (const auto& n : g.nodes) {
    os << "{";
    for (const auto& st : n.stages) {
      os << "[";
      for (const auto& u : st.units) os << u->id << ",";
      os << "]";
    }
    os << "}";
  }
  return os.str();
}

int edges_between(const Vmg& g, const std::string& a, const std::string& b) {
  auto u2n = g.unit_to_node();
  int na = -1, nb = -1;
  for (size_t i = 0; i < g.nodes.size(); ++i) {
    if (g.nodes[i].id == a) na = static_cast<int>(i);
    if (g.nodes[i].id == b) nb = static_cast<int>(i);
  }
  int count = 0;
  for (const auto& e : g.edges) {
    auto s = u2n.find(e.src_unit);
    auto d = u2n.find(e.dst_unit);
    if (s == u2n.end() || d == u2n.end()) continue;
    if ((s->second == na && d->second == nb) || (s->second == nb && d->second == na)) ++count;
  }
  return count;
}

struct Candidate {
  Application app;
  int edges = 0;
  int max_pressure = 0;
  int max_shots = 0;
};

class Searcher {
 public:
  Searcher(const Vmg& root, const FabricConfig& fabric, int budget, int threshold,
           SearchStats* stats)
      : fabric_(fabric), budget_(budget), threshold_(threshold), stats_(stats) {
    MapState s;
    s.vmg = root;
    s.v_node_number = root.node_count();
    refresh_pressure(s);
    root_ = std::move(s);
  }

  std::vector<MapState> run() {
    seen_.insert(graph_fingerprint(root_.vmg));
    span(root_);
    if (found_.empty())
      throw NoFeasibleMapping("search exhausted without a feasible mapping (budget " +
                              std::to_string(budget_) + ")");
    return std::move(found_);
  }

 private:
  FabricConfig fabric_;
  int budget_;
  int threshold_;
  SearchStats* stats_;
  MapState root_;
  std::vector<MapState> found_;
  std::set<std::string> seen_;
  std::int64_t explored_ = 0;
  static constexpr std::int64_t kStateCap = 100000;

  void refresh_pressure(MapState& s) {
    s.port_pressure.clear();
    for (int i = 0; i < s.vmg.node_count(); ++i)
      s.port_pressure[s.vmg.nodes[static_cast<size_t>(i)].id] = node_port_pressure(s.vmg, i);
  }

  bool build_ok(const Vmg& g) {
    for (int i = 0; i < g.node_count(); ++i) {
      PortPressure p = node_port_pressure(g, i);
      if (p.ins > fabric_.ports_in_per_tile || p.outs > fabric_.ports_out_per_tile)
        return false;
    }
    try {
      PhysicalMapping m = place_topological(g, fabric_);
      DmaResult r = schedule_dma(m);
      return r.ok();
    } catch (const PlacementError&) {
      return false;
    }
  }

  // Per-state link structure for cheap merged-pressure estimates.
  struct NodeInfo {
    std::set<std::pair<int, int>> in_links, out_links;  // (peer node, stream decl)
    int dma_in = 0, dma_out = 0;
    int shots = 0;
  };

  static std::vector<NodeInfo> node_infos(const Vmg& g) {
    auto u2n = g.unit_to_node();
    std::vector<NodeInfo> info(g.nodes.size());
    for (size_t i = 0; i < g.nodes.size(); ++i) {
      const Node& n = g.nodes[i];
      info[i].shots = n.shot_count();
      for (const auto& st : n.stages) {
        int in_roles = 0, out_roles = 0;
        for (const auto& u : st.units) {
          std::set<std::string> r, w;
          for (const auto& a : u->profile.accesses) (a.write ? w : r).insert(a.param);
          in_roles = std::max(in_roles, static_cast<int>(r.size()));
          out_roles = std::max(out_roles, static_cast<int>(w.size()));
        }
        info[i].dma_in = std::max(info[i].dma_in, in_roles);
        info[i].dma_out = std::max(info[i].dma_out, out_roles);
      }
    }
    for (const auto& e : g.edges) {
      auto s = u2n.find(e.src_unit);
      auto d = u2n.find(e.dst_unit);
      if (s == u2n.end() || d == u2n.end() || s->second == d->second) continue;
      info[static_cast<size_t>(s->second)].out_links.insert({d->second, e.inst.stream});
      info[static_cast<size_t>(d->second)].in_links.insert({s->second, e.inst.stream});
    }
    return info;
  }

  // True stops the search (threshold reached or cap blown).
  bool span(const MapState& state) {
    ++explored_;
    if (stats_) stats_->states_explored = explored_;
    if (explored_ > kStateCap) return true;

    if (state.v_node_number <= budget_) {
      if (build_ok(state.vmg)) {
        found_.push_back(state);
        if (static_cast<int>(found_.size()) >= threshold_) return true;
      }
    }

    // Priority-ordered expansion over candidate pairs. The merged node's
    // pressure and shot count are estimated from precomputed link info.
    std::vector<NodeInfo> info = node_infos(state.vmg);
    std::map<std::pair<int, int>, int> edge_count;
    {
      auto u2n = state.vmg.unit_to_node();
      for (const auto& e : state.vmg.edges) {
        auto s = u2n.find(e.src_unit);
        auto d = u2n.find(e.dst_unit);
        if (s == u2n.end() || d == u2n.end() || s->second == d->second) continue;
        int a = std::min(s->second, d->second), b = std::max(s->second, d->second);
        edge_count[{a, b}] += 1;
      }
    }
    std::map<std::string, std::string> sigs;
    for (const auto& n : state.vmg.nodes) sigs[n.id] = node_bundle_sig(state.vmg, n);

    int global_max_pressure = 0, global_max_shots = 0;
    std::vector<int> pressure_of(info.size()), shots_of(info.size());
    for (size_t i = 0; i < info.size(); ++i) {
      pressure_of[i] = std::max(static_cast<int>(info[i].in_links.size()) + info[i].dma_in,
                                static_cast<int>(info[i].out_links.size()) + info[i].dma_out);
      shots_of[i] = info[i].shots;
      global_max_pressure = std::max(global_max_pressure, pressure_of[i]);
      global_max_shots = std::max(global_max_shots, shots_of[i]);
    }

    std::vector<Candidate> candidates;
    for (size_t i = 0; i < state.vmg.nodes.size(); ++i) {
      for (size_t j = i + 1; j < state.vmg.nodes.size(); ++j) {
        const std::string& a = state.vmg.nodes[i].id;
        const std::string& b = state.vmg.nodes[j].id;
        auto ec = edge_count.find({static_cast<int>(i), static_cast<int>(j)});
        int edges = ec == edge_count.end() ? 0 : ec->second;

        // Merged-node estimates (bundle and chain agree at this level).
        auto count_links = [&](bool ins) {
          std::set<std::pair<int, int>> links;
          for (const auto& l : (ins ? info[i].in_links : info[i].out_links))
            if (l.first != static_cast<int>(j)) links.insert(l);
          for (const auto& l : (ins ? info[j].in_links : info[j].out_links))
            if (l.first != static_cast<int>(i)) links.insert(l);
          return static_cast<int>(links.size());
        };
        int merged_in = count_links(true) + std::max(info[i].dma_in, info[j].dma_in);
        int merged_out = count_links(false) + std::max(info[i].dma_out, info[j].dma_out);
        int merged_pressure = std::max(merged_in, merged_out);
        if (merged_in > fabric_.ports_in_per_tile || merged_out > fabric_.ports_out_per_tile)
          continue;  // over budget before scoring

        int other_pressure = 0, other_shots = 0;
        for (size_t k = 0; k < info.size(); ++k) {
          if (k == i || k == j) continue;
          other_pressure = std::max(other_pressure, pressure_of[k]);
          other_shots = std::max(other_shots, shots_of[k]);
        }
        int res_pressure = std::max(merged_pressure, other_pressure);
        int res_shots = std::max(shots_of[i] + shots_of[j], other_shots);

        Candidate chain;
        chain.app = Application{Application::Kind::Chain, {a, b}};
        chain.edges = edges;
        chain.max_pressure = res_pressure;
        chain.max_shots = res_shots;
        candidates.push_back(chain);
        if (sigs[a] == sigs[b]) {
          Candidate bundle = chain;
          bundle.app.kind = Application::Kind::Bundle;
          candidates.push_back(bundle);
        }
      }
    }
    // Spec priority (edges internalized desc, resulting max pressure asc)
    // with a balance tie-break on the resulting max shot count before the
    // id pair; bundle ahead of chain on full ties.
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& x, const Candidate& y) {
      auto kx = std::make_tuple(-x.edges, x.max_pressure, x.max_shots, x.app.nodes[0],
                                x.app.nodes[1], x.app.kind == Application::Kind::Bundle ? 0 : 1);
      auto ky = std::make_tuple(-y.edges, y.max_pressure, y.max_shots, y.app.nodes[0],
                                y.app.nodes[1], y.app.kind == Application::Kind::Bundle ? 0 : 1);
      return kx < ky;
    });

    for (const auto& c : candidates) {
      LegalityResult legal =
          c.app.kind == Application::Kind::Bundle
              ? is_valid_bundle(state.vmg, c.app.nodes, fabric_)
              : is_valid_chain(state.vmg, c.app.nodes[0], c.app.nodes[1], fabric_);
      if (!legal.ok) continue;
      Vmg child_vmg = c.app.kind == Application::Kind::Bundle
                          ? apply_bundle(state.vmg, c.app.nodes)
                          : apply_chain(state.vmg, c.app.nodes[0], c.app.nodes[1]);
      std::string fp = graph_fingerprint(child_vmg);
      if (!seen_.insert(fp).second) {
        if (stats_) stats_->states_deduped += 1;
        continue;
      }
      MapState child;
      child.vmg = std::move(child_vmg);
      child.applied = state.applied;
      child.applied.push_back(c.app);
      child.v_node_number = child.vmg.node_count();
      refresh_pressure(child);
      if (span(child)) return true;
    }
    return false;
  }
};

}  // namespace

std::tuple<int, int, std::string, std::string> priority_key(const Vmg& g,
                                                            const Application& app) {
  int edges = edges_between(g, app.nodes[0], app.nodes[1]);
  auto u2n = g.unit_to_node();
  // Pressure of the child graph's worst node.
  Vmg child = app.kind == Application::Kind::Bundle
                  ? apply_bundle(g, app.nodes)
                  : apply_chain(g, app.nodes[0], app.nodes[1]);
  (void)u2n;
  int max_pressure = 0;
  for (int i = 0; i < child.node_count(); ++i) {
    PortPressure p = node_port_pressure(child, i);
    max_pressure = std::max(max_pressure, std::max(p.ins, p.outs));
  }
  return {edges, max_pressure, app.nodes[0], app.nodes[1]};
}

std::vector<MapState> search_mapping(const Vmg& g, const FabricConfig& fabric, int budget,
                                     int threshold, SearchStats* stats) {
  if (budget < 1) throw NoFeasibleMapping("budget must be at least 1");
  Searcher s(g, fabric, budget, threshold, stats);
  return s.run();
}

PhysicalMapping select_best(std::vector<MapState>& candidates, const FabricConfig& fabric,
                            const SimConfig& cfg) {
  if (candidates.empty()) throw NoFeasibleMapping("no candidates to select from");
  PhysicalMapping best;
  bool have = false;
  for (auto& cand : candidates) {
    PhysicalMapping m;
    try {
      m = place_topological(cand.vmg, fabric);
    } catch (const PlacementError&) {
      continue;
    }
    DmaResult sched = schedule_dma(m);
    if (!sched.ok()) continue;
    auto inputs = seeded_inputs(*cand.vmg.program, 0);
    SimResult r = run_timed(m, *sched.schedule, inputs, cfg);
    cand.estimated_cycles = r.trace.total_cycles;
    m.estimated_cycles = r.trace.total_cycles;
    if (!have || m.estimated_cycles < best.estimated_cycles) {
      best = std::move(m);
      have = true;
    }
  }
  if (!have) throw PlacementError("no candidate could be placed and scheduled");
  return best;
}

}  // namespace datoc
