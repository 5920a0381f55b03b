#include <algorithm>
#include <functional>
#include <queue>
#include <sstream>

#include "datoc/dma.hpp"

namespace datoc {

std::int64_t Transfer::first_step(int tile) const {
  std::int64_t s = -1;
  for (const auto& e : endpoints)
    if (e.tile == tile) s = s < 0 ? e.step : std::min(s, e.step);
  return s < 0 ? 0 : s;
}

std::int64_t Transfer::last_step(int tile) const {
  std::int64_t s = -1;
  for (const auto& e : endpoints)
    if (e.tile == tile) s = std::max(s, e.step);
  return s < 0 ? 0 : s;
}

// ---------------------------------------------------------------------------
// Epoch layering
// ---------------------------------------------------------------------------

std::optional<std::map<std::string, int>> compute_unit_levels(const PhysicalMapping& m) {
  const Vmg& g = m.vmg;
  // Segment = (node, stage); indexed densely.
  std::map<std::pair<int, int>, int> seg_index;
  std::map<std::string, std::pair<int, int>> unit_seg;
  int nseg = 0;
  for (size_t ni = 0; ni < g.nodes.size(); ++ni) {
    for (size_t si = 0; si < g.nodes[ni].stages.size(); ++si) {
      seg_index[{static_cast<int>(ni), static_cast<int>(si)}] = nseg++;
      for (const auto& u : g.nodes[ni].stages[si].units)
        unit_seg[u->id] = {static_cast<int>(ni), static_cast<int>(si)};
    }
  }

  // Union-find for same-epoch constraints (external stream edges).
  std::vector<int> parent(static_cast<size_t>(nseg));
  for (int i = 0; i < nseg; ++i) parent[static_cast<size_t>(i)] = i;
  std::function<int(int)> find = [&](int x) {
    while (parent[static_cast<size_t>(x)] != x) {
      parent[static_cast<size_t>(x)] = parent[static_cast<size_t>(parent[static_cast<size_t>(x)])];
      x = parent[static_cast<size_t>(x)];
    }
    return x;
  };
  auto unite = [&](int a, int b) { parent[static_cast<size_t>(find(a))] = find(b); };

  for (const auto& e : g.edges) {
    auto s = unit_seg.find(e.src_unit);
    auto d = unit_seg.find(e.dst_unit);
    if (s == unit_seg.end() || d == unit_seg.end()) continue;
    if (s->second.first == d->second.first) continue;  // internal to a node
    unite(seg_index.at(s->second), seg_index.at(d->second));
  }

  // Successor constraints: chain order and buffer write->read dependencies.
  std::vector<std::pair<int, int>> succ;  // (earlier, later)
  for (size_t ni = 0; ni < g.nodes.size(); ++ni)
    for (size_t si = 0; si + 1 < g.nodes[ni].stages.size(); ++si)
      succ.push_back({seg_index.at({static_cast<int>(ni), static_cast<int>(si)}),
                      seg_index.at({static_cast<int>(ni), static_cast<int>(si) + 1})});

  std::map<std::string, std::vector<int>> writers, readers;  // buffer -> segments
  for (const auto& n : g.nodes) {
    for (size_t si = 0; si < n.stages.size(); ++si) {
      for (const auto& u : n.stages[si].units) {
        const TaskDef* t = g.task_of(*u);
        if (!t) continue;
        int seg = seg_index.at(unit_seg.at(u->id));
        for (const auto& a : u->profile.accesses) {
          if (!t->find_param(a.param)) continue;
          (a.write ? writers : readers)[a.param].push_back(seg);
        }
      }
    }
  }
  for (const auto& [buf, ws] : writers) {
    auto rit = readers.find(buf);
    if (rit == readers.end()) continue;
    for (int w : ws)
      for (int r : rit->second)
        if (w != r) succ.push_back({w, r});
  }

  // Longest-path layering over components; a successor edge within one
  // component is a contradiction.
  std::map<int, std::vector<int>> cadj;
  std::map<int, int> indeg;
  std::set<int> comps;
  for (int i = 0; i < nseg; ++i) comps.insert(find(i));
  for (int c : comps) indeg[c] = 0;
  std::set<std::pair<int, int>> seen_edges;
  for (const auto& [a, b] : succ) {
    int ca = find(a), cb = find(b);
    if (ca == cb) return std::nullopt;  // stage order vs pipeline contradiction
    if (seen_edges.insert({ca, cb}).second) {
      cadj[ca].push_back(cb);
      indeg[cb]++;
    }
  }
  std::map<int, int> level;
  std::queue<int> q;
  for (int c : comps)
    if (indeg[c] == 0) {
      q.push(c);
      level[c] = 0;
    }
  int processed = 0;
  while (!q.empty()) {
    int c = q.front();
    q.pop();
    ++processed;
    for (int d : cadj[c]) {
      level[d] = std::max(level[d], level[c] + 1);
      if (--indeg[d] == 0) q.push(d);
    }
  }
  if (processed != static_cast<int>(comps.size())) return std::nullopt;  // cycle

  std::map<std::string, int> out;
  for (const auto& [uid, seg] : unit_seg) out[uid] = level[find(seg_index.at(seg))];
  return out;
}

// ---------------------------------------------------------------------------
// Transfer construction
// ---------------------------------------------------------------------------

std::vector<Transfer> collect_transfers(const PhysicalMapping& m,
                                        const std::map<std::string, int>& unit_level) {
  const Vmg& g = m.vmg;
  std::vector<Transfer> out;

  for (size_t ni = 0; ni < g.nodes.size(); ++ni) {
    const Node& n = g.nodes[ni];
    int tile = m.tile_of_node(static_cast<int>(ni));
    std::int64_t shot = 0;
    for (size_t si = 0; si < n.stages.size(); ++si) {
      const Stage& st = n.stages[si];
      for (size_t ui = 0; ui < st.units.size(); ++ui, ++shot) {
        const Unit& u = *st.units[ui];
        const TaskDef* t = g.task_of(u);
        if (!t) continue;
        auto extents = t->mapping;

        // Deduped reads; writes keep their final program-order sequence.
        std::map<std::string, Region> reads;           // key: param + serialized region
        std::map<std::string, std::pair<Region, int>> writes;
        std::map<std::string, std::string> key_param;
        auto region_key = [](const std::string& p, const Region& r) {
          std::ostringstream os;
          os << p;
          for (const auto& [o, s] : r) os << ":" << o << "+" << s;
          return os.str();
        };
        for (const auto& a : u.profile.accesses) {
          const Param* prm = t->find_param(a.param);
          if (!prm) continue;
          auto tile_dims = tile_shape(prm->type, prm->layout, extents);
          Region unit_region;
          for (size_t d = 0; d < tile_dims.size(); ++d) {
            if (d < a.ranges.size() && a.ranges[d].second >= 0)
              unit_region.push_back(a.ranges[d]);
            else
              unit_region.emplace_back(0, tile_dims[d]);
          }
          std::string key = region_key(a.param, unit_region);
          key_param[key] = a.param;
          if (a.write) {
            writes[key] = {unit_region, a.seq};
          } else {
            reads.emplace(key, unit_region);
          }
        }

        auto make_transfer = [&](const std::string& param, const Region& unit_region,
                                 bool write, int seq) {
          const Param* prm = t->find_param(param);
          TileRegion base = shard_region(param, prm->type, prm->layout, extents, u.coord);
          Transfer tr;
          tr.buffer = param;
          tr.dir = write ? Transfer::Dir::Out : Transfer::Dir::In;
          for (size_t d = 0; d < unit_region.size(); ++d)
            tr.region.emplace_back(base.region[d].first + unit_region[d].first,
                                   unit_region[d].second);
          Transfer::Endpoint ep;
          ep.tile = tile;
          ep.unit = u.id;
          ep.unit_region = unit_region;
          ep.global_region = tr.region;
          ep.step = shot;
          ep.write_seq = seq;
          tr.endpoints.push_back(std::move(ep));
          auto lvl = unit_level.find(u.id);
          tr.epoch = lvl == unit_level.end() ? 0 : lvl->second;
          tr.token = static_cast<int>(ui);
          tr.elements = 1;
          for (const auto& [o, s] : tr.region) {
            (void)o;
            tr.elements *= s;
          }
          out.push_back(std::move(tr));
        };
        for (const auto& [key, r] : reads) make_transfer(key_param[key], r, false, -1);
        for (const auto& [key, rs] : writes)
          make_transfer(key_param[key], rs.first, true, rs.second);
      }
    }
  }

  std::sort(out.begin(), out.end(), [](const Transfer& a, const Transfer& b) {
    auto ka = std::tie(a.epoch, a.dir, a.buffer, a.region, a.endpoints[0].unit);
    auto kb = std::tie(b.epoch, b.dir, b.buffer, b.region, b.endpoints[0].unit);
    return ka < kb;
  });
  for (size_t i = 0; i < out.size(); ++i) out[i].id = static_cast<int>(i);
  return out;
}

// ---------------------------------------------------------------------------
// Optimization passes
// ---------------------------------------------------------------------------

std::vector<Transfer> merge_multicast(std::vector<Transfer> transfers) {
  std::map<std::string, int> groups;  // key -> index into merged
  std::vector<Transfer> merged;
  for (auto& t : transfers) {
    if (t.dir == Transfer::Dir::Out) {
      merged.push_back(std::move(t));
      continue;
    }
    std::ostringstream key;
    key << t.buffer << "@" << t.epoch;
    for (const auto& [o, s] : t.region) key << ":" << o << "+" << s;
    auto it = groups.find(key.str());
    if (it == groups.end()) {
      groups[key.str()] = static_cast<int>(merged.size());
      merged.push_back(std::move(t));
    } else {
      Transfer& dst = merged[static_cast<size_t>(it->second)];
      dst.id = std::min(dst.id, t.id);
      dst.token = std::min(dst.token, t.token);
      for (auto& ep : t.endpoints) dst.endpoints.push_back(std::move(ep));
    }
  }
  for (auto& t : merged)
    std::sort(t.endpoints.begin(), t.endpoints.end(),
              [](const Transfer::Endpoint& a, const Transfer::Endpoint& b) {
                return std::tie(a.tile, a.unit, a.step) < std::tie(b.tile, b.unit, b.step);
              });
  std::sort(merged.begin(), merged.end(),
            [](const Transfer& a, const Transfer& b) { return a.id < b.id; });
  return merged;
}

namespace {

// Adjacent along exactly one axis, equal elsewhere.
int adjacency_axis(const Region& a, const Region& b) {
  int axis = -1;
  for (size_t d = 0; d < a.size(); ++d) {
    if (a[d] == b[d]) continue;
    if (axis >= 0) return -1;
    if (a[d].first + a[d].second == b[d].first) {
      axis = static_cast<int>(d);
    } else {
      return -1;
    }
  }
  return axis;
}

bool single_tile(const Transfer& t, int* tile) {
  int seen = -1;
  for (const auto& e : t.endpoints) {
    if (seen >= 0 && e.tile != seen) return false;
    seen = e.tile;
  }
  *tile = seen;
  return true;
}

}  // namespace

std::vector<Transfer> coalesce_spatial(std::vector<Transfer> transfers) {
  bool changed = true;
  while (changed) {
    changed = false;
    for (size_t i = 0; i < transfers.size() && !changed; ++i) {
      for (size_t j = 0; j < transfers.size() && !changed; ++j) {
        if (i == j) continue;
        Transfer& a = transfers[i];
        Transfer& b = transfers[j];
        if (a.dir != b.dir || a.epoch != b.epoch || a.buffer != b.buffer) continue;
        int ta, tb;
        if (!single_tile(a, &ta) || !single_tile(b, &tb) || ta != tb) continue;
        int axis = adjacency_axis(a.region, b.region);
        if (axis < 0) continue;
        // Fuse b into a.
        a.region[static_cast<size_t>(axis)].second += b.region[static_cast<size_t>(axis)].second;
        a.elements += b.elements;
        a.id = std::min(a.id, b.id);
        a.token = std::min(a.token, b.token);
        for (auto& ep : b.endpoints) a.endpoints.push_back(std::move(ep));
        std::sort(a.endpoints.begin(), a.endpoints.end(),
                  [](const Transfer::Endpoint& x, const Transfer::Endpoint& y) {
                    return std::tie(x.tile, x.unit, x.step) < std::tie(y.tile, y.unit, y.step);
                  });
        transfers.erase(transfers.begin() + static_cast<long>(j));
        changed = true;
      }
    }
  }
  std::sort(transfers.begin(), transfers.end(),
            [](const Transfer& a, const Transfer& b) { return a.id < b.id; });
  return transfers;
}

std::vector<Transfer> split_for_ports(std::vector<Transfer> transfers,
                                      const FabricConfig& fabric) {
  auto concurrency_peak = [&](int tile, Transfer::Dir dir, int epoch, std::int64_t* at_step) {
    int peak = 0;
    std::map<std::int64_t, int> delta;
    for (const auto& t : transfers) {
      if (t.dir != dir || t.epoch != epoch) continue;
      bool on_tile = false;
      for (const auto& e : t.endpoints) on_tile = on_tile || e.tile == tile;
      if (!on_tile) continue;
      delta[t.first_step(tile)] += 1;
      delta[t.last_step(tile) + 1] -= 1;
    }
    int cur = 0;
    for (const auto& [step, d] : delta) {
      cur += d;
      if (cur > peak) {
        peak = cur;
        *at_step = step;
      }
    }
    return peak;
  };

  // Gather the (tile, dir, epoch) keys present.
  std::set<std::tuple<int, int, int>> keys;
  for (const auto& t : transfers)
    for (const auto& e : t.endpoints)
      keys.insert({e.tile, t.dir == Transfer::Dir::In ? 0 : 1, t.epoch});

  for (int round = 0; round < 64; ++round) {
    bool split_any = false;
    for (const auto& [tile, diri, epoch] : keys) {
      Transfer::Dir dir = diri == 0 ? Transfer::Dir::In : Transfer::Dir::Out;
      int budget = dir == Transfer::Dir::In ? fabric.ports_in_per_tile : fabric.ports_out_per_tile;
      std::int64_t at = 0;
      if (concurrency_peak(tile, dir, epoch, &at) <= budget) continue;
      // Split the widest multi-shot transfer covering the peak step.
      int best = -1;
      std::int64_t best_span = 0;
      for (size_t i = 0; i < transfers.size(); ++i) {
        const Transfer& t = transfers[i];
        if (t.dir != dir || t.epoch != epoch) continue;
        int tt;
        if (!single_tile(t, &tt) || tt != tile) continue;
        std::int64_t f = t.first_step(tile), l = t.last_step(tile);
        if (f > at || l < at || f == l) continue;
        if (t.elements < 2 * fabric.burst_alignment) continue;  // alignment guard
        if (l - f > best_span) {
          best_span = l - f;
          best = static_cast<int>(i);
        }
      }
      if (best < 0) continue;
      Transfer t = transfers[static_cast<size_t>(best)];
      transfers.erase(transfers.begin() + best);
      std::int64_t mid = (t.first_step(tile) + t.last_step(tile)) / 2;
      Transfer lo = t, hi = t;
      lo.endpoints.clear();
      hi.endpoints.clear();
      for (auto& e : t.endpoints)
        (e.step <= mid ? lo : hi).endpoints.push_back(e);
      auto rebound = [](Transfer& x) {
        if (x.endpoints.empty()) return;
        x.region = x.endpoints[0].global_region;
        x.elements = 0;
        for (const auto& e : x.endpoints) {
          std::int64_t n = 1;
          for (const auto& [o, s] : e.global_region) {
            (void)o;
            n *= s;
          }
          x.elements += n;
          for (size_t d = 0; d < x.region.size(); ++d) {
            std::int64_t lo_off = std::min(x.region[d].first, e.global_region[d].first);
            std::int64_t hi_off = std::max(x.region[d].first + x.region[d].second,
                                           e.global_region[d].first + e.global_region[d].second);
            x.region[d] = {lo_off, hi_off - lo_off};
          }
        }
      };
      rebound(lo);
      rebound(hi);
      hi.id = static_cast<int>(transfers.size()) + 1000 + round;  // fresh id
      if (!lo.endpoints.empty()) transfers.push_back(std::move(lo));
      if (!hi.endpoints.empty()) transfers.push_back(std::move(hi));
      split_any = true;
    }
    if (!split_any) break;
  }
  // Parallelism splitting: when a (tile, dir, epoch) group leaves ports
  // idle, bisect the largest splittable transfer so pieces can run on
  // separate ports. Single-endpoint giants split by region, multi-shot
  // transfers by step.
  for (int round = 0; round < 8; ++round) {
    bool split_any = false;
    std::map<std::tuple<int, int, int>, std::vector<size_t>> groups;
    for (size_t i = 0; i < transfers.size(); ++i) {
      int tile;
      if (!single_tile(transfers[i], &tile)) continue;
      groups[{tile, transfers[i].dir == Transfer::Dir::In ? 0 : 1, transfers[i].epoch}]
          .push_back(i);
    }
    std::vector<Transfer> added;
    for (const auto& [key, members] : groups) {
      int budget = std::get<1>(key) == 0 ? fabric.ports_in_per_tile : fabric.ports_out_per_tile;
      if (static_cast<int>(members.size()) >= budget) continue;
      // Pick the largest splittable member above the size threshold.
      int best = -1;
      std::int64_t best_elems =
          std::max<std::int64_t>(2 * fabric.burst_alignment, fabric.dma_split_threshold) - 1;
      for (size_t mi : members) {
        const Transfer& t = transfers[mi];
        if (t.endpoints.size() < 2 && t.region.empty()) continue;
        bool splittable = t.endpoints.size() >= 2;
        if (!splittable)
          for (const auto& [o, sz] : t.region) {
            (void)o;
            splittable = splittable || sz >= 2;
          }
        if (!splittable) continue;
        if (t.elements > best_elems) {
          best_elems = t.elements;
          best = static_cast<int>(mi);
        }
      }
      if (best < 0) continue;
      Transfer t = transfers[static_cast<size_t>(best)];
      Transfer lo = t, hi = t;
      lo.endpoints.clear();
      hi.endpoints.clear();
      if (t.endpoints.size() >= 2) {
        std::int64_t mid = (t.endpoints.front().step + t.endpoints.back().step) / 2;
        for (auto& e : t.endpoints) (e.step <= mid ? lo : hi).endpoints.push_back(e);
        if (lo.endpoints.empty() || hi.endpoints.empty()) {
          size_t half = t.endpoints.size() / 2;
          lo.endpoints.assign(t.endpoints.begin(), t.endpoints.begin() + static_cast<long>(half));
          hi.endpoints.assign(t.endpoints.begin() + static_cast<long>(half), t.endpoints.end());
        }
      } else {
        // Region bisection along the widest axis.
        size_t axis = 0;
        for (size_t d = 1; d < t.region.size(); ++d)
          if (t.region[d].second > t.region[axis].second) axis = d;
        if (t.region[axis].second < 2) continue;
        std::int64_t half = t.region[axis].second / 2;
        Transfer::Endpoint e0 = t.endpoints[0], e1 = t.endpoints[0];
        e0.unit_region[axis].second = half;
        e0.global_region[axis].second = half;
        e1.unit_region[axis].first += half;
        e1.unit_region[axis].second -= half;
        e1.global_region[axis].first += half;
        e1.global_region[axis].second -= half;
        lo.endpoints.push_back(e0);
        hi.endpoints.push_back(e1);
      }
      auto rebound2 = [](Transfer& x) {
        if (x.endpoints.empty()) return;
        x.region = x.endpoints[0].global_region;
        x.elements = 0;
        for (const auto& e : x.endpoints) {
          std::int64_t n = 1;
          for (const auto& [o, sz] : e.global_region) {
            (void)o;
            n *= sz;
          }
          x.elements += n;
          for (size_t d = 0; d < x.region.size(); ++d) {
            std::int64_t lo_off = std::min(x.region[d].first, e.global_region[d].first);
            std::int64_t hi_off = std::max(x.region[d].first + x.region[d].second,
                                           e.global_region[d].first + e.global_region[d].second);
            x.region[d] = {lo_off, hi_off - lo_off};
          }
        }
      };
      rebound2(lo);
      rebound2(hi);
      if (lo.elements < fabric.burst_alignment || hi.elements < fabric.burst_alignment) continue;
      hi.id = static_cast<int>(transfers.size() + added.size()) + 2000 + round;
      transfers[static_cast<size_t>(best)] = std::move(lo);
      added.push_back(std::move(hi));
      split_any = true;
    }
    for (auto& t : added) transfers.push_back(std::move(t));
    if (!split_any) break;
  }

  std::sort(transfers.begin(), transfers.end(),
            [](const Transfer& a, const Transfer& b) { return a.id < b.id; });
  return transfers;
}

// ---------------------------------------------------------------------------
// Port assignment
// ---------------------------------------------------------------------------

std::optional<PortAssignment> assign_ports(const std::vector<Transfer>& transfers,
                                           const FabricConfig& fabric, SchedError* err) {
  PortAssignment pa;
  struct Item {
    int tile;
    Transfer::Dir dir;
    int epoch;
    std::int64_t first, last;
    int id;
  };
  std::vector<Item> items;
  for (const auto& t : transfers) {
    std::set<int> tiles;
    for (const auto& e : t.endpoints) tiles.insert(e.tile);
    for (int tile : tiles)
      items.push_back({tile, t.dir, t.epoch, t.first_step(tile), t.last_step(tile), t.id});
  }
  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
    return std::tie(a.tile, a.dir, a.epoch, a.first, a.id) <
           std::tie(b.tile, b.dir, b.epoch, b.first, b.id);
  });

  // Greedy interval assignment per (tile, dir): lowest free port.
  std::map<std::tuple<int, int, int>, std::vector<std::pair<std::int64_t, std::int64_t>>>
      port_busy;  // (tile, dir, port) -> intervals within the current epoch, reset per epoch
  std::map<std::tuple<int, int, int>, int> port_epoch;
  for (const auto& it : items) {
    int budget = it.dir == Transfer::Dir::In ? fabric.ports_in_per_tile : fabric.ports_out_per_tile;
    int chosen = -1;
    for (int port = 0; port < budget; ++port) {
      auto key = std::make_tuple(it.tile, static_cast<int>(it.dir), port);
      auto& busy = port_busy[key];
      if (port_epoch.count(key) && port_epoch[key] != it.epoch) busy.clear();
      port_epoch[key] = it.epoch;
      bool overlap = false;
      for (const auto& [f, l] : busy) overlap = overlap || !(it.last < f || l < it.first);
      if (!overlap) {
        busy.emplace_back(it.first, it.last);
        chosen = port;
        break;
      }
    }
    if (chosen < 0) {
      if (err) {
        err->tile = it.tile;
        err->step = it.first;
        err->message = "tile " + std::to_string(it.tile) + " needs more than " +
                       std::to_string(budget) + " concurrent " +
                       (it.dir == Transfer::Dir::In ? "input" : "output") +
                       " ports at step " + std::to_string(it.first);
      }
      return std::nullopt;
    }
    pa.slots.push_back(PortSlot{it.tile, it.dir, chosen, it.id, it.epoch, it.first, it.last});
  }
  return pa;
}

bool verify_port_safety(const DmaSchedule& s, const FabricConfig& fabric, std::string* why) {
  // Sweep: per (tile, dir, epoch, step), concurrently live slots <= budget
  // and no port double-booked.
  std::map<std::tuple<int, int, int, int>, std::vector<std::pair<std::int64_t, std::int64_t>>>
      per_port;
  for (const auto& slot : s.ports.slots) {
    int budget =
        slot.dir == Transfer::Dir::In ? fabric.ports_in_per_tile : fabric.ports_out_per_tile;
    if (slot.port >= budget) {
      if (why) *why = "port index exceeds budget";
      return false;
    }
    per_port[{slot.tile, static_cast<int>(slot.dir), slot.epoch, slot.port}].push_back(
        {slot.acquire, slot.release});
  }
  for (auto& [key, ivs] : per_port) {
    std::sort(ivs.begin(), ivs.end());
    for (size_t i = 1; i < ivs.size(); ++i) {
      if (ivs[i].first <= ivs[i - 1].second) {
        if (why) {
          std::ostringstream os;
          os << "tile " << std::get<0>(key) << " port " << std::get<3>(key)
             << " double-booked in epoch " << std::get<2>(key);
          *why = os.str();
        }
        return false;
      }
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Composition and export
// ---------------------------------------------------------------------------

DmaResult schedule_dma(const PhysicalMapping& m) {
  DmaResult result;
  auto levels = compute_unit_levels(m);
  if (!levels) {
    result.error = SchedError{0, 0, "contradictory epoch constraints (pipeline vs stage order)"};
    return result;
  }
  auto transfers = collect_transfers(m, *levels);
  transfers = merge_multicast(std::move(transfers));
  transfers = coalesce_spatial(std::move(transfers));
  transfers = split_for_ports(std::move(transfers), m.fabric);
  SchedError err;
  auto ports = assign_ports(transfers, m.fabric, &err);
  if (!ports) {
    result.error = err;
    return result;
  }
  DmaSchedule s;
  s.transfers = std::move(transfers);
  s.ports = std::move(*ports);
  s.unit_level = std::move(*levels);

  std::map<int, EpochInfo> epochs;
  for (const auto& t : s.transfers) {
    auto& e = epochs[t.epoch];
    e.index = t.epoch;
    e.transfers.push_back(t.id);
    for (const auto& ep : t.endpoints) e.args.push_back(ep.unit + "/" + t.buffer);
  }
  for (auto& [idx, e] : epochs) {
    (void)idx;
    std::sort(e.args.begin(), e.args.end());
    e.args.erase(std::unique(e.args.begin(), e.args.end()), e.args.end());
    s.epochs.push_back(std::move(e));
  }
  result.schedule = std::move(s);
  return result;
}

nlohmann::ordered_json schedule_to_json(const DmaSchedule& s) {
  nlohmann::ordered_json j;
  j["epochs"] = nlohmann::ordered_json::array();
  for (const auto& e : s.epochs) {
    nlohmann::ordered_json je;
    je["index"] = e.index;
    je["args"] = e.args;
    je["transfers"] = e.transfers;
    j["epochs"].push_back(je);
  }
  j["transfers"] = nlohmann::ordered_json::array();
  for (const auto& t : s.transfers) {
    nlohmann::ordered_json jt;
    jt["id"] = t.id;
    jt["buffer"] = t.buffer;
    jt["dir"] = t.dir == Transfer::Dir::In ? "in" : "out";
    jt["epoch"] = t.epoch;
    jt["token"] = t.token;
    jt["elements"] = t.elements;
    nlohmann::ordered_json region = nlohmann::ordered_json::array();
    for (const auto& [o, sz] : t.region) region.push_back({{"offset", o}, {"size", sz}});
    jt["region"] = region;
    nlohmann::ordered_json eps = nlohmann::ordered_json::array();
    for (const auto& ep : t.endpoints)
      eps.push_back({{"tile", ep.tile}, {"unit", ep.unit}, {"step", ep.step}});
    jt["endpoints"] = eps;
    j["transfers"].push_back(jt);
  }
  j["port_assignment"] = nlohmann::ordered_json::array();
  for (const auto& slot : s.ports.slots) {
    j["port_assignment"].push_back({{"tile", slot.tile},
                                    {"dir", slot.dir == Transfer::Dir::In ? "in" : "out"},
                                    {"port", slot.port},
                                    {"transfer", slot.transfer},
                                    {"epoch", slot.epoch},
                                    {"acquire", slot.acquire},
                                    {"release", slot.release}});
  }
  return j;
}

std::string schedule_gantt(const DmaSchedule& s) {
  std::ostringstream os;
  for (const auto& slot : s.ports.slots) {
    os << "tile " << slot.tile << " " << (slot.dir == Transfer::Dir::In ? " in" : "out")
       << " port " << slot.port << " epoch " << slot.epoch << " | ";
    for (std::int64_t step = 0; step < slot.acquire; ++step) os << ".";
    for (std::int64_t step = slot.acquire; step <= slot.release; ++step) os << "#";
    os << "  t" << slot.transfer << "\n";
  }
  return os.str();
}

}  // namespace datoc
