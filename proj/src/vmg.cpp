#include "datoc/vmg.hpp"

#include <algorithm>
#include <sstream>

namespace datoc {

TileRegion shard_region(const std::string& param, const TensorType& type,
                        const LayoutType& layout, const std::vector<std::int64_t>& extents,
                        const std::vector<std::int64_t>& coord) {
  TileRegion r;
  r.param = param;
  for (int d = 0; d < type.rank(); ++d) {
    const auto& ax = layout.axes[static_cast<size_t>(d)];
    std::int64_t dim = type.shape[static_cast<size_t>(d)];
    if (ax.is_sharded() && ax.device_axis < static_cast<int>(extents.size())) {
      std::int64_t extent = extents[static_cast<size_t>(ax.device_axis)];
      std::int64_t size = dim / extent;
      std::int64_t c = ax.device_axis < static_cast<int>(coord.size())
                           ? coord[static_cast<size_t>(ax.device_axis)]
                           : 0;
      r.region.emplace_back(c * size, size);
    } else {
      r.region.emplace_back(0, dim);
    }
  }
  return r;
}

std::vector<UnitPtr> Node::shots() const {
  std::vector<UnitPtr> out;
  for (const auto& s : stages)
    for (const auto& u : s.units) out.push_back(u);
  return out;
}

std::map<std::string, int> Vmg::unit_to_node() const {
  std::map<std::string, int> m;
  for (size_t i = 0; i < nodes.size(); ++i)
    for (const auto& s : nodes[i].stages)
      for (const auto& u : s.units) m[u->id] = static_cast<int>(i);
  return m;
}

std::vector<std::int64_t> Vmg::extents_of(const Unit& u) const {
  const TaskDef* t = program->find_task(u.task);
  return t ? t->mapping : std::vector<std::int64_t>{};
}

namespace {

std::int64_t local_bytes_estimate(const TaskDef& t, const std::vector<StmtPtr>& body,
                                  const Program& p) {
  // Inputs + outputs + declared locals, one tile each.
  std::int64_t bytes = 0;
  for (const auto& prm : t.params) {
    TensorType tile{prm.type.elem, tile_shape(prm.type, prm.layout, t.mapping)};
    bytes += tile.byte_size();
  }
  std::function<void(const Stmt&)> walk = [&](const Stmt& s) {
    if (s.kind == StmtKind::LocalDecl && s.local_type) bytes += s.local_type->byte_size();
    for (const auto& b : s.body) walk(*b);
  };
  for (const auto& s : body) walk(*s);
  (void)p;
  return bytes;
}

UnitPtr make_unit(std::string id, std::string task, std::vector<std::int64_t> coord,
                  bool is_combine, std::vector<StmtPtr> body, const Program& p,
                  const TaskDef* tdef) {
  auto u = std::make_shared<Unit>();
  u->id = std::move(id);
  u->task = std::move(task);
  u->coord = std::move(coord);
  u->is_combine = is_combine;
  u->body = std::move(body);
  u->profile = extract_unit_profile(u->body, p);
  u->body_key = canonical_body_key(u->body);
  if (tdef) u->local_bytes = local_bytes_estimate(*tdef, u->body, p);
  return u;
}

// Rebuilds the edge list from unit profiles: one edge per stream instance
// that has both endpoints.
std::vector<VEdge> wire_edges(const Program& p, const std::vector<Node>& nodes,
                              const std::map<int, ReduceOp>& reduction_streams,
                              Diagnostics* diags) {
  struct Endpoint {
    std::string unit;
    bool present = false;
  };
  std::map<StreamInstance, Endpoint> producer, consumer;
  for (const auto& n : nodes) {
    for (const auto& st : n.stages) {
      for (const auto& u : st.units) {
        for (const auto& ev : u->profile.events) {
          auto& side = ev.kind == Event::Kind::Put ? producer[ev.inst] : consumer[ev.inst];
          if (side.present && side.unit != u->id && diags) {
            diags->push_back(Diagnostic::error(
                code::MultiEndpoint, ev.span,
                "stream " + stream_instance_name(p, ev.inst) + " has multiple endpoints"));
          }
          side.unit = u->id;
          side.present = true;
        }
      }
    }
  }
  std::vector<VEdge> edges;
  for (const auto& [inst, prod] : producer) {
    auto it = consumer.find(inst);
    if (it == consumer.end() || !it->second.present) continue;
    VEdge e;
    e.inst = inst;
    e.src_unit = prod.unit;
    e.dst_unit = it->second.unit;
    e.payload = p.streams[static_cast<size_t>(inst.stream)].type.elem;
    auto rit = reduction_streams.find(inst.stream);
    if (rit != reduction_streams.end()) {
      e.kind = VEdge::Kind::Reduction;
      e.reduce_op = rit->second;
    }
    edges.push_back(std::move(e));
  }
  std::sort(edges.begin(), edges.end(), [](const VEdge& a, const VEdge& b) {
    return std::tie(a.inst.stream, a.inst.flat) < std::tie(b.inst.stream, b.inst.flat);
  });
  return edges;
}

}  // namespace

VmgBuildResult build_vmg(const Program& p) {
  VmgBuildResult result;
  Vmg g;
  g.program = std::make_shared<Program>(p.clone());

  for (const auto& t : p.tasks) {
    for (auto& coord : enumerate_coords(t.mapping)) {
      std::string id = t.name + "@" + coord_str(coord);
      auto unit = make_unit(id, t.name, coord, false, instantiate_body(t, coord),
                            *g.program, &t);
      for (const auto& d : unit->profile.diags) result.diags.push_back(d);
      Node n;
      n.id = unit->id;
      n.stages.push_back(Stage{{unit}});
      g.nodes.push_back(std::move(n));
    }
  }
  if (has_error(result.diags)) return result;

  std::sort(g.nodes.begin(), g.nodes.end(),
            [](const Node& a, const Node& b) { return a.id < b.id; });
  g.edges = wire_edges(*g.program, g.nodes, g.reduction_streams, &result.diags);
  if (has_error(result.diags)) return result;
  result.vmg = std::move(g);
  return result;
}

// ---------------------------------------------------------------------------
// Allreduce lowering
// ---------------------------------------------------------------------------

namespace {

const Stmt* find_allreduce_assign(const std::vector<StmtPtr>& body, int site_id) {
  for (const auto& s : body) {
    if (s->kind == StmtKind::Assign && s->value->kind == ExprKind::AllReduce &&
        s->value->site_id == site_id)
      return s.get();
  }
  return nullptr;
}

EltOp to_elt(ReduceOp op) {
  switch (op) {
    case ReduceOp::Add: return EltOp::Add;
    case ReduceOp::Mul: return EltOp::Mul;
    case ReduceOp::Max: return EltOp::Max;
    case ReduceOp::Min: return EltOp::Min;
  }
  return EltOp::Add;
}

StreamRef ref_to(const std::string& name, std::int64_t slot) {
  StreamRef r;
  r.name = name;
  r.indices.push_back(Expr::make_int(slot));
  return r;
}

ExprPtr awaited_get(const std::string& stream, std::int64_t slot) {
  return Expr::make_await(Expr::make_get(ref_to(stream, slot)));
}

}  // namespace

Vmg lower_allreduce(const Vmg& g, const LayoutReport& layouts) {
  Vmg out;
  auto program = std::make_shared<Program>(g.program->clone());
  out.reduction_streams = g.reduction_streams;

  std::map<std::string, std::vector<AllReduceSite>> sites_by_task;
  for (const auto& [id, site] : layouts.sites) {
    (void)id;
    sites_by_task[site.task].push_back(site);
  }

  // Per unit and site: the reduction-tree input its partial value feeds.
  struct LeafTarget {
    std::string stream;
    std::int64_t slot = 0;
  };
  std::map<std::string, std::map<int, LeafTarget>> leaf_targets;  // unit id -> site -> dest
  std::set<int> identity_sites;
  std::vector<Node> combine_nodes;

  for (const auto& [task_name, sites] : sites_by_task) {
    const TaskDef* tdef = program->find_task(task_name);
    if (!tdef) continue;
    for (const auto& site : sites) {
      if (site.axes.empty()) {
        identity_sites.insert(site.site_id);
        continue;
      }
      const auto& extents = tdef->mapping;
      std::vector<std::int64_t> group_extents;
      for (size_t d = 0; d < extents.size(); ++d)
        if (!site.axes.count(static_cast<int>(d))) group_extents.push_back(extents[d]);
      std::int64_t group_size = 1;
      for (int a : site.axes) group_size *= extents[static_cast<size_t>(a)];
      if (group_size == 1) {
        identity_sites.insert(site.site_id);
        continue;
      }

      for (auto& group_coord : enumerate_coords(group_extents)) {
        std::ostringstream base_os;
        base_os << "$red." << task_name << "." << site.site_id << ".g";
        for (size_t i = 0; i < group_coord.size(); ++i) base_os << "_" << group_coord[i];
        std::string base = base_os.str();

        // Value counts per tree level: w0 = group size, w_{L+1} = ceil(w_L/2).
        std::vector<std::int64_t> widths{group_size};
        while (widths.back() > 1) widths.push_back(widths.back() / 2 + widths.back() % 2);

        auto stream_name = [&](std::int64_t level, std::int64_t pair) {
          return base + ".L" + std::to_string(level) + "P" + std::to_string(pair);
        };
        // Where the value at (level, index) is consumed: carried values skip
        // ahead to the next level.
        std::function<LeafTarget(std::int64_t, std::int64_t)> dest_of =
            [&](std::int64_t level, std::int64_t index) -> LeafTarget {
          std::int64_t pairs = widths[static_cast<size_t>(level)] / 2;
          if (index < 2 * pairs)
            return LeafTarget{stream_name(level, index / 2), index % 2};
          return dest_of(level + 1, pairs);
        };

        // Representative coordinate with site axes zeroed.
        std::vector<std::int64_t> rep_coord(extents.size(), 0);
        {
          size_t gi = 0;
          for (size_t d = 0; d < extents.size(); ++d)
            if (!site.axes.count(static_cast<int>(d))) rep_coord[d] = group_coord[gi++];
        }

        // Leaf targets for every member of the group.
        for (auto& coord : enumerate_coords(extents)) {
          bool in_group = true;
          size_t gi = 0;
          for (size_t d = 0; d < extents.size() && in_group; ++d)
            if (!site.axes.count(static_cast<int>(d)))
              in_group = coord[d] == group_coord[gi++];
          if (!in_group) continue;
          std::int64_t member = 0;
          for (size_t d = 0; d < extents.size(); ++d)
            if (site.axes.count(static_cast<int>(d)))
              member = member * extents[d] + coord[d];
          leaf_targets[task_name + "@" + coord_str(coord)][site.site_id] =
              dest_of(0, member);
        }

        // Declare every pair stream up front so combine bodies resolve
        // against the final stream table.
        for (size_t level = 0; level + 1 < widths.size(); ++level) {
          std::int64_t pairs = widths[level] / 2;
          for (std::int64_t pc = 0; pc < pairs; ++pc) {
            StreamDecl sd;
            sd.name = stream_name(static_cast<std::int64_t>(level), pc);
            sd.type.elem = site.tile;
            sd.type.depth = 2;
            sd.grid = {2};
            program->streams.push_back(sd);
            out.reduction_streams[static_cast<int>(program->streams.size()) - 1] = site.op;
          }
        }

        // Combine units, level by level.
        for (size_t level = 0; level + 1 < widths.size(); ++level) {
          std::int64_t pairs = widths[level] / 2;
          for (std::int64_t pc = 0; pc < pairs; ++pc) {
            std::string in_name = stream_name(static_cast<std::int64_t>(level), pc);

            ExprPtr value = Expr::make_eltwise(
                to_elt(site.op), awaited_get(in_name, 0), awaited_get(in_name, 1));
            std::vector<StmtPtr> body;
            bool is_root = widths[level + 1] == 1;
            if (is_root) {
              auto inst_body = instantiate_body(*tdef, rep_coord);
              const Stmt* asg = find_allreduce_assign(inst_body, site.site_id);
              LValue lv;
              if (asg) {
                lv.name = asg->lvalue->name;
                lv.has_ranges = asg->lvalue->has_ranges;
                for (const auto& r : asg->lvalue->ranges) {
                  SliceRange cr;
                  cr.full = r.full;
                  if (!r.full) {
                    cr.lo = r.lo->clone();
                    cr.hi = r.hi->clone();
                  }
                  lv.ranges.push_back(std::move(cr));
                }
              }
              body.push_back(Stmt::make_assign(std::move(lv), std::move(value)));
            } else {
              LeafTarget next = dest_of(static_cast<std::int64_t>(level) + 1, pc);
              body.push_back(Stmt::make_put(ref_to(next.stream, next.slot), std::move(value)));
            }
            std::ostringstream uid;
            uid << task_name << ".red" << site.site_id << "@" << base.substr(5) << ".L"
                << level << "P" << pc;
            Node cn;
            auto cu = make_unit(uid.str(), task_name, rep_coord, true, std::move(body),
                                *program, tdef);
            cn.id = cu->id;
            cn.stages.push_back(Stage{{cu}});
            combine_nodes.push_back(std::move(cn));
          }
        }
      }
    }
  }

  // Rewrite member units: each lowered assignment becomes a put into its
  // tree input; identity sites collapse to the plain operand.
  std::vector<Node> nodes;
  for (const auto& n : g.nodes) {
    for (const auto& st : n.stages) {
      for (const auto& u : st.units) {
        const TaskDef* tdef = program->find_task(u->task);
        auto lt = leaf_targets.find(u->id);
        bool has_sites = sites_by_task.count(u->task) > 0;
        if (!has_sites) {
          Node keep;
          keep.id = u->id;
          keep.stages.push_back(Stage{{u}});
          nodes.push_back(std::move(keep));
          continue;
        }
        std::vector<StmtPtr> body;
        for (const auto& s : u->body) body.push_back(s->clone());
        for (auto& s : body) {
          if (s->kind != StmtKind::Assign || s->value->kind != ExprKind::AllReduce) continue;
          int sid = s->value->site_id;
          if (identity_sites.count(sid)) {
            ExprPtr operand = s->value->args[0]->clone();
            s->value = std::move(operand);
            continue;
          }
          if (lt != leaf_targets.end() && lt->second.count(sid)) {
            const LeafTarget& target = lt->second.at(sid);
            s = Stmt::make_put(ref_to(target.stream, target.slot),
                               s->value->args[0]->clone(), s->span);
          }
        }
        Node keep;
        keep.id = u->id;
        keep.stages.push_back(Stage{
            {make_unit(u->id, u->task, u->coord, u->is_combine, std::move(body), *program,
                       tdef)}});
        nodes.push_back(std::move(keep));
      }
    }
  }
  for (auto& cn : combine_nodes) nodes.push_back(std::move(cn));

  std::sort(nodes.begin(), nodes.end(), [](const Node& a, const Node& b) { return a.id < b.id; });
  out.program = program;
  out.nodes = std::move(nodes);
  out.edges = wire_edges(*program, out.nodes, out.reduction_streams, nullptr);
  return out;
}

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------

std::string to_dot(const Vmg& g) {
  std::ostringstream os;
  os << "digraph vmg {\n";
  os << "  rankdir=LR;\n  node [shape=box, fontname=\"monospace\"];\n";
  auto u2n = g.unit_to_node();
  for (const auto& n : g.nodes) {
    os << "  \"" << n.id << "\" [label=\"" << n.id << "/" << n.shot_count() << "\"];\n";
  }
  for (const auto& e : g.edges) {
    int src = u2n.count(e.src_unit) ? u2n.at(e.src_unit) : -1;
    int dst = u2n.count(e.dst_unit) ? u2n.at(e.dst_unit) : -1;
    if (src < 0 || dst < 0 || src == dst) continue;
    os << "  \"" << g.nodes[static_cast<size_t>(src)].id << "\" -> \""
       << g.nodes[static_cast<size_t>(dst)].id << "\" [label=\""
       << stream_instance_name(*g.program, e.inst) << "\""
       << (e.kind == VEdge::Kind::Reduction ? ", style=dashed" : "") << "];\n";
  }
  os << "}\n";
  return os.str();
}

nlohmann::ordered_json vmg_to_json(const Vmg& g) {
  nlohmann::ordered_json j;
  j["nodes"] = nlohmann::ordered_json::array();
  for (const auto& n : g.nodes) {
    nlohmann::ordered_json jn;
    jn["id"] = n.id;
    jn["shots"] = n.shot_count();
    jn["stages"] = nlohmann::ordered_json::array();
    for (const auto& st : n.stages) {
      nlohmann::ordered_json js = nlohmann::ordered_json::array();
      for (const auto& u : st.units) js.push_back(u->id);
      jn["stages"].push_back(js);
    }
    j["nodes"].push_back(jn);
  }
  j["edges"] = nlohmann::ordered_json::array();
  for (const auto& e : g.edges) {
    nlohmann::ordered_json je;
    je["stream"] = stream_instance_name(*g.program, e.inst);
    je["kind"] = e.kind == VEdge::Kind::Reduction ? "reduction" : "stream";
    if (e.kind == VEdge::Kind::Reduction) je["op"] = reduce_op_name(e.reduce_op);
    je["src"] = e.src_unit;
    je["dst"] = e.dst_unit;
    j["edges"].push_back(je);
  }
  return j;
}

}  // namespace datoc
