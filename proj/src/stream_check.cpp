#include <algorithm>
#include <functional>

#include "datoc/typecheck.hpp"

namespace datoc {

namespace {

struct Instance {
  int task = -1;
  std::vector<std::int64_t> coord;
  UnitProfile profile;
  size_t next_event = 0;

  bool done() const { return next_event >= profile.events.size(); }
};

std::string instance_name(const Program& p, const Instance& in) {
  return p.tasks[static_cast<size_t>(in.task)].name + coord_str(in.coord);
}

}  // namespace

StreamCheckResult check_streams(const Program& p) {
  StreamCheckResult result;

  std::vector<Instance> instances;
  for (size_t ti = 0; ti < p.tasks.size(); ++ti) {
    const auto& t = p.tasks[ti];
    for (auto& coord : enumerate_coords(t.mapping)) {
      Instance in;
      in.task = static_cast<int>(ti);
      in.coord = coord;
      auto body = instantiate_body(t, coord);
      in.profile = extract_unit_profile(body, p);
      instances.push_back(std::move(in));
    }
  }

  bool summaries = false;
  for (auto& in : instances) {
    for (auto& d : in.profile.diags) result.diags.push_back(d);
    summaries = summaries || in.profile.summarized;
  }
  if (has_error(result.diags)) return result;

  // Point-to-point: each stream instance has at most one static producer
  // and one consumer instance.
  std::map<StreamInstance, std::set<int>> producers, consumers;
  for (size_t i = 0; i < instances.size(); ++i) {
    for (const auto& ev : instances[i].profile.events) {
      auto& side = ev.kind == Event::Kind::Put ? producers : consumers;
      side[ev.inst].insert(static_cast<int>(i));
    }
  }
  for (const auto& [inst, ps] : producers) {
    if (ps.size() > 1) {
      Diagnostic d = Diagnostic::error(
          code::MultiEndpoint, p.streams[static_cast<size_t>(inst.stream)].span,
          "stream " + stream_instance_name(p, inst) + " has multiple producer instances");
      for (int i : ps) d.notes.push_back("producer: " + instance_name(p, instances[static_cast<size_t>(i)]));
      result.diags.push_back(std::move(d));
    }
  }
  for (const auto& [inst, cs] : consumers) {
    if (cs.size() > 1) {
      Diagnostic d = Diagnostic::error(
          code::MultiEndpoint, p.streams[static_cast<size_t>(inst.stream)].span,
          "stream " + stream_instance_name(p, inst) + " has multiple consumer instances");
      for (int i : cs) d.notes.push_back("consumer: " + instance_name(p, instances[static_cast<size_t>(i)]));
      result.diags.push_back(std::move(d));
    }
  }
  if (has_error(result.diags)) return result;

  // Greedy maximal firing. Streams are point-to-point, so the event net is
  // conflict-free and greedy firing is complete: if it blocks, no schedule
  // completes.
  std::map<StreamInstance, std::int64_t> used;
  auto depth_of = [&](StreamInstance si) {
    return static_cast<std::int64_t>(p.streams[static_cast<size_t>(si.stream)].type.depth);
  };

  bool progress = true;
  while (progress) {
    progress = false;
    for (auto& in : instances) {
      while (!in.done()) {
        const Event& ev = in.profile.events[in.next_event];
        if (ev.kind == Event::Kind::Put) {
          if (used[ev.inst] >= depth_of(ev.inst)) break;
          used[ev.inst] += 1;
        } else {
          if (used[ev.inst] <= 0) break;
          used[ev.inst] -= 1;
        }
        in.next_event += 1;
        progress = true;
      }
    }
  }

  bool all_done = std::all_of(instances.begin(), instances.end(),
                              [](const Instance& i) { return i.done(); });
  if (!all_done) {
    // Wait-for graph: a blocked instance waits on the peer of the stream
    // its next event needs.
    std::map<int, int> waits_on;  // instance -> instance (-1 none)
    std::map<int, std::string> wait_label;
    for (size_t i = 0; i < instances.size(); ++i) {
      auto& in = instances[i];
      if (in.done()) continue;
      const Event& ev = in.profile.events[in.next_event];
      const auto& peers = ev.kind == Event::Kind::Put ? consumers[ev.inst] : producers[ev.inst];
      waits_on[static_cast<int>(i)] = peers.empty() ? -1 : *peers.begin();
      wait_label[static_cast<int>(i)] =
          instance_name(p, in) + " waits on " +
          (ev.kind == Event::Kind::Put ? "put(" : "get(") + stream_instance_name(p, ev.inst) +
          ")";
    }
    // Find a cycle by walking the (partial) functional graph.
    std::vector<int> cycle;
    {
      std::map<int, int> mark;
      for (const auto& [start, _] : waits_on) {
        if (mark.count(start)) continue;
        std::vector<int> path;
        int cur = start;
        while (cur >= 0 && waits_on.count(cur) && !mark.count(cur)) {
          mark[cur] = 1;
          path.push_back(cur);
          cur = waits_on[cur];
        }
        auto it = std::find(path.begin(), path.end(), cur);
        if (cur >= 0 && it != path.end()) {
          cycle.assign(it, path.end());
          break;
        }
      }
    }
    Diagnostic d = Diagnostic::error(
        code::Deadlock,
        instances.empty() ? SourceSpan{} : p.tasks[static_cast<size_t>(instances[0].task)].span,
        "no task instance can advance; " + std::to_string(waits_on.size()) +
            " instance(s) blocked");
    if (!cycle.empty()) {
      std::string c = "wait cycle:";
      for (int i : cycle) c += " " + wait_label[i] + ";";
      d.notes.push_back(c);
    }
    for (const auto& [i, label] : wait_label) {
      (void)i;
      d.notes.push_back(label);
    }
    result.diags.push_back(std::move(d));
  }

  // Residual tokens (puts != gets).
  for (const auto& [inst, count] : used) {
    if (count != 0 && all_done) {
      result.diags.push_back(Diagnostic::error(
          code::TokenLeak, p.streams[static_cast<size_t>(inst.stream)].span,
          "stream " + stream_instance_name(p, inst) + " ends with residual used count " +
              std::to_string(count)));
    }
  }

  // Futures: every get result must be consumed exactly once.
  for (const auto& in : instances) {
    for (const auto& [get_id, uses] : in.profile.future_uses) {
      if (uses == 1) continue;
      SourceSpan sp = in.profile.get_spans[static_cast<size_t>(get_id)];
      result.diags.push_back(Diagnostic::error(
          code::FutureReuse, sp,
          uses == 0 ? "get result is never consumed (in " + instance_name(p, in) + ")"
                    : "get result is consumed " + std::to_string(uses) + " times (in " +
                          instance_name(p, in) + ")"));
    }
  }

  if (has_error(result.diags)) return result;

  StreamReport report;
  report.used_summaries = summaries;
  std::map<StreamInstance, std::pair<std::int64_t, std::int64_t>> counts;  // puts, gets
  for (const auto& in : instances) {
    report.total_events += static_cast<std::int64_t>(in.profile.events.size());
    for (const auto& ev : in.profile.events) {
      if (ev.kind == Event::Kind::Put)
        counts[ev.inst].first += 1;
      else
        counts[ev.inst].second += 1;
    }
  }
  for (const auto& [inst, pg] : counts) {
    StreamInstanceReport r;
    r.inst = inst;
    r.name = stream_instance_name(p, inst);
    r.depth = p.streams[static_cast<size_t>(inst.stream)].type.depth;
    r.puts = pg.first;
    r.gets = pg.second;
    r.peak_occupancy = std::min<std::int64_t>(r.depth, r.puts);
    report.streams.push_back(std::move(r));
  }
  result.report = std::move(report);
  return result;
}

// ---------------------------------------------------------------------------
// Await insertion
// ---------------------------------------------------------------------------

namespace {

class AwaitInserter {
 public:
  void run(std::vector<StmtPtr>& body) {
    for (auto& s : body) walk_stmt(*s);
  }

 private:
  std::map<std::string, bool> pending_;  // local -> future not yet awaited

  // Wraps gets nested inside expressions and first uses of future-bound
  // locals. `e` is visited in evaluation order.
  void wrap(ExprPtr& e) {
    if (e->kind == ExprKind::Get) {
      SourceSpan sp = e->span;
      e = Expr::make_await(std::move(e), sp);
      return;
    }
    if (e->kind == ExprKind::Await) {
      // Already awaited; don't descend into the get below.
      if (e->args[0]->kind == ExprKind::Get) return;
      if (e->args[0]->kind == ExprKind::LocalRef) {
        pending_[e->args[0]->name] = false;
        return;
      }
      wrap(e->args[0]);
      return;
    }
    if (e->kind == ExprKind::LocalRef) {
      auto it = pending_.find(e->name);
      if (it != pending_.end() && it->second) {
        it->second = false;
        SourceSpan sp = e->span;
        e = Expr::make_await(std::move(e), sp);
      }
      return;
    }
    for (auto& a : e->args) wrap(a);
    if (e->stream)
      for (auto& ix : e->stream->indices) wrap(ix);
    for (auto& r : e->ranges) {
      if (!r.full) {
        wrap(r.lo);
        wrap(r.hi);
      }
    }
  }

  void walk_stmt(Stmt& s) {
    switch (s.kind) {
      case StmtKind::For:
        for (auto& b : s.body) walk_stmt(*b);
        return;
      case StmtKind::LocalDecl:
        if (s.value && s.value->kind == ExprKind::Get) {
          pending_[s.local_name] = true;  // future stored, await at first use
          return;
        }
        if (s.value) wrap(s.value);
        if (!s.local_name.empty()) pending_.erase(s.local_name);
        return;
      case StmtKind::Assign:
        wrap(s.value);
        pending_.erase(s.lvalue->name);
        return;
      case StmtKind::Put:
        wrap(s.value);
        return;
    }
  }
};

}  // namespace

Program insert_awaits(const Program& p) {
  Program out = p.clone();
  for (auto& t : out.tasks) {
    AwaitInserter ins;
    ins.run(t.body);
  }
  return out;
}

}  // namespace datoc
