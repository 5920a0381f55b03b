#include "datoc/events.hpp"

#include <sstream>

#include "datoc/affine.hpp"

namespace datoc {

std::string stream_instance_name(const Program& p, StreamInstance si) {
  const auto& decl = p.streams[static_cast<size_t>(si.stream)];
  if (decl.grid.empty()) return decl.name;
  // Unflatten row-major.
  std::vector<std::int64_t> idx(decl.grid.size());
  std::int64_t rem = si.flat;
  for (int d = static_cast<int>(decl.grid.size()) - 1; d >= 0; --d) {
    idx[static_cast<size_t>(d)] = rem % decl.grid[static_cast<size_t>(d)];
    rem /= decl.grid[static_cast<size_t>(d)];
  }
  std::ostringstream os;
  os << decl.name << "[";
  for (size_t i = 0; i < idx.size(); ++i) {
    if (i) os << ",";
    os << idx[i];
  }
  os << "]";
  return os.str();
}

std::vector<std::vector<std::int64_t>> enumerate_coords(
    const std::vector<std::int64_t>& extents) {
  std::vector<std::vector<std::int64_t>> out;
  std::vector<std::int64_t> cur(extents.size(), 0);
  std::int64_t total = 1;
  for (auto e : extents) total *= e;
  out.reserve(static_cast<size_t>(total));
  for (std::int64_t i = 0; i < total; ++i) {
    out.push_back(cur);
    for (int d = static_cast<int>(extents.size()) - 1; d >= 0; --d) {
      if (++cur[static_cast<size_t>(d)] < extents[static_cast<size_t>(d)]) break;
      cur[static_cast<size_t>(d)] = 0;
    }
  }
  return out;
}

std::string coord_str(const std::vector<std::int64_t>& coord) {
  std::string s = "(";
  for (size_t i = 0; i < coord.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(coord[i]);
  }
  return s + ")";
}

// ---------------------------------------------------------------------------
// Instantiation
// ---------------------------------------------------------------------------

ExprPtr fold_constants(ExprPtr e) {
  for (auto& a : e->args) a = fold_constants(std::move(a));
  if (e->kind == ExprKind::Eltwise && e->args.size() == 2 &&
      e->args[0]->kind == ExprKind::Const && e->args[1]->kind == ExprKind::Const &&
      !e->args[0]->is_float_const && !e->args[1]->is_float_const) {
    std::int64_t a = e->args[0]->ival, b = e->args[1]->ival, v = 0;
    switch (e->elt_op) {
      case EltOp::Add: v = a + b; break;
      case EltOp::Sub: v = a - b; break;
      case EltOp::Mul: v = a * b; break;
      case EltOp::Max: v = a > b ? a : b; break;
      case EltOp::Min: v = a < b ? a : b; break;
    }
    return Expr::make_int(v, e->span);
  }
  return e;
}

namespace {

ExprPtr substitute_tids(ExprPtr e, const std::vector<std::int64_t>& coord) {
  if (e->kind == ExprKind::TidRef) {
    std::int64_t v = 0;
    if (e->axis >= 0 && e->axis < static_cast<int>(coord.size()))
      v = coord[static_cast<size_t>(e->axis)];
    return Expr::make_int(v, e->span);
  }
  for (auto& a : e->args) a = substitute_tids(std::move(a), coord);
  if (e->stream)
    for (auto& ix : e->stream->indices) ix = substitute_tids(std::move(ix), coord);
  for (auto& r : e->ranges) {
    if (!r.full) {
      r.lo = substitute_tids(std::move(r.lo), coord);
      r.hi = substitute_tids(std::move(r.hi), coord);
    }
  }
  return fold_constants(std::move(e));
}

StmtPtr substitute_stmt(StmtPtr s, const std::vector<std::int64_t>& coord) {
  for (auto& b : s->body) b = substitute_stmt(std::move(b), coord);
  if (s->value) s->value = substitute_tids(std::move(s->value), coord);
  if (s->stream)
    for (auto& ix : s->stream->indices) ix = substitute_tids(std::move(ix), coord);
  if (s->lvalue) {
    for (auto& r : s->lvalue->ranges) {
      if (!r.full) {
        r.lo = substitute_tids(std::move(r.lo), coord);
        r.hi = substitute_tids(std::move(r.hi), coord);
      }
    }
  }
  return s;
}

}  // namespace

std::vector<StmtPtr> instantiate_body(const TaskDef& t, const std::vector<std::int64_t>& coord) {
  std::vector<StmtPtr> out;
  out.reserve(t.body.size());
  for (const auto& s : t.body) out.push_back(substitute_stmt(s->clone(), coord));
  return out;
}

// ---------------------------------------------------------------------------
// Event extraction
// ---------------------------------------------------------------------------

namespace {

class Extractor {
 public:
  Extractor(const Program& p, std::int64_t cap) : p_(p), cap_(cap) {}

  UnitProfile run(const std::vector<StmtPtr>& body) {
    for (const auto& s : body) walk(*s);
    return std::move(out_);
  }

 private:
  const Program& p_;
  std::int64_t cap_;
  UnitProfile out_;
  std::map<std::string, bool> ivs_;
  std::map<AffineVar, std::int64_t> binding_;
  std::map<std::string, int> future_env_;  // local -> get_id
  int write_seq_ = 0;

  void error(const char* code, SourceSpan span, std::string msg) {
    out_.diags.push_back(Diagnostic::error(code, span, std::move(msg)));
  }

  std::optional<std::int64_t> eval_index(const Expr& e) {
    auto f = extract_affine(e, ivs_);
    if (!f) {
      error(code::NonAffineIndex, e.span,
            "index is not affine in loop variables after instantiation");
      return std::nullopt;
    }
    for (const auto& [v, c] : f->coeffs) {
      (void)c;
      if (!binding_.count(v)) {
        error(code::NonAffineIndex, e.span, "index references an unbound variable");
        return std::nullopt;
      }
    }
    return eval_affine(*f, binding_);
  }

  std::optional<StreamInstance> resolve(const StreamRef& r) {
    int si = p_.stream_index(r.name);
    if (si < 0) {
      error(code::Invalid, r.span, "unknown stream '" + r.name + "'");
      return std::nullopt;
    }
    const auto& decl = p_.streams[static_cast<size_t>(si)];
    if (r.indices.size() != decl.grid.size()) {
      error(code::Invalid, r.span, "stream index arity mismatch");
      return std::nullopt;
    }
    std::int64_t flat = 0;
    for (size_t d = 0; d < decl.grid.size(); ++d) {
      auto v = eval_index(*r.indices[d]);
      if (!v) return std::nullopt;
      if (*v < 0 || *v >= decl.grid[d]) {
        error(code::StreamIndexOob, r.span,
              "stream index " + std::to_string(*v) + " out of bounds for extent " +
                  std::to_string(decl.grid[d]));
        return std::nullopt;
      }
      flat = flat * decl.grid[d] + *v;
    }
    return StreamInstance{si, flat};
  }

  // Region ranges for a slice; nullopt when a bound is not evaluable.
  std::optional<std::vector<std::pair<std::int64_t, std::int64_t>>> eval_ranges(
      const std::vector<SliceRange>& ranges) {
    std::vector<std::pair<std::int64_t, std::int64_t>> out;
    for (const auto& r : ranges) {
      if (r.full) {
        out.emplace_back(-1, -1);  // full-dim marker
        continue;
      }
      auto lo = eval_index(*r.lo);
      auto hi = eval_index(*r.hi);
      if (!lo || !hi) return std::nullopt;
      out.emplace_back(*lo, *hi - *lo);
    }
    return out;
  }

  // Walks an expression: emits Get events in evaluation order, counts
  // future uses and records parameter reads.
  // Returns the get_id when the expression is exactly a Get (for the
  // local-future binding case), -1 otherwise.
  int walk_expr(const Expr& e, bool directly_sliced = false) {
    switch (e.kind) {
      case ExprKind::Get: {
        auto inst = resolve(*e.stream);
        int id = static_cast<int>(out_.get_spans.size());
        out_.get_spans.push_back(e.span);
        out_.future_uses[id] = 0;
        if (inst) {
          Event ev;
          ev.kind = Event::Kind::Get;
          ev.inst = *inst;
          ev.span = e.span;
          ev.get_id = id;
          out_.events.push_back(ev);
        }
        return id;
      }
      case ExprKind::Await: {
        int id = walk_expr(*e.args[0]);
        if (id >= 0) out_.future_uses[id] += 1;  // await consumes
        return -1;
      }
      case ExprKind::LocalRef: {
        auto it = future_env_.find(e.name);
        if (it != future_env_.end())
          out_.future_uses[it->second] += 1;
        return -1;
      }
      case ExprKind::ParamRef: {
        if (!directly_sliced) {
          RegionAccess a;
          a.param = e.name;
          a.write = false;
          out_.accesses.push_back(std::move(a));
        }
        return -1;
      }
      case ExprKind::Slice: {
        const Expr& base = *e.args[0];
        if (base.kind == ExprKind::ParamRef) {
          RegionAccess a;
          a.param = base.name;
          a.write = false;
          if (auto rs = eval_ranges(e.ranges)) a.ranges = std::move(*rs);
          out_.accesses.push_back(std::move(a));
          walk_expr(base, /*directly_sliced=*/true);
          return -1;
        }
        int id = walk_expr(base);
        if (id >= 0) out_.future_uses[id] += 1;
        return -1;
      }
      default: {
        for (const auto& a : e.args) {
          int id = walk_expr(*a);
          if (id >= 0) out_.future_uses[id] += 1;  // get nested in computation
        }
        return -1;
      }
    }
  }

  void walk(const Stmt& s) {
    switch (s.kind) {
      case StmtKind::For: {
        if (s.bound <= 0) return;
        std::int64_t before = static_cast<std::int64_t>(out_.events.size());
        int gets_before = static_cast<int>(out_.get_spans.size());
        std::map<int, int> uses_before = out_.future_uses;
        std::map<StreamInstance, std::int64_t> delta_before = collect_deltas();

        bool fresh = !ivs_.count(s.iv);
        ivs_[s.iv] = true;
        AffineVar var;
        var.iv = s.iv;

        // First iteration decides whether the whole loop can be unrolled.
        binding_[var] = 0;
        for (const auto& b : s.body) walk(*b);
        std::int64_t per_iter = static_cast<std::int64_t>(out_.events.size()) - before;

        if (per_iter * s.bound <= cap_) {
          for (std::int64_t i = 1; i < s.bound; ++i) {
            binding_[var] = i;
            for (const auto& b : s.body) walk(*b);
          }
        } else if (s.bound > 1) {
          // Steady-state summary: the first iteration stands for all of
          // them; its net token delta per stream must be zero.
          out_.summarized = true;
          std::map<StreamInstance, std::int64_t> delta_after = collect_deltas();
          for (const auto& [inst, d] : delta_after) {
            std::int64_t pre = delta_before.count(inst) ? delta_before[inst] : 0;
            if (d - pre != 0) {
              error(code::TokenLeak, s.span,
                    "loop too large to unroll and one iteration has a nonzero token "
                    "delta on stream " +
                        stream_instance_name(p_, inst));
            }
          }
          // A future bound outside the loop and consumed inside would be
          // consumed once per iteration; make that visible as reuse.
          for (auto& [id, n] : out_.future_uses) {
            if (id >= gets_before) continue;
            auto it = uses_before.find(id);
            int prev = it == uses_before.end() ? 0 : it->second;
            if (n > prev) n = prev + 2;
          }
        }
        binding_.erase(var);
        if (fresh) ivs_.erase(s.iv);
        return;
      }
      case StmtKind::Assign: {
        int id = walk_expr(*s.value);
        if (id >= 0) out_.future_uses[id] += 1;
        // A vanished future (local overwritten while holding one).
        auto it = future_env_.find(s.lvalue->name);
        if (it != future_env_.end()) future_env_.erase(it);
        RegionAccess a;
        a.param = s.lvalue->name;
        a.write = true;
        a.seq = write_seq_++;
        if (s.lvalue->has_ranges) {
          if (auto rs = eval_ranges(s.lvalue->ranges)) a.ranges = std::move(*rs);
        }
        out_.accesses.push_back(std::move(a));
        return;
      }
      case StmtKind::Put: {
        int id = walk_expr(*s.value);
        if (id >= 0) out_.future_uses[id] += 1;
        auto inst = resolve(*s.stream);
        if (inst) {
          Event ev;
          ev.kind = Event::Kind::Put;
          ev.inst = *inst;
          ev.span = s.span;
          out_.events.push_back(ev);
        }
        return;
      }
      case StmtKind::LocalDecl: {
        if (!s.value) return;
        // A bare get (or awaited get) initializer binds a future to the
        // local; its consumption happens at a later use.
        const Expr* init = s.value.get();
        if (init->kind == ExprKind::Get) {
          int id = walk_expr(*init);
          future_env_[s.local_name] = id;
          return;
        }
        int id = walk_expr(*init);
        if (id >= 0) out_.future_uses[id] += 1;
        future_env_.erase(s.local_name);
        return;
      }
    }
  }

  std::map<StreamInstance, std::int64_t> collect_deltas() const {
    std::map<StreamInstance, std::int64_t> d;
    for (const auto& ev : out_.events)
      d[ev.inst] += ev.kind == Event::Kind::Put ? 1 : -1;
    return d;
  }
};

}  // namespace

UnitProfile extract_unit_profile(const std::vector<StmtPtr>& body, const Program& p,
                                 std::int64_t cap) {
  Extractor ex(p, cap);
  return ex.run(body);
}

}  // namespace datoc
