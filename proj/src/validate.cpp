#include "datoc/validate.hpp"

#include <functional>
#include <map>
#include <set>

#include "datoc/affine.hpp"

namespace datoc {

// ---------------------------------------------------------------------------
// Affine extraction
// ---------------------------------------------------------------------------

std::optional<AffineForm> extract_affine(const Expr& e, const std::map<std::string, bool>& ivs) {
  switch (e.kind) {
    case ExprKind::Const:
      if (e.is_float_const) return std::nullopt;
      return AffineForm{e.ival, {}};
    case ExprKind::TidRef: {
      AffineForm f;
      AffineVar v;
      v.is_tid = true;
      v.tid_axis = e.axis;
      f.coeffs[v] = 1;
      return f;
    }
    case ExprKind::LocalRef: {
      if (!ivs.count(e.name)) return std::nullopt;
      AffineForm f;
      AffineVar v;
      v.iv = e.name;
      f.coeffs[v] = 1;
      return f;
    }
    case ExprKind::Eltwise: {
      auto a = extract_affine(*e.args[0], ivs);
      auto b = extract_affine(*e.args[1], ivs);
      if (!a || !b) return std::nullopt;
      if (e.elt_op == EltOp::Add || e.elt_op == EltOp::Sub) {
        std::int64_t sign = e.elt_op == EltOp::Add ? 1 : -1;
        AffineForm f = *a;
        f.constant += sign * b->constant;
        for (const auto& [v, c] : b->coeffs) {
          f.coeffs[v] += sign * c;
          if (f.coeffs[v] == 0) f.coeffs.erase(v);
        }
        return f;
      }
      if (e.elt_op == EltOp::Mul) {
        const AffineForm* scalar = a->is_const() ? &*a : (b->is_const() ? &*b : nullptr);
        const AffineForm* other = a->is_const() ? &*b : &*a;
        if (!scalar) return std::nullopt;
        AffineForm f;
        f.constant = other->constant * scalar->constant;
        for (const auto& [v, c] : other->coeffs) {
          if (c * scalar->constant != 0) f.coeffs[v] = c * scalar->constant;
        }
        return f;
      }
      return std::nullopt;
    }
    default:
      return std::nullopt;
  }
}

std::int64_t eval_affine(const AffineForm& f, const std::map<AffineVar, std::int64_t>& binding) {
  std::int64_t v = f.constant;
  for (const auto& [var, c] : f.coeffs) v += c * binding.at(var);
  return v;
}

// ---------------------------------------------------------------------------
// validate_program
// ---------------------------------------------------------------------------

namespace {

class Validator {
 public:
  explicit Validator(const Program& p) : p_(p) {}

  Diagnostics run() {
    check_streams();
    check_tasks();
    check_buffers();
    return std::move(diags_);
  }

 private:
  const Program& p_;
  Diagnostics diags_;
  const TaskDef* task_ = nullptr;
  std::map<std::string, bool> ivs_;
  std::map<std::string, int> local_rank_;  // declared locals (rank unknown = -1)

  void error(const char* code, SourceSpan span, std::string msg) {
    diags_.push_back(Diagnostic::error(code, span, std::move(msg)));
  }

  void check_streams() {
    std::set<std::string> names;
    for (const auto& s : p_.streams) {
      if (!names.insert(s.name).second)
        error(code::Invalid, s.span, "duplicate stream name '" + s.name + "'");
      for (auto g : s.grid)
        if (g < 1) error(code::Invalid, s.span, "stream grid extents must be >= 1");
      for (auto d : s.type.elem.shape)
        if (d < 1) error(code::Invalid, s.span, "tensor dimensions must be >= 1");
      if (s.type.depth < 1) error(code::Invalid, s.span, "stream depth must be >= 1");
      if (s.type.pack < 1) {
        error(code::Invalid, s.span, "stream pack must be >= 1");
      } else if (s.type.elem.elem_count() % s.type.pack != 0) {
        error(code::Invalid, s.span,
              "pack factor " + std::to_string(s.type.pack) +
                  " does not divide the transfer element count " +
                  std::to_string(s.type.elem.elem_count()));
      }
    }
  }

  void check_tasks() {
    std::set<std::string> names;
    for (const auto& t : p_.tasks) {
      if (!names.insert(t.name).second)
        error(code::Invalid, t.span, "duplicate task name '" + t.name + "'");
      task_ = &t;
      for (auto m : t.mapping)
        if (m < 1) error(code::Invalid, t.span, "mapping extents must be >= 1");
      check_params(t);
      ivs_.clear();
      local_rank_.clear();
      for (const auto& s : t.body) check_stmt(*s);
    }
    task_ = nullptr;
  }

  void check_params(const TaskDef& t) {
    std::set<std::string> pnames;
    for (const auto& p : t.params) {
      if (!pnames.insert(p.name).second)
        error(code::Invalid, p.span, "duplicate parameter name '" + p.name + "'");
      for (auto d : p.type.shape)
        if (d < 1) error(code::Invalid, p.span, "tensor dimensions must be >= 1");
      if (p.layout.rank() != p.type.rank()) {
        error(code::LayoutMismatch, p.span,
              "layout '" + p.layout.str() + "' has " + std::to_string(p.layout.rank()) +
                  " axes but tensor rank is " + std::to_string(p.type.rank()));
        continue;
      }
      std::set<int> used_axes;
      for (int i = 0; i < p.layout.rank(); ++i) {
        const auto& a = p.layout.axes[static_cast<size_t>(i)];
        if (!a.is_sharded()) continue;
        if (a.device_axis < 0 || a.device_axis >= static_cast<int>(t.mapping.size())) {
          error(code::Invalid, p.span,
                "device axis S" + std::to_string(a.device_axis) +
                    " out of range for mapping of rank " + std::to_string(t.mapping.size()));
          continue;
        }
        if (!used_axes.insert(a.device_axis).second)
          error(code::AxisConflict, p.span,
                "device axis " + std::to_string(a.device_axis) +
                    " used by more than one dimension of '" + p.name + "'");
        std::int64_t extent = t.mapping[static_cast<size_t>(a.device_axis)];
        if (p.type.shape[static_cast<size_t>(i)] % extent != 0)
          error(code::Invalid, p.span,
                "dimension " + std::to_string(i) + " of '" + p.name + "' (" +
                    std::to_string(p.type.shape[static_cast<size_t>(i)]) +
                    ") is not divisible by mapping extent " + std::to_string(extent));
      }
    }
  }

  void check_stream_ref(const StreamRef& r) {
    const StreamDecl* s = p_.find_stream(r.name);
    if (!s) {
      error(code::Invalid, r.span, "unknown stream '" + r.name + "'");
      return;
    }
    if (r.indices.size() != s->grid.size()) {
      error(code::Invalid, r.span,
            "stream '" + r.name + "' expects " + std::to_string(s->grid.size()) +
                " indices, got " + std::to_string(r.indices.size()));
      return;
    }
    for (size_t i = 0; i < r.indices.size(); ++i) {
      auto f = extract_affine(*r.indices[i], ivs_);
      if (!f) {
        error(code::NonAffineIndex, r.indices[i]->span,
              "stream index must be affine in tid components and loop variables");
        continue;
      }
      if (f->is_const() && (f->constant < 0 || f->constant >= s->grid[i]))
        error(code::StreamIndexOob, r.indices[i]->span,
              "stream index " + std::to_string(f->constant) + " out of bounds for extent " +
                  std::to_string(s->grid[i]));
    }
  }

  void check_slice_ranges(const std::vector<SliceRange>& ranges) {
    for (const auto& r : ranges) {
      if (r.full) continue;
      for (const Expr* b : {r.lo.get(), r.hi.get()}) {
        if (!extract_affine(*b, ivs_))
          error(code::NonAffineIndex, b->span,
                "slice bounds must be affine in loop variables and tid components");
      }
    }
  }

  void check_expr(const Expr& e, bool allreduce_ok) {
    switch (e.kind) {
      case ExprKind::TidRef:
        if (task_ && (e.axis < 0 || e.axis >= static_cast<int>(task_->mapping.size())))
          error(code::Invalid, e.span,
                "tid axis " + std::to_string(e.axis) + " out of range for mapping of rank " +
                    std::to_string(task_->mapping.size()));
        return;
      case ExprKind::Get:
        check_stream_ref(*e.stream);
        return;
      case ExprKind::AllReduce:
        if (!allreduce_ok)
          error(code::Invalid, e.span,
                "allreduce may only appear as the full right-hand side of a top-level "
                "assignment");
        check_expr(*e.args[0], false);
        return;
      case ExprKind::Slice:
        check_slice_ranges(e.ranges);
        check_expr(*e.args[0], false);
        return;
      default:
        for (const auto& a : e.args) check_expr(*a, false);
        return;
    }
  }

  void check_stmt(const Stmt& s, bool top_level = true) {
    switch (s.kind) {
      case StmtKind::For: {
        if (s.bound < 0) error(code::Invalid, s.span, "loop bound must be non-negative");
        bool fresh = !ivs_.count(s.iv);
        ivs_[s.iv] = true;
        for (const auto& b : s.body) check_stmt(*b, false);
        if (fresh) ivs_.erase(s.iv);
        return;
      }
      case StmtKind::Assign: {
        if (s.lvalue->has_ranges) check_slice_ranges(s.lvalue->ranges);
        // The allreduce lowering splits the enclosing assignment between
        // leaf and combine nodes, so the target must be a parameter.
        bool allreduce_ok = top_level && !local_rank_.count(s.lvalue->name);
        check_expr(*s.value, allreduce_ok);
        return;
      }
      case StmtKind::Put:
        check_stream_ref(*s.stream);
        check_expr(*s.value, false);
        return;
      case StmtKind::LocalDecl:
        if (s.local_type) {
          for (auto d : s.local_type->shape)
            if (d < 1) error(code::Invalid, s.span, "tensor dimensions must be >= 1");
        }
        local_rank_[s.local_name] = s.local_type ? s.local_type->rank() : -1;
        if (s.value) check_expr(*s.value, false);
        return;
    }
  }

  void check_buffers() {
    // Buffers shared across tasks by parameter name must agree on type and
    // have a single writing task; the write->read dependency graph between
    // tasks must be acyclic (streams may form cycles, buffers may not).
    std::map<std::string, const Param*> first_seen;
    std::map<std::string, std::string> writer;  // buffer -> task
    for (const auto& t : p_.tasks) {
      std::set<std::string> written = written_params(t);
      for (const auto& p : t.params) {
        auto it = first_seen.find(p.name);
        if (it == first_seen.end()) {
          first_seen.emplace(p.name, &p);
        } else if (!(it->second->type == p.type)) {
          error(code::Invalid, p.span,
                "buffer '" + p.name + "' declared with conflicting types across tasks");
        }
        if (written.count(p.name)) {
          auto w = writer.find(p.name);
          if (w != writer.end() && w->second != t.name)
            error(code::Invalid, p.span,
                  "buffer '" + p.name + "' written by both '" + w->second + "' and '" +
                      t.name + "'");
          writer[p.name] = t.name;
        }
      }
    }
    // Cycle check over buffer dependencies.
    std::map<std::string, std::set<std::string>> succ;
    for (const auto& t : p_.tasks) {
      std::set<std::string> written = written_params(t);
      for (const auto& p : t.params) {
        if (written.count(p.name)) continue;
        auto w = writer.find(p.name);
        if (w != writer.end() && w->second != t.name) succ[w->second].insert(t.name);
      }
    }
    std::map<std::string, int> state;  // 0 unvisited, 1 in stack, 2 done
    bool cyclic = false;
    std::function<void(const std::string&)> dfs = [&](const std::string& n) {
      state[n] = 1;
      for (const auto& m : succ[n]) {
        if (state[m] == 1) cyclic = true;
        else if (state[m] == 0) dfs(m);
      }
      state[n] = 2;
    };
    for (const auto& t : p_.tasks)
      if (state[t.name] == 0) dfs(t.name);
    if (cyclic)
      error(code::Invalid, p_.tasks.empty() ? SourceSpan{} : p_.tasks.front().span,
            "cyclic buffer dependency between tasks (buffers need a static writer order)");
  }

  static std::set<std::string> written_params(const TaskDef& t) {
    std::set<std::string> written;
    std::set<std::string> locals;
    std::function<void(const Stmt&)> walk = [&](const Stmt& s) {
      if (s.kind == StmtKind::LocalDecl) locals.insert(s.local_name);
      if (s.kind == StmtKind::Assign && !locals.count(s.lvalue->name) &&
          t.find_param(s.lvalue->name))
        written.insert(s.lvalue->name);
      for (const auto& b : s.body) walk(*b);
    };
    for (const auto& s : t.body) walk(*s);
    return written;
  }
};

}  // namespace

Diagnostics validate_program(const Program& p) { return Validator(p).run(); }

}  // namespace datoc
