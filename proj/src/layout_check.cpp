#include <functional>
#include <sstream>

#include "datoc/affine.hpp"
#include "datoc/typecheck.hpp"

namespace datoc {

std::set<int> TypedValue::varying_axes() const {
  if (!distributed) return varying;
  std::set<int> v;
  for (const auto& a : layout.axes)
    if (a.is_sharded()) v.insert(a.device_axis);
  for (const auto& [op, axes] : effects.pending) {
    (void)op;
    v.insert(axes.begin(), axes.end());
  }
  return v;
}

std::string TypedValue::str() const {
  std::ostringstream os;
  if (scalar_const) return "const";
  if (distributed) {
    os << global.str() << " @ " << layout.str() << " ! " << effects.str();
  } else {
    os << "local " << tile.str();
    if (!effects.empty()) os << " ! " << effects.str();
  }
  return os.str();
}

JoinResult layout_join(const LayoutType& a, const LayoutType& b, SourceSpan span) {
  JoinResult r;
  if (a.rank() != b.rank()) {
    r.error = Diagnostic::error(code::LayoutMismatch, span, "layout rank mismatch in join");
    return r;
  }
  LayoutType out;
  for (int i = 0; i < a.rank(); ++i) {
    const auto& x = a.axes[static_cast<size_t>(i)];
    const auto& y = b.axes[static_cast<size_t>(i)];
    if (x.is_sharded() && y.is_sharded()) {
      if (x.device_axis != y.device_axis) {
        r.error = Diagnostic::error(
            code::AxisConflict, span,
            "cannot join S" + std::to_string(x.device_axis) + " with S" +
                std::to_string(y.device_axis) + " on axis " + std::to_string(i));
        return r;
      }
      out.axes.push_back(x);
    } else if (x.is_sharded()) {
      out.axes.push_back(x);
    } else if (y.is_sharded()) {
      out.axes.push_back(y);
    } else {
      out.axes.push_back(AxisLayout::replicated());
    }
  }
  r.layout = std::move(out);
  return r;
}

namespace {

class TaskChecker {
 public:
  TaskChecker(const Program& p, const TaskDef& t, const KernelRegistry* registry,
              LayoutReport* report, bool record)
      : p_(p), t_(t), registry_(registry), report_(report), record_(record) {}

  Diagnostics run() {
    for (const auto& prm : t_.params) {
      TypedValue v;
      v.distributed = true;
      v.global = prm.type;
      v.layout = prm.layout;
      v.tile = TensorType{prm.type.elem, tile_shape(prm.type, prm.layout, t_.mapping)};
      env_[prm.name] = std::move(v);
    }
    // Iterate to a fixpoint so that locals reassigned in loops stabilize,
    // then run a final recording pass.
    for (int round = 0; round < 8; ++round) {
      auto before = snapshot();
      diags_.clear();
      for (const auto& s : t_.body) check_stmt(*s, true);
      if (snapshot() == before) break;
    }
    diags_.clear();
    for (const auto& s : t_.body) check_stmt(*s, true);
    if (record_ && report_) {
      for (const auto& [name, v] : env_) {
        if (t_.find_param(name)) continue;
        report_->synthesized[t_.name][name] = v.str();
      }
    }
    return std::move(diags_);
  }

 private:
  const Program& p_;
  const TaskDef& t_;
  const KernelRegistry* registry_;
  LayoutReport* report_;
  bool record_;
  Diagnostics diags_;
  std::map<std::string, TypedValue> env_;
  std::map<std::string, std::int64_t> iv_bounds_;

  std::string snapshot() const {
    std::ostringstream os;
    for (const auto& [k, v] : env_) os << k << "=" << v.str() << ";";
    return os.str();
  }

  void error(const char* code, SourceSpan span, std::string msg) {
    diags_.push_back(Diagnostic::error(code, span, std::move(msg)));
  }

  std::set<int> nontrivial_axes() const {
    std::set<int> v;
    for (size_t i = 0; i < t_.mapping.size(); ++i)
      if (t_.mapping[i] > 1) v.insert(static_cast<int>(i));
    return v;
  }

  static TypedValue make_local(TensorType tile, std::set<int> varying = {}) {
    TypedValue v;
    v.distributed = false;
    v.tile = std::move(tile);
    v.varying = std::move(varying);
    return v;
  }

  std::optional<TypedValue> check_expr(const Expr& e) {
    switch (e.kind) {
      case ExprKind::Const: {
        TypedValue v;
        v.scalar_const = true;
        v.tile = TensorType{ElemType{e.is_float_const ? ElemKind::F32 : ElemKind::I32}, {}};
        return v;
      }
      case ExprKind::ParamRef:
      case ExprKind::LocalRef: {
        auto it = env_.find(e.name);
        if (it == env_.end()) {
          error(code::Invalid, e.span, "use of undeclared name '" + e.name + "'");
          return std::nullopt;
        }
        return it->second;
      }
      case ExprKind::TidRef: {
        TypedValue v = make_local(TensorType{ElemType{ElemKind::I32}, {}});
        if (e.axis >= 0 && e.axis < static_cast<int>(t_.mapping.size()) &&
            t_.mapping[static_cast<size_t>(e.axis)] > 1)
          v.varying.insert(e.axis);
        return v;
      }
      case ExprKind::Get: {
        const StreamDecl* s = p_.find_stream(e.stream->name);
        if (!s) {
          error(code::Invalid, e.span, "unknown stream '" + e.stream->name + "'");
          return std::nullopt;
        }
        // Payload contents may depend on any instance's data.
        return make_local(s->type.elem, nontrivial_axes());
      }
      case ExprKind::Await:
        return check_expr(*e.args[0]);
      case ExprKind::Eltwise:
        return check_eltwise(e);
      case ExprKind::Matmul:
        return check_matmul(e);
      case ExprKind::Reduce:
        return check_reduce(e);
      case ExprKind::AllReduce:
        return check_allreduce(e);
      case ExprKind::KernelCall:
        return check_kernel_call(e);
      case ExprKind::Slice:
        return check_slice(e);
    }
    return std::nullopt;
  }

  std::optional<TypedValue> check_eltwise(const Expr& e) {
    auto a = check_expr(*e.args[0]);
    auto b = check_expr(*e.args[1]);
    if (!a || !b) return std::nullopt;

    // Scalar constants adapt to the other operand.
    if (a->scalar_const && b->scalar_const) return a;
    if (a->scalar_const || b->scalar_const) {
      TypedValue out = a->scalar_const ? *b : *a;
      return out;
    }
    // Rank-0 values broadcast. A per-instance-varying scalar mixed into a
    // distributed value demotes the result to a local tile.
    auto broadcast = [&](const TypedValue& scalar,
                         const TypedValue& full) -> std::optional<TypedValue> {
      auto sv = scalar.varying_axes();
      if (full.distributed && !sv.empty()) {
        if (!full.effects.empty() || !scalar.effects.empty()) {
          error(code::PendingEffect, e.span,
                "value with pending collective effects flows into local computation");
          return std::nullopt;
        }
        TypedValue out = make_local(full.tile, full.varying_axes());
        out.varying.insert(sv.begin(), sv.end());
        return out;
      }
      TypedValue out = full;
      out.effects = effect_union(scalar.effects, full.effects);
      if (!out.distributed) out.varying.insert(sv.begin(), sv.end());
      return out;
    };
    if (a->tile.rank() == 0 && b->tile.rank() != 0) return broadcast(*a, *b);
    if (b->tile.rank() == 0 && a->tile.rank() != 0) return broadcast(*b, *a);

    if (a->distributed && b->distributed) {
      if (!(a->global.shape == b->global.shape)) {
        error(code::Invalid, e.span,
              "eltwise operands have different shapes: " + a->global.str() + " vs " +
                  b->global.str());
        return std::nullopt;
      }
      auto j = layout_join(a->layout, b->layout, e.span);
      if (!j.layout) {
        if (j.error) diags_.push_back(*j.error);
        return std::nullopt;
      }
      TypedValue out;
      out.distributed = true;
      out.global = TensorType{result_elem(*a, *b), a->global.shape};
      out.layout = *j.layout;
      out.tile = TensorType{out.global.elem, tile_shape(out.global, out.layout, t_.mapping)};
      out.effects = effect_union(a->effects, b->effects);
      return out;
    }
    // At least one local operand: tile-space elementwise.
    if (!(a->tile.shape == b->tile.shape)) {
      error(code::Invalid, e.span,
            "eltwise tile shapes differ: " + a->tile.str() + " vs " + b->tile.str());
      return std::nullopt;
    }
    if (!a->effects.empty() || !b->effects.empty()) {
      error(code::PendingEffect, e.span,
            "value with pending collective effects flows into local computation");
      return std::nullopt;
    }
    TypedValue out = make_local(TensorType{result_elem(*a, *b), a->tile.shape});
    auto va = a->varying_axes(), vb = b->varying_axes();
    out.varying.insert(va.begin(), va.end());
    out.varying.insert(vb.begin(), vb.end());
    return out;
  }

  static ElemType result_elem(const TypedValue& a, const TypedValue& b) {
    if (a.scalar_const) return b.tile.elem;
    if (b.scalar_const) return a.tile.elem;
    return a.tile.elem;
  }

  std::optional<TypedValue> check_matmul(const Expr& e) {
    auto a = check_expr(*e.args[0]);
    auto b = check_expr(*e.args[1]);
    if (!a || !b) return std::nullopt;
    if (a->tile.rank() != 2 || b->tile.rank() != 2) {
      error(code::Invalid, e.span, "matmul operands must have rank 2");
      return std::nullopt;
    }
    if (!(a->tile.elem == b->tile.elem)) {
      error(code::Invalid, e.span, "matmul operands must share an element type");
      return std::nullopt;
    }

    if (a->distributed && b->distributed) {
      if (a->global.shape[1] != b->global.shape[0]) {
        error(code::ContractionMismatch, e.span,
              "contraction dimensions differ: " + std::to_string(a->global.shape[1]) +
                  " vs " + std::to_string(b->global.shape[0]));
        return std::nullopt;
      }
      const AxisLayout& ka = a->layout.axes[1];
      const AxisLayout& kb = b->layout.axes[0];
      if (!(ka == kb)) {
        error(code::ContractionMismatch, e.span,
              "contraction axis layouts differ: " +
                  std::string(ka.is_sharded() ? "S" + std::to_string(ka.device_axis) : "R") +
                  " vs " +
                  std::string(kb.is_sharded() ? "S" + std::to_string(kb.device_axis) : "R"));
        return std::nullopt;
      }
      LayoutType out_layout{{a->layout.axes[0], b->layout.axes[1]}};
      if (out_layout.axes[0].is_sharded() && out_layout.axes[1].is_sharded() &&
          out_layout.axes[0].device_axis == out_layout.axes[1].device_axis) {
        error(code::AxisConflict, e.span,
              "matmul result would shard both dimensions on device axis " +
                  std::to_string(out_layout.axes[0].device_axis));
        return std::nullopt;
      }
      TypedValue out;
      out.distributed = true;
      out.global = TensorType{a->global.elem, {a->global.shape[0], b->global.shape[1]}};
      out.layout = out_layout;
      out.tile = TensorType{out.global.elem, tile_shape(out.global, out.layout, t_.mapping)};
      out.effects = effect_union(a->effects, b->effects);
      if (ka.is_sharded()) out.effects.add(ReduceOp::Add, ka.device_axis);
      return out;
    }

    // Local contraction: complete on this instance, no pending effect.
    if (a->tile.shape[1] != b->tile.shape[0]) {
      error(code::ContractionMismatch, e.span,
            "tile contraction dimensions differ: " + std::to_string(a->tile.shape[1]) +
                " vs " + std::to_string(b->tile.shape[0]));
      return std::nullopt;
    }
    if (!a->effects.empty() || !b->effects.empty()) {
      error(code::PendingEffect, e.span,
            "value with pending collective effects flows into local computation");
      return std::nullopt;
    }
    TypedValue out =
        make_local(TensorType{a->tile.elem, {a->tile.shape[0], b->tile.shape[1]}});
    auto va = a->varying_axes(), vb = b->varying_axes();
    out.varying.insert(va.begin(), va.end());
    out.varying.insert(vb.begin(), vb.end());
    return out;
  }

  std::optional<TypedValue> check_reduce(const Expr& e) {
    auto a = check_expr(*e.args[0]);
    if (!a) return std::nullopt;
    int rank = a->tile.rank();
    if (e.axis < 0 || e.axis >= rank) {
      error(code::Invalid, e.span, "reduce axis out of range");
      return std::nullopt;
    }
    size_t ax = static_cast<size_t>(e.axis);
    if (a->distributed) {
      TypedValue out;
      out.distributed = true;
      out.global = a->global;
      out.global.shape.erase(out.global.shape.begin() + static_cast<long>(ax));
      out.layout = a->layout;
      AxisLayout removed = out.layout.axes[ax];
      out.layout.axes.erase(out.layout.axes.begin() + static_cast<long>(ax));
      out.tile = TensorType{out.global.elem, tile_shape(out.global, out.layout, t_.mapping)};
      out.effects = a->effects;
      if (removed.is_sharded()) out.effects.add(e.reduce_op, removed.device_axis);
      return out;
    }
    if (!a->effects.empty()) {
      error(code::PendingEffect, e.span,
            "value with pending collective effects flows into local computation");
      return std::nullopt;
    }
    TypedValue out = *a;
    out.tile.shape.erase(out.tile.shape.begin() + static_cast<long>(ax));
    return out;
  }

  std::optional<TypedValue> check_allreduce(const Expr& e) {
    auto a = check_expr(*e.args[0]);
    if (!a) return std::nullopt;
    if (!a->distributed) {
      error(code::Invalid, e.span,
            "allreduce needs a layout-refined operand (local values have no shards)");
      return std::nullopt;
    }
    TypedValue out = *a;
    std::set<int> axes = out.effects.discharge(e.reduce_op);
    if (record_ && report_) {
      AllReduceSite site;
      site.site_id = e.site_id;
      site.op = e.reduce_op;
      site.axes = axes;
      site.tile = a->tile;
      site.task = t_.name;
      report_->sites[e.site_id] = std::move(site);
    }
    return out;
  }

  std::optional<TypedValue> check_kernel_call(const Expr& e) {
    if (!registry_) {
      error(code::Invalid, e.span,
            "kernel call '" + e.name + "' but no kernel registry is configured");
      return std::nullopt;
    }
    std::vector<TensorType> arg_types;
    std::vector<std::set<int>> arg_varying;
    EffectSet fx;
    for (const auto& arg : e.args) {
      auto v = check_expr(*arg);
      if (!v) return std::nullopt;
      if (!v->effects.empty()) {
        error(code::PendingEffect, arg->span,
              "value with pending collective effects passed to kernel call");
        return std::nullopt;
      }
      arg_types.push_back(v->tile);
      arg_varying.push_back(v->varying_axes());
    }
    auto m = match_kernel(e, arg_types, *registry_);
    if (!m) {
      error(code::Invalid, e.span, "no kernel contract matches call '" + e.name + "'");
      return std::nullopt;
    }
    TensorType result_tile;
    if (m->contract->result) {
      result_tile.elem = m->contract->result->elem;
      for (const auto& d : m->contract->result->shape)
        result_tile.shape.push_back(d.wildcard ? m->binding.at(d.name) : d.size);
    } else {
      result_tile = arg_types.empty() ? TensorType{} : arg_types[0];
    }
    TypedValue out = make_local(result_tile);
    for (const auto& v : arg_varying) out.varying.insert(v.begin(), v.end());
    (void)fx;
    return out;
  }

  // Evaluates slice bounds to a (lo, size) pair; checks in-bounds for all
  // reachable iv values.
  std::optional<std::vector<std::pair<std::int64_t, std::int64_t>>> resolve_ranges(
      const std::vector<SliceRange>& ranges, const std::vector<std::int64_t>& dims,
      SourceSpan span) {
    if (ranges.size() != dims.size()) {
      error(code::Invalid, span,
            "slice has " + std::to_string(ranges.size()) + " ranges but value has rank " +
                std::to_string(dims.size()));
      return std::nullopt;
    }
    std::map<std::string, bool> ivs;
    for (const auto& [iv, _] : iv_bounds_) ivs[iv] = true;
    std::vector<std::pair<std::int64_t, std::int64_t>> out;
    for (size_t d = 0; d < ranges.size(); ++d) {
      const auto& r = ranges[d];
      if (r.full) {
        out.emplace_back(0, dims[d]);
        continue;
      }
      auto lo = extract_affine(*r.lo, ivs);
      auto hi = extract_affine(*r.hi, ivs);
      if (!lo || !hi) {
        error(code::NonAffineIndex, r.lo ? r.lo->span : span,
              "slice bounds must be affine in loop variables");
        return std::nullopt;
      }
      // Size must be iv-independent.
      AffineForm size = *hi;
      size.constant -= lo->constant;
      for (const auto& [v, c] : lo->coeffs) {
        size.coeffs[v] -= c;
        if (size.coeffs[v] == 0) size.coeffs.erase(v);
      }
      if (!size.is_const()) {
        error(code::Invalid, span, "slice size must not depend on loop variables");
        return std::nullopt;
      }
      if (size.constant < 1) {
        error(code::Invalid, span, "slice size must be >= 1");
        return std::nullopt;
      }
      // Bounds check at iv extremes (affine, hence monotone per iv).
      auto extreme = [&](const AffineForm& f, bool maximize) {
        std::int64_t v = f.constant;
        for (const auto& [var, c] : f.coeffs) {
          std::int64_t b = iv_bounds_.count(var.iv) ? iv_bounds_.at(var.iv) - 1 : 0;
          if (b < 0) b = 0;
          if ((c > 0) == maximize) v += c * b;
        }
        return v;
      };
      std::int64_t lo_min = extreme(*lo, false);
      std::int64_t lo_max = extreme(*lo, true);
      if (lo_min < 0 || lo_max + size.constant > dims[d]) {
        error(code::Invalid, span,
              "slice range exceeds dimension " + std::to_string(d) + " (size " +
                  std::to_string(dims[d]) + ")");
        return std::nullopt;
      }
      out.emplace_back(lo_min, size.constant);
    }
    return out;
  }

  std::optional<TypedValue> check_slice(const Expr& e) {
    auto a = check_expr(*e.args[0]);
    if (!a) return std::nullopt;
    bool all_full = true;
    for (const auto& r : e.ranges) all_full = all_full && r.full;
    auto rs = resolve_ranges(e.ranges, a->tile.shape, e.span);
    if (!rs) return std::nullopt;
    if (all_full) return a;  // identity view
    if (!a->effects.empty()) {
      error(code::PendingEffect, e.span,
            "value with pending collective effects cannot be sliced");
      return std::nullopt;
    }
    std::vector<std::int64_t> shape;
    for (const auto& [off, size] : *rs) {
      (void)off;
      shape.push_back(size);
    }
    TypedValue out = make_local(TensorType{a->tile.elem, shape}, a->varying_axes());
    return out;
  }

  void check_put(const Stmt& s) {
    auto v = check_expr(*s.value);
    const StreamDecl* decl = p_.find_stream(s.stream->name);
    if (!v || !decl) return;
    if (!v->effects.empty()) {
      error(code::PendingEffect, s.span,
            "put payload has pending collective effects " + v->effects.str());
      return;
    }
    if (v->scalar_const) {
      if (decl->type.elem.rank() != 0)
        error(code::Invalid, s.span, "constant payload needs a rank-0 stream element type");
      return;
    }
    if (!(v->tile.shape == decl->type.elem.shape) || !(v->tile.elem == decl->type.elem.elem)) {
      error(code::Invalid, s.span,
            "put payload tile " + v->tile.str() + " does not match stream element " +
                decl->type.elem.str());
    }
  }

  void check_assign(const Stmt& s) {
    auto v = check_expr(*s.value);
    if (!v) return;
    const std::string& name = s.lvalue->name;
    const Param* prm = t_.find_param(name);
    auto local_it = env_.find(name);
    bool is_local = !prm && local_it != env_.end();

    if (!prm && !is_local) {
      error(code::Invalid, s.span, "assignment to undeclared name '" + name + "'");
      return;
    }

    if (is_local) {
      TypedValue& slot = local_it->second;
      if (s.lvalue->has_ranges) {
        auto rs = resolve_ranges(s.lvalue->ranges, slot.tile.shape, s.span);
        if (!rs) return;
        std::vector<std::int64_t> region_shape;
        for (const auto& [o, sz] : *rs) {
          (void)o;
          region_shape.push_back(sz);
        }
        if (!v->scalar_const && !(v->tile.shape == region_shape)) {
          error(code::Invalid, s.span, "assigned value does not match sliced local region");
          return;
        }
        if (!v->effects.empty()) {
          error(code::PendingEffect, s.span, "partial write of value with pending effects");
          return;
        }
        auto va = v->varying_axes();
        slot.varying.insert(va.begin(), va.end());
        slot.distributed = false;
        return;
      }
      if (v->scalar_const) return;  // broadcast fill keeps declared type
      slot = *v;
      return;
    }

    // Parameter write.
    const TypedValue& declared = env_.at(name);
    std::vector<std::int64_t> region_shape = declared.tile.shape;
    if (s.lvalue->has_ranges) {
      auto rs = resolve_ranges(s.lvalue->ranges, declared.tile.shape, s.span);
      if (!rs) return;
      region_shape.clear();
      for (const auto& [o, sz] : *rs) {
        (void)o;
        region_shape.push_back(sz);
      }
    }
    bool full_region = region_shape == declared.tile.shape;

    if (!v->effects.empty()) {
      error(code::PendingEffect, s.span,
            "value with pending collective effects " + v->effects.str() +
                " assigned to output parameter '" + name + "'");
      return;
    }
    if (v->scalar_const) {
      if (record_ && report_) report_->synthesized[t_.name]["param:" + name] = "const-fill";
      return;
    }
    if (v->distributed) {
      if (!full_region) {
        error(code::LayoutMismatch, s.span,
              "layout-refined value must be written to the full parameter region");
        return;
      }
      if (!(v->global.shape == declared.global.shape)) {
        error(code::Invalid, s.span,
              "assigned shape " + v->global.str() + " does not match parameter " +
                  declared.global.str());
        return;
      }
      if (!(v->layout == declared.layout)) {
        error(code::LayoutMismatch, s.span,
              "synthesized layout " + v->layout.str() + " does not match declared layout " +
                  declared.layout.str() + " of '" + name + "' (no implicit re-sharding)");
        return;
      }
      if (record_ && report_)
        report_->synthesized[t_.name]["param:" + name] = v->str();
      return;
    }
    // Local value written to the parameter's per-instance region: contents
    // may vary only along device axes that select distinct regions.
    if (!(v->tile.shape == region_shape)) {
      error(code::Invalid, s.span,
            "assigned tile " + v->tile.str() + " does not match parameter region of '" +
                name + "'");
      return;
    }
    std::set<int> allowed;
    for (const auto& a : declared.layout.axes)
      if (a.is_sharded()) allowed.insert(a.device_axis);
    for (int ax : v->varying_axes()) {
      if (t_.mapping[static_cast<size_t>(ax)] <= 1) continue;
      if (!allowed.count(ax)) {
        error(code::LayoutMismatch, s.span,
              "value varies along device axis " + std::to_string(ax) +
                  " but parameter '" + name +
                  "' is replicated there; the write would be nondeterministic");
        return;
      }
    }
    if (record_ && report_) report_->synthesized[t_.name]["param:" + name] = v->str();
  }

  void check_stmt(const Stmt& s, bool /*top*/) {
    switch (s.kind) {
      case StmtKind::For: {
        bool fresh = !iv_bounds_.count(s.iv);
        iv_bounds_[s.iv] = s.bound;
        env_[s.iv] = [] {
          TypedValue v;
          v.distributed = false;
          v.tile = TensorType{ElemType{ElemKind::I32}, {}};
          return v;
        }();
        for (const auto& b : s.body) check_stmt(*b, false);
        if (fresh) iv_bounds_.erase(s.iv);
        return;
      }
      case StmtKind::Assign:
        check_assign(s);
        return;
      case StmtKind::Put:
        check_put(s);
        return;
      case StmtKind::LocalDecl: {
        if (s.value) {
          auto v = check_expr(*s.value);
          if (!v) return;
          if (v->scalar_const) {
            if (!s.local_type) {
              error(code::Invalid, s.span,
                    "constant initializer needs an explicit local type");
              return;
            }
            env_[s.local_name] = make_local(*s.local_type);
            return;
          }
          if (s.local_type && !(s.local_type->shape == v->tile.shape &&
                                s.local_type->elem == v->tile.elem)) {
            error(code::Invalid, s.span,
                  "declared local type " + s.local_type->str() +
                      " does not match initializer " + v->tile.str());
            return;
          }
          env_[s.local_name] = *v;
          return;
        }
        env_[s.local_name] = make_local(*s.local_type);  // zero-initialized
        return;
      }
    }
  }
};

}  // namespace

LayoutCheckResult check_layouts(const Program& p, const KernelRegistry* registry) {
  LayoutCheckResult result;
  LayoutReport report;
  for (const auto& t : p.tasks) {
    TaskChecker tc(p, t, registry, &report, /*record=*/true);
    Diagnostics ds = tc.run();
    for (auto& d : ds) result.diags.push_back(std::move(d));
  }
  if (!has_error(result.diags)) result.report = std::move(report);
  return result;
}

}  // namespace datoc
