#include "datoc/ast.hpp"

#include <map>
#include <sstream>

namespace datoc {

const char* elt_op_name(EltOp op) {
  switch (op) {
    case EltOp::Add: return "+";
    case EltOp::Sub: return "-";
    case EltOp::Mul: return "*";
    case EltOp::Max: return "max";
    case EltOp::Min: return "min";
  }
  return "+";
}

static SliceRange clone_range(const SliceRange& r) {
  SliceRange out;
  out.full = r.full;
  if (r.lo) out.lo = r.lo->clone();
  if (r.hi) out.hi = r.hi->clone();
  return out;
}

static StreamRef clone_ref(const StreamRef& r) {
  StreamRef out;
  out.name = r.name;
  out.span = r.span;
  for (const auto& e : r.indices) out.indices.push_back(e->clone());
  return out;
}

ExprPtr Expr::clone() const {
  auto e = std::make_unique<Expr>();
  e->kind = kind;
  e->span = span;
  e->is_float_const = is_float_const;
  e->ival = ival;
  e->fval = fval;
  e->name = name;
  e->axis = axis;
  e->elt_op = elt_op;
  e->reduce_op = reduce_op;
  e->site_id = site_id;
  if (stream) e->stream = clone_ref(*stream);
  for (const auto& a : args) e->args.push_back(a->clone());
  for (const auto& r : ranges) e->ranges.push_back(clone_range(r));
  return e;
}

ExprPtr Expr::make_int(std::int64_t v, SourceSpan sp) {
  auto e = std::make_unique<Expr>();
  e->kind = ExprKind::Const;
  e->ival = v;
  e->span = sp;
  return e;
}

ExprPtr Expr::make_float(double v, SourceSpan sp) {
  auto e = std::make_unique<Expr>();
  e->kind = ExprKind::Const;
  e->is_float_const = true;
  e->fval = v;
  e->span = sp;
  return e;
}

ExprPtr Expr::make_param(std::string name, SourceSpan sp) {
  auto e = std::make_unique<Expr>();
  e->kind = ExprKind::ParamRef;
  e->name = std::move(name);
  e->span = sp;
  return e;
}

ExprPtr Expr::make_local(std::string name, SourceSpan sp) {
  auto e = std::make_unique<Expr>();
  e->kind = ExprKind::LocalRef;
  e->name = std::move(name);
  e->span = sp;
  return e;
}

ExprPtr Expr::make_tid(int axis, SourceSpan sp) {
  auto e = std::make_unique<Expr>();
  e->kind = ExprKind::TidRef;
  e->axis = axis;
  e->span = sp;
  return e;
}

ExprPtr Expr::make_get(StreamRef ref, SourceSpan sp) {
  auto e = std::make_unique<Expr>();
  e->kind = ExprKind::Get;
  e->stream = std::move(ref);
  e->span = sp;
  return e;
}

ExprPtr Expr::make_await(ExprPtr inner, SourceSpan sp) {
  auto e = std::make_unique<Expr>();
  e->kind = ExprKind::Await;
  e->args.push_back(std::move(inner));
  e->span = sp;
  return e;
}

ExprPtr Expr::make_eltwise(EltOp op, ExprPtr a, ExprPtr b, SourceSpan sp) {
  auto e = std::make_unique<Expr>();
  e->kind = ExprKind::Eltwise;
  e->elt_op = op;
  e->args.push_back(std::move(a));
  e->args.push_back(std::move(b));
  e->span = sp;
  return e;
}

ExprPtr Expr::make_matmul(ExprPtr a, ExprPtr b, SourceSpan sp) {
  auto e = std::make_unique<Expr>();
  e->kind = ExprKind::Matmul;
  e->args.push_back(std::move(a));
  e->args.push_back(std::move(b));
  e->span = sp;
  return e;
}

ExprPtr Expr::make_reduce(ReduceOp op, int axis, ExprPtr a, SourceSpan sp) {
  auto e = std::make_unique<Expr>();
  e->kind = ExprKind::Reduce;
  e->reduce_op = op;
  e->axis = axis;
  e->args.push_back(std::move(a));
  e->span = sp;
  return e;
}

ExprPtr Expr::make_allreduce(ReduceOp op, ExprPtr a, int site_id, SourceSpan sp) {
  auto e = std::make_unique<Expr>();
  e->kind = ExprKind::AllReduce;
  e->reduce_op = op;
  e->site_id = site_id;
  e->args.push_back(std::move(a));
  e->span = sp;
  return e;
}

ExprPtr Expr::make_kernel_call(std::string name, std::vector<ExprPtr> args, SourceSpan sp) {
  auto e = std::make_unique<Expr>();
  e->kind = ExprKind::KernelCall;
  e->name = std::move(name);
  e->args = std::move(args);
  e->span = sp;
  return e;
}

ExprPtr Expr::make_slice(ExprPtr base, std::vector<SliceRange> ranges, SourceSpan sp) {
  auto e = std::make_unique<Expr>();
  e->kind = ExprKind::Slice;
  e->args.push_back(std::move(base));
  e->ranges = std::move(ranges);
  e->span = sp;
  return e;
}

StmtPtr Stmt::clone() const {
  auto s = std::make_unique<Stmt>();
  s->kind = kind;
  s->span = span;
  s->iv = iv;
  s->bound = bound;
  for (const auto& b : body) s->body.push_back(b->clone());
  if (lvalue) {
    LValue lv;
    lv.name = lvalue->name;
    lv.has_ranges = lvalue->has_ranges;
    lv.span = lvalue->span;
    for (const auto& r : lvalue->ranges) lv.ranges.push_back(clone_range(r));
    s->lvalue = std::move(lv);
  }
  if (value) s->value = value->clone();
  if (stream) s->stream = clone_ref(*stream);
  s->local_name = local_name;
  s->local_type = local_type;
  return s;
}

StmtPtr Stmt::make_for(std::string iv, std::int64_t bound, std::vector<StmtPtr> body,
                       SourceSpan sp) {
  auto s = std::make_unique<Stmt>();
  s->kind = StmtKind::For;
  s->iv = std::move(iv);
  s->bound = bound;
  s->body = std::move(body);
  s->span = sp;
  return s;
}

StmtPtr Stmt::make_assign(LValue lv, ExprPtr rhs, SourceSpan sp) {
  auto s = std::make_unique<Stmt>();
  s->kind = StmtKind::Assign;
  s->lvalue = std::move(lv);
  s->value = std::move(rhs);
  s->span = sp;
  return s;
}

StmtPtr Stmt::make_put(StreamRef ref, ExprPtr payload, SourceSpan sp) {
  auto s = std::make_unique<Stmt>();
  s->kind = StmtKind::Put;
  s->stream = std::move(ref);
  s->value = std::move(payload);
  s->span = sp;
  return s;
}

StmtPtr Stmt::make_local(std::string name, std::optional<TensorType> type, ExprPtr init,
                         SourceSpan sp) {
  auto s = std::make_unique<Stmt>();
  s->kind = StmtKind::LocalDecl;
  s->local_name = std::move(name);
  s->local_type = std::move(type);
  s->value = std::move(init);
  s->span = sp;
  return s;
}

std::int64_t StreamDecl::instance_count() const {
  std::int64_t n = 1;
  for (auto g : grid) n *= g;
  return n;
}

std::int64_t TaskDef::instance_count() const {
  std::int64_t n = 1;
  for (auto m : mapping) n *= m;
  return n;
}

const Param* TaskDef::find_param(const std::string& n) const {
  for (const auto& p : params)
    if (p.name == n) return &p;
  return nullptr;
}

const StreamDecl* Program::find_stream(const std::string& name) const {
  for (const auto& s : streams)
    if (s.name == name) return &s;
  return nullptr;
}

int Program::stream_index(const std::string& name) const {
  for (size_t i = 0; i < streams.size(); ++i)
    if (streams[i].name == name) return static_cast<int>(i);
  return -1;
}

const TaskDef* Program::find_task(const std::string& name) const {
  for (const auto& t : tasks)
    if (t.name == name) return &t;
  return nullptr;
}

Program Program::clone() const {
  Program p;
  p.source_file = source_file;
  p.streams = streams;
  for (const auto& t : tasks) {
    TaskDef nt;
    nt.name = t.name;
    nt.mapping = t.mapping;
    nt.params = t.params;
    nt.span = t.span;
    for (const auto& s : t.body) nt.body.push_back(s->clone());
    p.tasks.push_back(std::move(nt));
  }
  return p;
}

// ---------------------------------------------------------------------------
// Structural equality (spans ignored)
// ---------------------------------------------------------------------------

static bool equal_range(const SliceRange& a, const SliceRange& b) {
  if (a.full != b.full) return false;
  if (a.full) return true;
  return equal(*a.lo, *b.lo) && equal(*a.hi, *b.hi);
}

static bool equal_ref(const StreamRef& a, const StreamRef& b) {
  if (a.name != b.name || a.indices.size() != b.indices.size()) return false;
  for (size_t i = 0; i < a.indices.size(); ++i)
    if (!equal(*a.indices[i], *b.indices[i])) return false;
  return true;
}

bool equal(const Expr& a, const Expr& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case ExprKind::Const:
      if (a.is_float_const != b.is_float_const) return false;
      return a.is_float_const ? a.fval == b.fval : a.ival == b.ival;
    case ExprKind::ParamRef:
    case ExprKind::LocalRef:
      if (a.name != b.name) return false;
      break;
    case ExprKind::TidRef:
      if (a.axis != b.axis) return false;
      break;
    case ExprKind::Get:
      return equal_ref(*a.stream, *b.stream);
    case ExprKind::Eltwise:
      if (a.elt_op != b.elt_op) return false;
      break;
    case ExprKind::Reduce:
      if (a.reduce_op != b.reduce_op || a.axis != b.axis) return false;
      break;
    case ExprKind::AllReduce:
      if (a.reduce_op != b.reduce_op) return false;
      break;
    case ExprKind::KernelCall:
      if (a.name != b.name) return false;
      break;
    default:
      break;
  }
  if (a.args.size() != b.args.size() || a.ranges.size() != b.ranges.size()) return false;
  for (size_t i = 0; i < a.args.size(); ++i)
    if (!equal(*a.args[i], *b.args[i])) return false;
  for (size_t i = 0; i < a.ranges.size(); ++i)
    if (!equal_range(a.ranges[i], b.ranges[i])) return false;
  return true;
}

bool equal(const Stmt& a, const Stmt& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case StmtKind::For: {
      if (a.iv != b.iv || a.bound != b.bound || a.body.size() != b.body.size()) return false;
      for (size_t i = 0; i < a.body.size(); ++i)
        if (!equal(*a.body[i], *b.body[i])) return false;
      return true;
    }
    case StmtKind::Assign: {
      if (a.lvalue->name != b.lvalue->name || a.lvalue->has_ranges != b.lvalue->has_ranges)
        return false;
      if (a.lvalue->ranges.size() != b.lvalue->ranges.size()) return false;
      for (size_t i = 0; i < a.lvalue->ranges.size(); ++i)
        if (!equal_range(a.lvalue->ranges[i], b.lvalue->ranges[i])) return false;
      return equal(*a.value, *b.value);
    }
    case StmtKind::Put:
      return equal_ref(*a.stream, *b.stream) && equal(*a.value, *b.value);
    case StmtKind::LocalDecl: {
      if (a.local_name != b.local_name || a.local_type != b.local_type) return false;
      if ((a.value == nullptr) != (b.value == nullptr)) return false;
      return a.value == nullptr || equal(*a.value, *b.value);
    }
  }
  return false;
}

bool equal(const Program& a, const Program& b) {
  if (a.streams.size() != b.streams.size() || a.tasks.size() != b.tasks.size()) return false;
  for (size_t i = 0; i < a.streams.size(); ++i) {
    const auto& x = a.streams[i];
    const auto& y = b.streams[i];
    if (x.name != y.name || !(x.type == y.type) || x.grid != y.grid) return false;
  }
  for (size_t i = 0; i < a.tasks.size(); ++i) {
    const auto& x = a.tasks[i];
    const auto& y = b.tasks[i];
    if (x.name != y.name || x.mapping != y.mapping) return false;
    if (x.params.size() != y.params.size()) return false;
    for (size_t j = 0; j < x.params.size(); ++j) {
      const auto& p = x.params[j];
      const auto& q = y.params[j];
      if (p.name != q.name || !(p.type == q.type) || !(p.layout == q.layout)) return false;
    }
    if (x.body.size() != y.body.size()) return false;
    for (size_t j = 0; j < x.body.size(); ++j)
      if (!equal(*x.body[j], *y.body[j])) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Canonical body key for isomorphism checks
// ---------------------------------------------------------------------------

namespace {

struct Canonicalizer {
  std::map<std::string, int> io_roles;     // serialized stream ref -> role
  std::map<std::string, int> param_roles;  // param name -> role
  std::map<std::string, int> local_roles;  // local/iv name -> role

  int role_of(std::map<std::string, int>& m, const std::string& key) {
    auto it = m.find(key);
    if (it != m.end()) return it->second;
    int id = static_cast<int>(m.size());
    m.emplace(key, id);
    return id;
  }

  // Serializes a stream ref concretely (used as the role key so that the
  // same instance reference maps to the same role within one body).
  std::string ref_key(const StreamRef& r) {
    std::ostringstream os;
    os << r.name;
    for (const auto& ix : r.indices) {
      os << ",";
      write_expr(os, *ix, /*concrete=*/true);
    }
    return os.str();
  }

  void write_ranges(std::ostringstream& os, const std::vector<SliceRange>& ranges) {
    os << "[";
    for (const auto& r : ranges) {
      if (r.full) {
        os << ":,";
      } else {
        write_expr(os, *r.lo, false);
        os << ":";
        write_expr(os, *r.hi, false);
        os << ",";
      }
    }
    os << "]";
  }

  void write_expr(std::ostringstream& os, const Expr& e, bool concrete) {
    switch (e.kind) {
      case ExprKind::Const:
        if (e.is_float_const)
          os << "f" << e.fval;
        else
          os << "c" << e.ival;
        return;
      case ExprKind::ParamRef:
        if (concrete)
          os << "P:" << e.name;
        else
          os << "p" << role_of(param_roles, e.name);
        return;
      case ExprKind::LocalRef:
        if (concrete)
          os << "L:" << e.name;
        else
          os << "l" << role_of(local_roles, e.name);
        return;
      case ExprKind::TidRef:
        os << "tid" << e.axis;
        return;
      case ExprKind::Get:
        os << "get(io" << role_of(io_roles, ref_key(*e.stream)) << ")";
        return;
      case ExprKind::Await:
        os << "await(";
        write_expr(os, *e.args[0], concrete);
        os << ")";
        return;
      case ExprKind::Eltwise:
        os << "elt." << elt_op_name(e.elt_op) << "(";
        write_expr(os, *e.args[0], concrete);
        os << ",";
        write_expr(os, *e.args[1], concrete);
        os << ")";
        return;
      case ExprKind::Matmul:
        os << "matmul(";
        write_expr(os, *e.args[0], concrete);
        os << ",";
        write_expr(os, *e.args[1], concrete);
        os << ")";
        return;
      case ExprKind::Reduce:
        os << "reduce." << reduce_op_name(e.reduce_op) << "." << e.axis << "(";
        write_expr(os, *e.args[0], concrete);
        os << ")";
        return;
      case ExprKind::AllReduce:
        os << "allreduce." << reduce_op_name(e.reduce_op) << "(";
        write_expr(os, *e.args[0], concrete);
        os << ")";
        return;
      case ExprKind::KernelCall:
        os << "call:" << e.name << "(";
        for (const auto& a : e.args) {
          write_expr(os, *a, concrete);
          os << ",";
        }
        os << ")";
        return;
      case ExprKind::Slice:
        os << "slice(";
        write_expr(os, *e.args[0], concrete);
        write_ranges(os, e.ranges);
        os << ")";
        return;
    }
  }

  void write_stmt(std::ostringstream& os, const Stmt& s) {
    switch (s.kind) {
      case StmtKind::For:
        os << "for l" << role_of(local_roles, s.iv) << " in " << s.bound << "{";
        for (const auto& b : s.body) write_stmt(os, *b);
        os << "}";
        return;
      case StmtKind::Assign: {
        // Parameter writes abstract to positional roles; offsets inside
        // slice ranges stay concrete only via iv roles, so shot-varying
        // regions on the same role still compare equal at key level.
        bool is_local = local_roles.count(s.lvalue->name) > 0;
        os << "assign " << (is_local ? "l" : "p")
           << role_of(is_local ? local_roles : param_roles, s.lvalue->name);
        if (s.lvalue->has_ranges) write_ranges(os, s.lvalue->ranges);
        os << "=";
        write_expr(os, *s.value, false);
        os << ";";
        return;
      }
      case StmtKind::Put:
        os << "put(io" << role_of(io_roles, ref_key(*s.stream)) << ",";
        write_expr(os, *s.value, false);
        os << ");";
        return;
      case StmtKind::LocalDecl:
        os << "local l" << role_of(local_roles, s.local_name);
        if (s.local_type) os << ":" << s.local_type->str();
        if (s.value) {
          os << "=";
          write_expr(os, *s.value, false);
        }
        os << ";";
        return;
    }
  }

};

}  // namespace

std::string canonical_body_key(const std::vector<StmtPtr>& body) {
  Canonicalizer c;
  std::ostringstream os;
  for (const auto& s : body) c.write_stmt(os, *s);
  return os.str();
}

}  // namespace datoc
