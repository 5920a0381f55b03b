#include <algorithm>
#include <deque>
#include <stdexcept>

#include "datoc/sim.hpp"
#include "interp.hpp"

namespace datoc {

using detail::Env;
using detail::EvalCost;
using detail::FlatOp;

namespace detail {

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return b <= 0 ? a : (a + b - 1) / b; }

// ---------------------------------------------------------------------------
// Flattening
// ---------------------------------------------------------------------------

namespace {

class Flattener {
 public:
  explicit Flattener(const Program& p) : p_(p) {}

  std::vector<FlatOp> run(const std::vector<StmtPtr>& body) {
    for (const auto& s : body) walk(*s);
    return std::move(ops_);
  }

 private:
  const Program& p_;
  std::vector<FlatOp> ops_;
  int next_temp_ = 0;
  int write_seq_ = 0;

  StreamInstance resolve(const StreamRef& r) {
    int si = p_.stream_index(r.name);
    if (si < 0) throw std::runtime_error("unknown stream " + r.name);
    const auto& decl = p_.streams[static_cast<size_t>(si)];
    std::int64_t flat = 0;
    for (size_t d = 0; d < decl.grid.size(); ++d) {
      const Expr& ix = *r.indices[d];
      if (ix.kind != ExprKind::Const)
        throw std::runtime_error("unresolved stream index on " + r.name);
      flat = flat * decl.grid[d] + ix.ival;
    }
    return StreamInstance{si, flat};
  }

  // Replaces every Get with a fresh local fed by a Recv op.
  ExprPtr extract_gets(ExprPtr e) {
    if (e->kind == ExprKind::Get) {
      std::string temp = "$t" + std::to_string(next_temp_++);
      FlatOp op;
      op.kind = FlatOp::Kind::Recv;
      op.inst = resolve(*e->stream);
      op.target = temp;
      ops_.push_back(std::move(op));
      return Expr::make_local(temp, e->span);
    }
    for (auto& a : e->args) a = extract_gets(std::move(a));
    for (auto& r : e->ranges) {
      if (!r.full) {
        r.lo = extract_gets(std::move(r.lo));
        r.hi = extract_gets(std::move(r.hi));
      }
    }
    return e;
  }

  void walk(const Stmt& s) {
    switch (s.kind) {
      case StmtKind::For: {
        for (std::int64_t i = 0; i < s.bound; ++i) {
          for (const auto& b : s.body) {
            StmtPtr inst = substitute_iv(b->clone(), s.iv, i);
            walk(*inst);
          }
        }
        return;
      }
      case StmtKind::Put: {
        FlatOp op;
        op.kind = FlatOp::Kind::Send;
        op.inst = resolve(*s.stream);
        StmtPtr copy = s.clone();
        copy->value = extract_gets(std::move(copy->value));
        op.stmt = std::move(copy);
        ops_.push_back(std::move(op));
        return;
      }
      case StmtKind::LocalDecl: {
        StmtPtr copy = s.clone();
        // A bare get initializer receives straight into the local.
        if (copy->value && copy->value->kind == ExprKind::Get) {
          FlatOp op;
          op.kind = FlatOp::Kind::Recv;
          op.inst = resolve(*copy->value->stream);
          op.target = copy->local_name;
          ops_.push_back(std::move(op));
          return;
        }
        if (copy->value) copy->value = extract_gets(std::move(copy->value));
        FlatOp op;
        op.kind = FlatOp::Kind::Exec;
        op.stmt = std::move(copy);
        ops_.push_back(std::move(op));
        return;
      }
      case StmtKind::Assign: {
        StmtPtr copy = s.clone();
        copy->value = extract_gets(std::move(copy->value));
        FlatOp op;
        op.kind = FlatOp::Kind::Exec;
        op.stmt = std::move(copy);
        op.write_seq = write_seq_++;
        ops_.push_back(std::move(op));
        return;
      }
    }
  }

  static ExprPtr substitute_iv(ExprPtr e, const std::string& iv, std::int64_t v);
  static StmtPtr substitute_iv(StmtPtr s, const std::string& iv, std::int64_t v);
};

ExprPtr Flattener::substitute_iv(ExprPtr e, const std::string& iv, std::int64_t v) {
  if (e->kind == ExprKind::LocalRef && e->name == iv) return Expr::make_int(v, e->span);
  for (auto& a : e->args) a = substitute_iv(std::move(a), iv, v);
  if (e->stream)
    for (auto& ix : e->stream->indices) ix = substitute_iv(std::move(ix), iv, v);
  for (auto& r : e->ranges) {
    if (!r.full) {
      r.lo = substitute_iv(std::move(r.lo), iv, v);
      r.hi = substitute_iv(std::move(r.hi), iv, v);
    }
  }
  return fold_constants(std::move(e));
}

StmtPtr Flattener::substitute_iv(StmtPtr s, const std::string& iv, std::int64_t v) {
  if (s->kind == StmtKind::For && s->iv == iv) return s;  // shadowed
  for (auto& b : s->body) b = substitute_iv(std::move(b), iv, v);
  if (s->value) s->value = substitute_iv(std::move(s->value), iv, v);
  if (s->stream)
    for (auto& ix : s->stream->indices) ix = substitute_iv(std::move(ix), iv, v);
  if (s->lvalue) {
    for (auto& r : s->lvalue->ranges) {
      if (!r.full) {
        r.lo = substitute_iv(std::move(r.lo), iv, v);
        r.hi = substitute_iv(std::move(r.hi), iv, v);
      }
    }
  }
  return s;
}

}  // namespace

std::vector<FlatOp> flatten_body(const std::vector<StmtPtr>& body, const Program& p) {
  Flattener f(p);
  return f.run(body);
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

namespace {

Region ranges_to_region(const std::vector<SliceRange>& ranges,
                        const std::vector<std::int64_t>& dims) {
  Region out;
  for (size_t d = 0; d < dims.size(); ++d) {
    if (d < ranges.size() && !ranges[d].full) {
      if (ranges[d].lo->kind != ExprKind::Const || ranges[d].hi->kind != ExprKind::Const)
        throw std::runtime_error("unresolved slice bound");
      out.emplace_back(ranges[d].lo->ival, ranges[d].hi->ival - ranges[d].lo->ival);
    } else {
      out.emplace_back(0, dims[d]);
    }
  }
  return out;
}

}  // namespace

TensorValue eval_expr(const Expr& e, Env& env, const CostModel& cost,
                      const KernelRegistry* registry, EvalCost* out_cost) {
  switch (e.kind) {
    case ExprKind::Const:
      if (e.is_float_const)
        return TensorValue::scalar(ElemType{ElemKind::F32}, e.fval);
      return TensorValue::scalar(ElemType{ElemKind::I32}, static_cast<double>(e.ival));
    case ExprKind::ParamRef:
    case ExprKind::LocalRef: {
      TensorValue* v = env.find(e.name);
      if (!v) throw std::runtime_error("unbound name " + e.name);
      return *v;
    }
    case ExprKind::TidRef:
      throw std::runtime_error("tid outside an instantiated body");
    case ExprKind::Get:
      throw std::runtime_error("get must be flattened into a recv");
    case ExprKind::Await:
    case ExprKind::AllReduce:  // identity in dense and lowered execution
      return eval_expr(*e.args[0], env, cost, registry, out_cost);
    case ExprKind::Eltwise: {
      TensorValue a = eval_expr(*e.args[0], env, cost, registry, out_cost);
      TensorValue b = eval_expr(*e.args[1], env, cost, registry, out_cost);
      TensorValue r = eltwise(e.elt_op, a, b);
      if (out_cost)
        out_cost->cycles += detail::ceil_div(r.count(), cost.eltwise_elems_per_cycle);
      return r;
    }
    case ExprKind::Matmul: {
      TensorValue a = eval_expr(*e.args[0], env, cost, registry, out_cost);
      TensorValue b = eval_expr(*e.args[1], env, cost, registry, out_cost);
      TensorValue r = matmul(a, b);
      if (out_cost) {
        std::int64_t cycles = -1;
        if (registry) {
          auto m = match_kernel(e, {a.type, b.type}, *registry);
          if (m && m->contract->latency_cycles) cycles = m->contract->latency_cycles(m->binding);
        }
        if (cycles < 0) {
          std::int64_t macs = a.type.shape[0] * a.type.shape[1] * b.type.shape[1];
          cycles = detail::ceil_div(macs, cost.macs_per_cycle(a.type.elem.kind));
        }
        if (cycles < 1) cycles = 1;
        out_cost->cycles += cycles;
        out_cost->mac_cycles += cycles;
      }
      return r;
    }
    case ExprKind::Reduce: {
      TensorValue a = eval_expr(*e.args[0], env, cost, registry, out_cost);
      TensorValue r = reduce(e.reduce_op, e.axis, a);
      if (out_cost)
        out_cost->cycles += detail::ceil_div(a.count(), cost.eltwise_elems_per_cycle);
      return r;
    }
    case ExprKind::KernelCall: {
      std::vector<TensorValue> args;
      std::vector<TensorType> types;
      for (const auto& a : e.args) {
        args.push_back(eval_expr(*a, env, cost, registry, out_cost));
        types.push_back(args.back().type);
      }
      if (!registry) throw std::runtime_error("kernel call without a registry: " + e.name);
      auto m = match_kernel(e, types, *registry);
      if (!m) throw std::runtime_error("no kernel contract matches " + e.name);
      if (out_cost && m->contract->latency_cycles) {
        std::int64_t c = m->contract->latency_cycles(m->binding);
        out_cost->cycles += c;
        out_cost->mac_cycles += c;
      }
      // Kernel semantics are opaque; contracts carry cost only. Execute as
      // identity on the first argument shaped to the result pattern.
      if (m->contract->result) {
        TensorType rt;
        rt.elem = m->contract->result->elem;
        for (const auto& d : m->contract->result->shape)
          rt.shape.push_back(d.wildcard ? m->binding.at(d.name) : d.size);
        TensorValue out = TensorValue::zeros(rt);
        if (!args.empty() && args[0].count() == out.count()) {
          for (std::int64_t i = 0; i < out.count(); ++i) {
            if (out.is_float())
              out.set(i, args[0].is_float() ? args[0].get_f(i)
                                            : static_cast<float>(args[0].get_i(i)));
            else
              out.set(i, args[0].is_float() ? static_cast<std::int64_t>(args[0].get_f(i))
                                            : args[0].get_i(i));
          }
        }
        return out;
      }
      return args.empty() ? TensorValue::scalar(ElemType{ElemKind::I32}, 0) : args[0];
    }
    case ExprKind::Slice: {
      TensorValue a = eval_expr(*e.args[0], env, cost, registry, out_cost);
      return read_region(a, ranges_to_region(e.ranges, a.type.shape));
    }
  }
  throw std::runtime_error("unreachable expression kind");
}

void exec_stmt(const Stmt& s, Env& env, const CostModel& cost, const KernelRegistry* registry,
               EvalCost* out_cost) {
  switch (s.kind) {
    case StmtKind::LocalDecl: {
      if (!s.value) {
        env.locals[s.local_name] = TensorValue::zeros(*s.local_type);
        return;
      }
      TensorValue v = eval_expr(*s.value, env, cost, registry, out_cost);
      if (s.local_type && v.type.rank() == 0 && s.local_type->rank() != 0) {
        TensorValue bcast = TensorValue::zeros(*s.local_type);
        for (std::int64_t i = 0; i < bcast.count(); ++i) {
          if (bcast.is_float())
            bcast.set(i, v.is_float() ? v.get_f(0) : static_cast<float>(v.get_i(0)));
          else
            bcast.set(i, v.is_float() ? static_cast<std::int64_t>(v.get_f(0)) : v.get_i(0));
        }
        env.locals[s.local_name] = std::move(bcast);
        return;
      }
      env.locals[s.local_name] = std::move(v);
      return;
    }
    case StmtKind::Assign: {
      TensorValue v = eval_expr(*s.value, env, cost, registry, out_cost);
      TensorValue* dst = env.find(s.lvalue->name);
      if (!dst) throw std::runtime_error("assignment to unbound " + s.lvalue->name);
      Region r = s.lvalue->has_ranges ? ranges_to_region(s.lvalue->ranges, dst->type.shape)
                                      : [&] {
                                          Region full;
                                          for (auto d : dst->type.shape) full.emplace_back(0, d);
                                          return full;
                                        }();
      if (v.type.rank() == 0 && dst->type.rank() != 0) {
        // Broadcast fill.
        TensorValue bcast = TensorValue::zeros(TensorType{dst->type.elem, [&] {
                                                 std::vector<std::int64_t> dims;
                                                 for (const auto& [o, sz] : r) {
                                                   (void)o;
                                                   dims.push_back(sz);
                                                 }
                                                 return dims;
                                               }()});
        for (std::int64_t i = 0; i < bcast.count(); ++i) {
          if (bcast.is_float())
            bcast.set(i, v.is_float() ? v.get_f(0) : static_cast<float>(v.get_i(0)));
          else
            bcast.set(i, v.is_float() ? static_cast<std::int64_t>(v.get_f(0)) : v.get_i(0));
        }
        write_region(*dst, r, bcast);
        return;
      }
      write_region(*dst, r, v);
      return;
    }
    default:
      throw std::runtime_error("exec_stmt on non-exec statement");
  }
}

TensorValue eval_payload(const Stmt& put_stmt, Env& env, const CostModel& cost,
                         const KernelRegistry* registry, EvalCost* out_cost,
                         const TensorType& elem_type) {
  TensorValue v = eval_expr(*put_stmt.value, env, cost, registry, out_cost);
  if (v.type == elem_type) return v;
  // Scalar constants and element-kind coercions convert on enqueue.
  TensorValue out = TensorValue::zeros(elem_type);
  if (v.type.rank() == 0) {
    for (std::int64_t i = 0; i < out.count(); ++i) {
      if (out.is_float())
        out.set(i, v.is_float() ? v.get_f(0) : static_cast<float>(v.get_i(0)));
      else
        out.set(i, v.is_float() ? static_cast<std::int64_t>(v.get_f(0)) : v.get_i(0));
    }
    return out;
  }
  if (v.count() != out.count())
    throw std::runtime_error("payload shape mismatch: " + v.type.str() + " vs " +
                             elem_type.str());
  for (std::int64_t i = 0; i < out.count(); ++i) {
    if (out.is_float())
      out.set(i, v.is_float() ? v.get_f(i) : static_cast<float>(v.get_i(i)));
    else
      out.set(i, v.is_float() ? static_cast<std::int64_t>(v.get_f(i)) : v.get_i(i));
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Cost model
// ---------------------------------------------------------------------------

std::int64_t CostModel::macs_per_cycle(ElemKind kind) const {
  switch (kind) {
    case ElemKind::I4: return macs_per_cycle_i4;
    case ElemKind::I8: return macs_per_cycle_i8;
    case ElemKind::I16:
    case ElemKind::BF16: return macs_per_cycle_i16;
    case ElemKind::I32:
    case ElemKind::F32: return macs_per_cycle_i32;
  }
  return macs_per_cycle_i32;
}

// ---------------------------------------------------------------------------
// Program IO and seeded inputs
// ---------------------------------------------------------------------------

ProgramIo classify_io(const Program& p) {
  ProgramIo io;
  std::map<std::string, TensorType> types;
  std::set<std::string> read, written;
  for (const auto& t : p.tasks) {
    std::set<std::string> locals;
    std::function<void(const Stmt&)> walk_stmt = [&](const Stmt& s) {
      if (s.kind == StmtKind::LocalDecl) locals.insert(s.local_name);
      if (s.kind == StmtKind::Assign && !locals.count(s.lvalue->name) &&
          t.find_param(s.lvalue->name))
        written.insert(s.lvalue->name);
      std::function<void(const Expr&)> walk_expr = [&](const Expr& e) {
        if (e.kind == ExprKind::ParamRef) read.insert(e.name);
        for (const auto& a : e.args) walk_expr(*a);
        for (const auto& r : e.ranges) {
          if (!r.full) {
            walk_expr(*r.lo);
            walk_expr(*r.hi);
          }
        }
      };
      if (s.value) walk_expr(*s.value);
      for (const auto& b : s.body) walk_stmt(*b);
    };
    for (const auto& prm : t.params) types[prm.name] = prm.type;
    for (const auto& s : t.body) walk_stmt(*s);
  }
  for (const auto& [name, type] : types) {
    bool r = read.count(name) > 0, w = written.count(name) > 0;
    if (r && !w) io.inputs.emplace_back(name, type);
    if (w) io.outputs.emplace_back(name, type);
  }
  return io;
}

std::map<std::string, TensorValue> seeded_inputs(const Program& p, std::uint64_t seed) {
  ProgramIo io = classify_io(p);
  std::map<std::string, TensorValue> out;
  Lcg gen(seed);
  for (const auto& [name, type] : io.inputs) out.emplace(name, random_tensor(type, gen));
  return out;
}

// ---------------------------------------------------------------------------
// Dense oracle
// ---------------------------------------------------------------------------

std::map<std::string, TensorValue> oracle_reference(
    const Program& p, const std::map<std::string, TensorValue>& inputs) {
  // Global dense buffers: inputs as given, everything else zeros.
  std::map<std::string, TensorValue> buffers;
  std::map<std::string, std::string> writer_task;
  for (const auto& t : p.tasks) {
    for (const auto& prm : t.params) {
      if (!buffers.count(prm.name)) {
        auto it = inputs.find(prm.name);
        buffers.emplace(prm.name,
                        it != inputs.end() ? it->second : TensorValue::zeros(prm.type));
      }
    }
  }
  ProgramIo io = classify_io(p);
  for (const auto& t : p.tasks) {
    std::function<void(const Stmt&, std::set<std::string>&)> walk = [&](const Stmt& s,
                                                                        std::set<std::string>& locals) {
      if (s.kind == StmtKind::LocalDecl) locals.insert(s.local_name);
      if (s.kind == StmtKind::Assign && !locals.count(s.lvalue->name) &&
          t.find_param(s.lvalue->name))
        writer_task[s.lvalue->name] = t.name;
      for (const auto& b : s.body) walk(*b, locals);
    };
    std::set<std::string> locals;
    for (const auto& s : t.body) walk(*s, locals);
  }

  struct Instance {
    const TaskDef* task;
    std::vector<detail::FlatOp> ops;
    detail::Env env;
    size_t pc = 0;
    bool done() const { return pc >= ops.size(); }
  };

  CostModel cost;  // costs ignored; evaluation only
  std::vector<Instance> instances;
  for (const auto& t : p.tasks) {
    for (auto& coord : enumerate_coords(t.mapping)) {
      Instance in;
      in.task = &t;
      auto body = instantiate_body(t, coord);
      in.ops = detail::flatten_body(body, p);
      for (const auto& prm : t.params) in.env.params[prm.name] = &buffers.at(prm.name);
      instances.push_back(std::move(in));
    }
  }

  // Buffer dependencies: a reader waits until the writing task's instances
  // complete.
  auto writers_done = [&](const Instance& in) {
    for (const auto& prm : in.task->params) {
      auto w = writer_task.find(prm.name);
      if (w == writer_task.end() || w->second == in.task->name) continue;
      for (const auto& other : instances)
        if (other.task->name == w->second && !other.done()) return false;
    }
    return true;
  };

  std::map<StreamInstance, std::deque<TensorValue>> queues;  // unbounded

  bool progress = true;
  while (progress) {
    progress = false;
    for (auto& in : instances) {
      if (!in.done() && !writers_done(in)) continue;
      while (!in.done()) {
        detail::FlatOp& op = in.ops[in.pc];
        if (op.kind == detail::FlatOp::Kind::Recv) {
          auto& q = queues[op.inst];
          if (q.empty()) break;
          in.env.locals[op.target] = std::move(q.front());
          q.pop_front();
        } else if (op.kind == detail::FlatOp::Kind::Send) {
          const auto& decl = p.streams[static_cast<size_t>(op.inst.stream)];
          // Dense payloads keep their own (full) shape; only coerce the
          // element kind via a same-count conversion when needed.
          detail::EvalCost ec;
          TensorValue v = detail::eval_expr(*op.stmt->value, in.env, cost, nullptr, &ec);
          if (v.type.rank() == 0) {
            TensorValue scalar = TensorValue::zeros(decl.type.elem);
            for (std::int64_t i = 0; i < scalar.count(); ++i) {
              if (scalar.is_float())
                scalar.set(i, v.is_float() ? v.get_f(0) : static_cast<float>(v.get_i(0)));
              else
                scalar.set(i, v.is_float() ? static_cast<std::int64_t>(v.get_f(0)) : v.get_i(0));
            }
            v = std::move(scalar);
          }
          queues[op.inst].push_back(std::move(v));
        } else {
          detail::EvalCost ec;
          detail::exec_stmt(*op.stmt, in.env, cost, nullptr, &ec);
        }
        in.pc += 1;
        progress = true;
      }
    }
  }

  for (const auto& in : instances) {
    if (!in.done())
      throw std::runtime_error("oracle blocked; program was not checker-accepted");
  }

  std::map<std::string, TensorValue> outputs;
  for (const auto& [name, type] : io.outputs) {
    (void)type;
    outputs.emplace(name, buffers.at(name));
  }
  return outputs;
}

}  // namespace datoc
