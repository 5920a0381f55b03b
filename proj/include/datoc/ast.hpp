// Program representation: statements, expressions, stream and task
// declarations. Nodes are immutable after construction; instantiation
// (tid substitution) produces fresh trees.
#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "datoc/diag.hpp"
#include "datoc/types.hpp"

namespace datoc {

struct Expr;
using ExprPtr = std::unique_ptr<Expr>;

enum class ExprKind {
  Const,       // integer or float literal
  ParamRef,    // reference to a task parameter
  LocalRef,    // reference to a local or loop iv
  TidRef,      // tid(axis)
  Get,         // stream.get()
  Await,       // await(e) -- compiler inserted
  Eltwise,     // binary elementwise op (scalar broadcast allowed)
  Matmul,
  Reduce,      // reduce(op, axis, e)
  AllReduce,   // allreduce(e, op)
  KernelCall,  // name(args...)
  Slice,       // e[ranges]  (full ":" or lo:hi, no rank change)
};

enum class EltOp { Add, Sub, Mul, Max, Min };
const char* elt_op_name(EltOp op);

// One slice range. Full means ":". Bounds are expressions that must be
// constant or affine in loop ivs.
struct SliceRange {
  bool full = true;
  ExprPtr lo;  // null when full
  ExprPtr hi;
};

// Reference to a stream (array element), e.g. Z[tid(0), j].
struct StreamRef {
  std::string name;
  std::vector<ExprPtr> indices;
  SourceSpan span;
};

struct Expr {
  ExprKind kind;
  SourceSpan span;

  // Const
  bool is_float_const = false;
  std::int64_t ival = 0;
  double fval = 0.0;

  std::string name;  // ParamRef/LocalRef/KernelCall name
  int axis = -1;     // TidRef axis, Reduce axis

  EltOp elt_op = EltOp::Add;
  ReduceOp reduce_op = ReduceOp::Add;
  int site_id = -1;  // unique id for AllReduce sites, assigned at parse

  std::optional<StreamRef> stream;  // Get
  std::vector<ExprPtr> args;        // operands
  std::vector<SliceRange> ranges;   // Slice

  ExprPtr clone() const;

  static ExprPtr make_int(std::int64_t v, SourceSpan sp = {});
  static ExprPtr make_float(double v, SourceSpan sp = {});
  static ExprPtr make_param(std::string name, SourceSpan sp = {});
  static ExprPtr make_local(std::string name, SourceSpan sp = {});
  static ExprPtr make_tid(int axis, SourceSpan sp = {});
  static ExprPtr make_get(StreamRef ref, SourceSpan sp = {});
  static ExprPtr make_await(ExprPtr inner, SourceSpan sp = {});
  static ExprPtr make_eltwise(EltOp op, ExprPtr a, ExprPtr b, SourceSpan sp = {});
  static ExprPtr make_matmul(ExprPtr a, ExprPtr b, SourceSpan sp = {});
  static ExprPtr make_reduce(ReduceOp op, int axis, ExprPtr a, SourceSpan sp = {});
  static ExprPtr make_allreduce(ReduceOp op, ExprPtr a, int site_id, SourceSpan sp = {});
  static ExprPtr make_kernel_call(std::string name, std::vector<ExprPtr> args, SourceSpan sp = {});
  static ExprPtr make_slice(ExprPtr base, std::vector<SliceRange> ranges, SourceSpan sp = {});
};

struct Stmt;
using StmtPtr = std::unique_ptr<Stmt>;

enum class StmtKind { For, Assign, Put, LocalDecl };

// Assignment target: name plus optional slice ranges.
struct LValue {
  std::string name;
  bool has_ranges = false;
  std::vector<SliceRange> ranges;
  SourceSpan span;
};

struct Stmt {
  StmtKind kind;
  SourceSpan span;

  // For
  std::string iv;
  std::int64_t bound = 0;  // range(bound), constant
  std::vector<StmtPtr> body;

  // Assign
  std::optional<LValue> lvalue;
  ExprPtr value;  // Assign rhs / Put payload / LocalDecl init (may be null)

  // Put
  std::optional<StreamRef> stream;

  // LocalDecl
  std::string local_name;
  std::optional<TensorType> local_type;

  StmtPtr clone() const;

  static StmtPtr make_for(std::string iv, std::int64_t bound, std::vector<StmtPtr> body,
                          SourceSpan sp = {});
  static StmtPtr make_assign(LValue lv, ExprPtr rhs, SourceSpan sp = {});
  static StmtPtr make_put(StreamRef ref, ExprPtr payload, SourceSpan sp = {});
  static StmtPtr make_local(std::string name, std::optional<TensorType> type, ExprPtr init,
                            SourceSpan sp = {});
};

struct StreamDecl {
  std::string name;
  StreamType type;
  std::vector<std::int64_t> grid;  // array-of-streams extents; empty = single stream
  SourceSpan span;

  std::int64_t instance_count() const;
};

struct Param {
  std::string name;
  TensorType type;          // global (declared) tensor type
  LayoutType layout;        // defaults to all-R
  bool layout_explicit = false;
  SourceSpan span;
};

struct TaskDef {
  std::string name;
  std::vector<std::int64_t> mapping;  // virtual grid extents
  std::vector<Param> params;
  std::vector<StmtPtr> body;
  SourceSpan span;

  std::int64_t instance_count() const;
  const Param* find_param(const std::string& n) const;
};

struct Program {
  std::vector<StreamDecl> streams;
  std::vector<TaskDef> tasks;
  std::string source_file;

  const StreamDecl* find_stream(const std::string& name) const;
  int stream_index(const std::string& name) const;  // -1 if absent
  const TaskDef* find_task(const std::string& name) const;

  Program clone() const;
};

// Structural equality ignoring source spans.
bool equal(const Expr& a, const Expr& b);
bool equal(const Stmt& a, const Stmt& b);
bool equal(const Program& a, const Program& b);

// Canonical body serialization for bundle-isomorphism checks: stream
// instance references and parameter names are abstracted to positional
// roles, so bodies that differ only in shot-varying I/O bindings compare
// equal. Loop ivs are positional as well.
std::string canonical_body_key(const std::vector<StmtPtr>& body);

}  // namespace datoc
