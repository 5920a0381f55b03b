// Internal: flattens unit bodies into resumable op sequences and evaluates
// statements over tensor environments. Shared by the dense oracle and the
// mapped fabric machine.
#pragma once

#include <map>
#include <string>
#include <vector>

#include "datoc/ast.hpp"
#include "datoc/events.hpp"
#include "datoc/kernel.hpp"
#include "datoc/sim.hpp"
#include "datoc/value.hpp"

namespace datoc::detail {

struct FlatOp {
  enum class Kind { Recv, Send, Exec };
  Kind kind = Kind::Exec;
  StreamInstance inst;  // Recv / Send
  std::string target;   // Recv: local receiving the payload
  StmtPtr stmt;         // Exec: loop-free statement; Send: Put statement
  int write_seq = -1;   // Exec param writes: program order
};

// Unrolls loops, extracts gets into Recv ops (evaluation order) and
// resolves stream references to instances. Bodies must be closed (tids
// substituted); loop bounds constant.
std::vector<FlatOp> flatten_body(const std::vector<StmtPtr>& body, const Program& p);

struct EvalCost {
  std::int64_t cycles = 0;
  std::int64_t mac_cycles = 0;
};

// Tensor environment: locals by value, parameters by mutable pointer.
struct Env {
  std::map<std::string, TensorValue> locals;
  std::map<std::string, TensorValue*> params;

  TensorValue* find(const std::string& name) {
    auto it = locals.find(name);
    if (it != locals.end()) return &it->second;
    auto pit = params.find(name);
    return pit == params.end() ? nullptr : pit->second;
  }
};

// Evaluates an expression; accumulates the cost model alongside.
TensorValue eval_expr(const Expr& e, Env& env, const CostModel& cost,
                      const KernelRegistry* registry, EvalCost* out_cost);

// Executes an Exec/Send statement's effects (assignment, local declaration)
// or computes a Send payload.
void exec_stmt(const Stmt& s, Env& env, const CostModel& cost, const KernelRegistry* registry,
               EvalCost* out_cost);
TensorValue eval_payload(const Stmt& put_stmt, Env& env, const CostModel& cost,
                         const KernelRegistry* registry, EvalCost* out_cost,
                         const TensorType& elem_type);

std::int64_t ceil_div(std::int64_t a, std::int64_t b);

}  // namespace datoc::detail
