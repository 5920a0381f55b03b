// Static checkers: linear-token stream usage via greedy maximal firing of
// the event network, and layout/effect refinement checking. Both return
// diagnostics rather than throwing.
#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "datoc/ast.hpp"
#include "datoc/diag.hpp"
#include "datoc/events.hpp"
#include "datoc/kernel.hpp"

namespace datoc {

// -- stream checking ---------------------------------------------------------

struct StreamInstanceReport {
  StreamInstance inst;
  std::string name;
  int depth = 0;
  std::int64_t puts = 0;
  std::int64_t gets = 0;
  // Sound upper bound of FIFO occupancy over any admissible schedule.
  std::int64_t peak_occupancy = 0;
};

struct StreamReport {
  std::vector<StreamInstanceReport> streams;
  std::int64_t total_events = 0;
  bool used_summaries = false;
};

struct StreamCheckResult {
  std::optional<StreamReport> report;
  Diagnostics diags;
  bool ok() const { return report.has_value() && !has_error(diags); }
};

StreamCheckResult check_streams(const Program& p);

// Wraps every get result in an await at its first computational use.
// Precondition: check_streams accepted.
Program insert_awaits(const Program& p);

// -- layout checking ---------------------------------------------------------

struct JoinResult {
  std::optional<LayoutType> layout;
  std::optional<Diagnostic> error;
};

// Pointwise label join; S labels with different device axes conflict.
JoinResult layout_join(const LayoutType& a, const LayoutType& b, SourceSpan span = {});

// A value during layout checking. Distributed values carry a global shape
// and a layout refinement; local values (stream payloads, tid-derived data,
// partial tile slices) carry only their per-instance tile shape plus the
// set of device axes along which their contents may vary.
struct TypedValue {
  bool distributed = false;
  TensorType global;   // meaningful when distributed
  LayoutType layout;   // meaningful when distributed
  TensorType tile;     // always meaningful (per-instance shape)
  EffectSet effects;
  std::set<int> varying;      // local values only; distributed derive it
  bool scalar_const = false;  // untyped literal, adapts to context

  std::set<int> varying_axes() const;
  std::string str() const;
};

struct AllReduceSite {
  int site_id = -1;
  ReduceOp op = ReduceOp::Add;
  std::set<int> axes;  // device axes the collective combines over
  TensorType tile;     // operand tile type
  std::string task;
};

struct LayoutReport {
  std::map<int, AllReduceSite> sites;
  // Final synthesized values, keyed by task then by name ("param:X" for
  // parameter writes, plain name for locals). For tests and tooling.
  std::map<std::string, std::map<std::string, std::string>> synthesized;
};

struct LayoutCheckResult {
  std::optional<LayoutReport> report;
  Diagnostics diags;
  bool ok() const { return report.has_value() && !has_error(diags); }
};

LayoutCheckResult check_layouts(const Program& p, const KernelRegistry* registry = nullptr);

}  // namespace datoc
