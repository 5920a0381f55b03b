#include <sstream>

#include "datoc/parser.hpp"

namespace datoc {

namespace {

struct Printer {
  std::ostringstream os;
  int indent = 0;

  void nl() {
    os << "\n";
    for (int i = 0; i < indent; ++i) os << "  ";
  }

  static int level(const Expr& e) {
    if (e.kind != ExprKind::Eltwise) return 3;
    switch (e.elt_op) {
      case EltOp::Add:
      case EltOp::Sub: return 1;
      case EltOp::Mul: return 2;
      default: return 3;  // max/min print as calls
    }
  }

  void write_float(double v) {
    std::ostringstream t;
    t << v;
    std::string s = t.str();
    if (s.find('.') == std::string::npos && s.find('e') == std::string::npos) s += ".0";
    os << s;
  }

  void write_ranges(const std::vector<SliceRange>& ranges) {
    os << "[";
    for (size_t i = 0; i < ranges.size(); ++i) {
      if (i) os << ", ";
      if (ranges[i].full) {
        os << ":";
      } else {
        write_expr(*ranges[i].lo, 0);
        os << ":";
        write_expr(*ranges[i].hi, 0);
      }
    }
    os << "]";
  }

  void write_ref(const StreamRef& r) {
    os << r.name;
    if (!r.indices.empty()) {
      os << "[";
      for (size_t i = 0; i < r.indices.size(); ++i) {
        if (i) os << ", ";
        write_expr(*r.indices[i], 0);
      }
      os << "]";
    }
  }

  void write_expr(const Expr& e, int parent_level) {
    switch (e.kind) {
      case ExprKind::Const:
        if (e.is_float_const)
          write_float(e.fval);
        else
          os << e.ival;
        return;
      case ExprKind::ParamRef:
      case ExprKind::LocalRef:
        os << e.name;
        return;
      case ExprKind::TidRef:
        os << "tid(" << e.axis << ")";
        return;
      case ExprKind::Get:
        write_ref(*e.stream);
        os << ".get()";
        return;
      case ExprKind::Await:
        os << "await(";
        write_expr(*e.args[0], 0);
        os << ")";
        return;
      case ExprKind::Eltwise: {
        if (e.elt_op == EltOp::Max || e.elt_op == EltOp::Min) {
          os << (e.elt_op == EltOp::Max ? "max(" : "min(");
          write_expr(*e.args[0], 0);
          os << ", ";
          write_expr(*e.args[1], 0);
          os << ")";
          return;
        }
        int lvl = level(e);
        bool parens = lvl < parent_level;
        if (parens) os << "(";
        write_expr(*e.args[0], lvl);
        os << " " << elt_op_name(e.elt_op) << " ";
        // Right operand of - needs parens at equal level: a - (b + c).
        write_expr(*e.args[1], e.elt_op == EltOp::Sub ? lvl + 1 : lvl);
        if (parens) os << ")";
        return;
      }
      case ExprKind::Matmul:
        os << "matmul(";
        write_expr(*e.args[0], 0);
        os << ", ";
        write_expr(*e.args[1], 0);
        os << ")";
        return;
      case ExprKind::Reduce:
        os << "reduce(\"" << reduce_op_name(e.reduce_op) << "\", " << e.axis << ", ";
        write_expr(*e.args[0], 0);
        os << ")";
        return;
      case ExprKind::AllReduce:
        os << "allreduce(";
        write_expr(*e.args[0], 0);
        os << ", \"" << reduce_op_name(e.reduce_op) << "\")";
        return;
      case ExprKind::KernelCall:
        os << e.name << "(";
        for (size_t i = 0; i < e.args.size(); ++i) {
          if (i) os << ", ";
          write_expr(*e.args[i], 0);
        }
        os << ")";
        return;
      case ExprKind::Slice:
        write_expr(*e.args[0], 3);
        write_ranges(e.ranges);
        return;
    }
  }

  void write_stmt(const Stmt& s) {
    switch (s.kind) {
      case StmtKind::For:
        nl();
        os << "for " << s.iv << " in range(" << s.bound << ") {";
        ++indent;
        for (const auto& b : s.body) write_stmt(*b);
        --indent;
        nl();
        os << "}";
        return;
      case StmtKind::Assign:
        nl();
        os << s.lvalue->name;
        if (s.lvalue->has_ranges) write_ranges(s.lvalue->ranges);
        os << " = ";
        write_expr(*s.value, 0);
        os << ";";
        return;
      case StmtKind::Put:
        nl();
        write_ref(*s.stream);
        os << ".put(";
        write_expr(*s.value, 0);
        os << ");";
        return;
      case StmtKind::LocalDecl:
        nl();
        os << "local " << s.local_name;
        if (s.local_type) os << ": " << type_str(*s.local_type);
        if (s.value) {
          os << " = ";
          write_expr(*s.value, 0);
        }
        os << ";";
        return;
    }
  }

  static std::string type_str(const TensorType& t) {
    std::string s = t.elem.name();
    if (!t.shape.empty()) {
      s += "[";
      for (size_t i = 0; i < t.shape.size(); ++i) {
        if (i) s += ", ";
        s += std::to_string(t.shape[i]);
      }
      s += "]";
    }
    return s;
  }
};

}  // namespace

std::string emit_text(const Program& p) {
  Printer pr;
  for (const auto& s : p.streams) {
    pr.os << "stream " << s.name << ": stream<" << Printer::type_str(s.type.elem) << ">";
    if (!s.grid.empty()) {
      pr.os << "[";
      for (size_t i = 0; i < s.grid.size(); ++i) {
        if (i) pr.os << ", ";
        pr.os << s.grid[i];
      }
      pr.os << "]";
    }
    pr.os << " depth " << s.type.depth;
    if (s.type.pack != 1) pr.os << " pack " << s.type.pack;
    pr.os << ";\n";
  }
  for (const auto& t : p.tasks) {
    if (!p.streams.empty() || &t != &p.tasks.front()) pr.os << "\n";
    pr.os << "task " << t.name << "[";
    for (size_t i = 0; i < t.mapping.size(); ++i) {
      if (i) pr.os << ", ";
      pr.os << t.mapping[i];
    }
    pr.os << "](";
    for (size_t i = 0; i < t.params.size(); ++i) {
      if (i) pr.os << ", ";
      const auto& prm = t.params[i];
      pr.os << prm.name << ": " << Printer::type_str(prm.type);
      if (!prm.layout.all_r()) pr.os << " @ \"" << prm.layout.str() << "\"";
    }
    pr.os << ") {";
    pr.indent = 1;
    for (const auto& s : t.body) pr.write_stmt(*s);
    pr.indent = 0;
    pr.nl();
    pr.os << "}\n";
  }
  return pr.os.str();
}

}  // namespace datoc
