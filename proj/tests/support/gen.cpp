#include "gen.hpp"

#include <sstream>
#include <stdexcept>

#include "datoc/parser.hpp"

namespace testutil {

namespace {

int pick(std::mt19937& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

// Payload shapes small enough for exhaustive checks.
struct Shape {
  std::string type_suffix;   // e.g. "[4]" or "[2, 4]" or ""
  std::string sharded_decl;  // declared global type for an S0-sharded param
  std::string layout;        // layout string for the sharded param
  int rank;
};

Shape make_shape(std::mt19937& rng, int p) {
  int rank = pick(rng, 0, 2);
  Shape s;
  s.rank = rank;
  if (rank == 0) {
    s.type_suffix = "";
    s.sharded_decl = "";
    s.layout = "";
  } else if (rank == 1) {
    s.type_suffix = "[4]";
    s.sharded_decl = "[" + std::to_string(4 * p) + "]";
    s.layout = "S0";
  } else {
    s.type_suffix = "[2, 4]";
    s.sharded_decl = "[" + std::to_string(2 * p) + ", 4]";
    s.layout = "S0R";
  }
  return s;
}

std::string transform(std::mt19937& rng, const std::string& e) {
  switch (pick(rng, 0, 3)) {
    case 0: return e + " + " + std::to_string(pick(rng, 1, 5));
    case 1: return e + " * " + std::to_string(pick(rng, 2, 3));
    case 2: return "max(" + e + ", " + std::to_string(pick(rng, 0, 3)) + ")";
    default: return e + " - " + std::to_string(pick(rng, 1, 4));
  }
}

std::string pipeline_program(std::mt19937& rng, const GenOptions& opts) {
  int p = pick(rng, 1, 2);
  int stages = pick(rng, 1, opts.max_stages);
  int items = pick(rng, 1, 3);
  int depth = pick(rng, 1, 3);
  const char* elem = pick(rng, 0, 1) ? "i16" : "i8";
  Shape sh = make_shape(rng, p);
  // A rank-0 sink written by several instances would be nondeterministic.
  if (sh.rank == 0) p = 1;
  bool diamond = stages == 2 && pick(rng, 0, 3) == 0;

  // Fault selection.
  int fault = opts.allow_faults ? pick(rng, 0, 5) : -1;  // 0..2 inject, else clean
  bool drop_put = fault == 0;
  bool extra_put = fault == 1;
  bool crossed = fault == 2;

  std::ostringstream os;
  auto stream_name = [&](int i, const char* tag = "") {
    return "s" + std::to_string(i) + tag;
  };
  for (int i = 0; i < stages; ++i) {
    if (diamond && i == 0) {
      os << "stream s0a: stream<" << elem << sh.type_suffix << ">[" << p << "] depth "
         << depth << ";\n";
      os << "stream s0b: stream<" << elem << sh.type_suffix << ">[" << p << "] depth "
         << depth << ";\n";
    } else {
      os << "stream " << stream_name(i) << ": stream<" << elem << sh.type_suffix << ">["
         << p << "] depth " << depth << ";\n";
    }
  }

  std::string tid = "[tid(0)]";
  std::string source_payload =
      sh.rank == 0 ? "A" : (sh.rank == 1 ? "A[:]" : "A[:, :]");
  std::string decl_a = sh.rank == 0 ? std::string(elem)
                                    : std::string(elem) + sh.sharded_decl +
                                          (p > 1 ? " @ \"" + sh.layout + "\"" : "");

  // Source task.
  os << "task src[" << p << "](A: " << decl_a << ") {\n";
  os << "  for r in range(" << items << ") {\n";
  if (diamond) {
    os << "    s0a" << tid << ".put(" << transform(rng, source_payload) << ");\n";
    os << "    s0b" << tid << ".put(" << transform(rng, source_payload) << ");\n";
  } else {
    os << "    " << stream_name(0) << tid << ".put(" << transform(rng, source_payload)
       << ");\n";
  }
  if (extra_put && !diamond) os << "    " << stream_name(0) << tid << ".put(A);\n";
  os << "  }\n";
  os << "}\n";

  // Middle tasks.
  for (int i = 0; i + 1 < stages; ++i) {
    if (diamond && i == 0) {
      for (const char* tag : {"a", "b"}) {
        os << "task mid0" << tag << "[" << p << "]() {\n";
        os << "  for r in range(" << items << ") {\n";
        os << "    " << stream_name(1) << tag << "" << tid << ".put("
           << transform(rng, "s0" + std::string(tag) + tid + ".get()") << ");\n";
        os << "  }\n}\n";
        os << "stream " << stream_name(1) << tag << ": stream<" << elem << sh.type_suffix
           << ">[" << p << "] depth " << depth << ";\n";
      }
      ++i;  // consumed one extra stage
      continue;
    }
    os << "task mid" << i << "[" << p << "]() {\n";
    os << "  for r in range(" << items << ") {\n";
    os << "    " << stream_name(i + 1) << tid << ".put("
       << transform(rng, stream_name(i) + tid + ".get()") << ");\n";
    os << "  }\n}\n";
  }

  // Sink task.
  std::string decl_b = sh.rank == 0 ? std::string(elem)
                                    : std::string(elem) + sh.sharded_decl +
                                          (p > 1 ? " @ \"" + sh.layout + "\"" : "");
  std::string lv = sh.rank == 0 ? "B" : (sh.rank == 1 ? "B[:]" : "B[:, :]");
  os << "task sink[" << p << "](B: " << decl_b << ") {\n";
  os << "  for r in range(" << items << (drop_put ? " + 1" : "") << ") {\n";
  if (diamond) {
    std::string last_a = stream_name(stages - 1, "a");
    std::string last_b = stream_name(stages - 1, "b");
    if (stages == 2) {
      last_a = stream_name(1, "a");
      last_b = stream_name(1, "b");
    }
    os << "    " << lv << " = " << last_a << tid << ".get() + " << last_b << tid
       << ".get();\n";
  } else {
    os << "    " << lv << " = " << transform(rng, stream_name(stages - 1) + tid + ".get()")
       << ";\n";
  }
  os << "  }\n}\n";

  if (crossed) {
    // A Fig. 5-style wait cycle on the side: both tasks get before they put.
    os << "stream xAB: stream<" << elem << "> depth " << depth << ";\n";
    os << "stream xBA: stream<" << elem << "> depth " << depth << ";\n";
    os << "task x0[1]() {\n  for r in range(2) {\n"
       << "    local a = xBA.get();\n    xAB.put(a);\n  }\n}\n";
    os << "task x1[1]() {\n  for r in range(2) {\n"
       << "    local b = xAB.get();\n    xBA.put(b);\n  }\n}\n";
  }
  return os.str();
}

std::string gemm_program(std::mt19937& rng) {
  int pk = pick(rng, 1, 2), pm = pick(rng, 1, 2), pn = pick(rng, 1, 2);
  int m = 4 * pm, k = 4 * pn, n = 4 * pk;
  std::ostringstream os;
  os << "task gemm[" << pk << ", " << pm << ", " << pn << "](";
  os << "A: i16[" << m << ", " << k << "] @ \"S1S2\", ";
  os << "B: i16[" << k << ", " << n << "] @ \"S2S0\", ";
  os << "C: i16[" << m << ", " << n << "] @ \"S1S0\") {\n";
  os << "  local part_C = matmul(A, B);\n";
  os << "  C[:, :] = allreduce(part_C, \"+\");\n";
  os << "}\n";
  return os.str();
}

}  // namespace

datoc::Program random_program(std::mt19937& rng, const GenOptions& opts) {
  std::string text;
  if (opts.allow_gemm && !opts.allow_faults && pick(rng, 0, 4) == 0)
    text = gemm_program(rng);
  else
    text = pipeline_program(rng, opts);
  auto r = datoc::parse_program(text, "<generated>");
  if (!r.ok())
    throw std::runtime_error("generator produced unparseable text at " + r.error->span.str() +
                             " (" + r.error->message() + "):\n" + text);
  return std::move(*r.program);
}

}  // namespace testutil
