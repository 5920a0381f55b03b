#include <doctest.h>

#include "datoc/typecheck.hpp"
#include "support/util.hpp"

using namespace datoc;

namespace {
LayoutType L(const char* s) { return *layout_from_string(s); }
}  // namespace

TEST_CASE("join table: R join R is R, S wins, mismatched S conflicts") {
  auto rr = layout_join(L("RR"), L("RR"));
  REQUIRE(rr.layout);
  CHECK(rr.layout->str() == "RR");

  auto sr = layout_join(L("S1R"), L("RR"));
  REQUIRE(sr.layout);
  CHECK(sr.layout->str() == "S1R");

  auto conflict = layout_join(L("S1R"), L("S2R"));
  CHECK_FALSE(conflict.layout);
  REQUIRE(conflict.error);
  CHECK(conflict.error->code == code::AxisConflict);
}

TEST_CASE("gemm synthesizes S1S0 with discharged add effect") {
  Program p = testutil::load_corpus("gemm.dato");
  auto r = check_layouts(p);
  REQUIRE_MESSAGE(r.ok(), (r.diags.empty() ? "" : render(r.diags[0])));
  // part_C carries the pending + from the sharded contraction.
  const auto& synth = r.report->synthesized.at("gemm");
  CHECK(synth.at("part_C").find("S1S0") != std::string::npos);
  CHECK(synth.at("part_C").find("{+}") != std::string::npos);
  CHECK(synth.at("param:C").find("S1S0") != std::string::npos);
  CHECK(synth.at("param:C").find("{}") != std::string::npos);
  // The allreduce site combines over device axis 2.
  REQUIRE(r.report->sites.size() == 1);
  CHECK(r.report->sites.begin()->second.axes == std::set<int>{2});
}

TEST_CASE("removing the allreduce leaves a pending effect at the output") {
  Program p = testutil::parse_ok(R"(
let M = 64;
task gemm[2, 2, 2](A: i16[M, M] @ "S1S2", B: i16[M, M] @ "S2S0", C: i16[M, M] @ "S1S0") {
  local part_C = matmul(A, B);
  C[:, :] = part_C;
}
)");
  auto r = check_layouts(p);
  REQUIRE_FALSE(r.ok());
  CHECK(has_code(r.diags, code::PendingEffect));
}

TEST_CASE("reduce over a replicated axis is local and final") {
  Program p = testutil::parse_ok(R"(
task t[2](x: f32[4, 8] @ "S0R", y: f32[4] @ "S0") {
  y[:] = reduce("+", 1, x);
}
)");
  auto r = check_layouts(p);
  REQUIRE_MESSAGE(r.ok(), (r.diags.empty() ? "" : render(r.diags[0])));
  CHECK(r.report->synthesized.at("t").at("param:y").find("{}") != std::string::npos);
}

TEST_CASE("reduce over a sharded axis adds the operator to the effect set") {
  Program p = testutil::parse_ok(R"(
task t[2](x: f32[4, 8] @ "RS0", y: f32[4]) {
  y[:] = reduce("max", 1, x);
}
)");
  auto r = check_layouts(p);
  REQUIRE_FALSE(r.ok());
  CHECK(has_code(r.diags, code::PendingEffect));

  Program ok = testutil::parse_ok(R"(
task t[2](x: f32[4, 8] @ "RS0", y: f32[4]) {
  local partial = reduce("max", 1, x);
  y[:] = allreduce(partial, "max");
}
)");
  auto r2 = check_layouts(ok);
  REQUIRE_MESSAGE(r2.ok(), (r2.diags.empty() ? "" : render(r2.diags[0])));
}

TEST_CASE("allreduce with a different operator does not discharge") {
  Program p = testutil::parse_ok(R"(
task t[2](x: f32[4, 8] @ "RS0", y: f32[4]) {
  local partial = reduce("max", 1, x);
  y[:] = allreduce(partial, "+");
}
)");
  auto r = check_layouts(p);
  REQUIRE_FALSE(r.ok());
  CHECK(has_code(r.diags, code::PendingEffect));
}

TEST_CASE("contraction axis layouts must agree") {
  Program p = testutil::parse_ok(R"(
task t[2, 2](A: i16[8, 8] @ "S1R", B: i16[8, 8] @ "S0R", C: i16[8, 8] @ "S1R") {
  C[:, :] = matmul(A, B);
}
)");
  auto r = check_layouts(p);
  REQUIRE_FALSE(r.ok());
  CHECK(has_code(r.diags, code::ContractionMismatch));
}

TEST_CASE("declared output layout is authoritative") {
  Program p = testutil::parse_ok(R"(
task t[2](A: i16[8, 8] @ "S0R", B: i16[8, 8], C: i16[8, 8] @ "RS0") {
  C[:, :] = matmul(A, B);
}
)");
  auto r = check_layouts(p);
  REQUIRE_FALSE(r.ok());
  CHECK(has_code(r.diags, code::LayoutMismatch));
}

TEST_CASE("attention skeleton accepts: local contractions against sharded tiles") {
  Program p = testutil::load_corpus("attention.dato");
  auto r = check_layouts(p);
  REQUIRE_MESSAGE(r.ok(), (r.diags.empty() ? "" : render(r.diags[0])));
}

TEST_CASE("ffn variants accept") {
  for (const char* name : {"ffn_stream.dato", "ffn_memory.dato"}) {
    CAPTURE(name);
    Program p = testutil::load_corpus(name);
    auto r = check_layouts(p);
    REQUIRE_MESSAGE(r.ok(), (r.diags.empty() ? "" : render(r.diags[0])));
  }
}

TEST_CASE("per-instance data cannot be written to replicated outputs") {
  Program p = testutil::parse_ok(R"(
stream s: stream<i8[8]>[2] depth 1;
task a[2](A: i8[16] @ "S0") { s[tid(0)].put(A[:]); }
task b[2](B: i8[8]) {
  B[:] = s[tid(0)].get() + 1;
}
)");
  auto r = check_layouts(p);
  REQUIRE_FALSE(r.ok());
  CHECK(has_code(r.diags, code::LayoutMismatch));
}

TEST_CASE("put payload must match the stream element type") {
  Program p = testutil::parse_ok(R"(
stream s: stream<i8[4]> depth 1;
task a[1](A: i8[16]) { s.put(A[:]); }
)");
  auto r = check_layouts(p);
  CHECK_FALSE(r.ok());
}

TEST_CASE("mismatched tile contraction is reported") {
  Program p = testutil::parse_ok(R"(
stream s: stream<i16[4, 8]> depth 1;
task a[1](A: i16[4, 8]) { s.put(A[:, :]); }
task b[1](V: i16[4, 4], O: i16[4, 4]) {
  O[:, :] = matmul(s.get(), V);
}
)");
  auto r = check_layouts(p);
  REQUIRE_FALSE(r.ok());
  CHECK(has_code(r.diags, code::ContractionMismatch));
}

TEST_CASE("scalar consts broadcast over any operand") {
  Program p = testutil::parse_ok(R"(
task t[1](A: i16[4, 4], B: i16[4, 4]) {
  B[:, :] = max(A * 2 - 1, 0);
}
)");
  auto r = check_layouts(p);
  REQUIRE_MESSAGE(r.ok(), (r.diags.empty() ? "" : render(r.diags[0])));
}
