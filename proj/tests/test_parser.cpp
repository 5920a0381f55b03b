#include <doctest.h>

#include "datoc/parser.hpp"
#include "support/util.hpp"

using namespace datoc;

TEST_CASE("producer/consumer corpus parses to the expected structure") {
  Program p = testutil::load_corpus("producer_consumer.dato");
  REQUIRE(p.streams.size() == 1);
  CHECK(p.streams[0].name == "Z");
  CHECK(p.streams[0].grid == std::vector<std::int64_t>{2});
  CHECK(p.streams[0].type.depth == 2);
  CHECK(p.streams[0].type.elem.shape == std::vector<std::int64_t>{8});
  REQUIRE(p.tasks.size() == 2);
  CHECK(p.tasks[0].mapping == std::vector<std::int64_t>{2});
  REQUIRE(p.tasks[0].params.size() == 1);
  CHECK(p.tasks[0].params[0].layout.str() == "S0");
  CHECK(p.tasks[1].body.size() == 1);
}

TEST_CASE("empty input yields an empty program") {
  auto r = parse_program("", "<empty>");
  REQUIRE(r.ok());
  CHECK(r.program->tasks.empty());
  CHECK(r.program->streams.empty());
}

TEST_CASE("parse errors carry a useful span") {
  auto r = parse_program("task t[2](A: i8[16] @ S0) { }", "<bad>");
  REQUIRE_FALSE(r.ok());
  CHECK(r.error->span.line == 1);
  CHECK(r.error->span.col >= 21);
  CHECK(r.error->expected.find("layout") != std::string::npos);
}

TEST_CASE("let constants fold in types, grids and bounds") {
  Program p = testutil::parse_ok(R"(
let A = 4;
let B = A * 2;
stream s: stream<i16[B]>[A / 2] depth A pack 2;
task t[A - 2]() {
  for i in range(B - 6) {
    s[tid(0)].put(0);
  }
}
)");
  CHECK(p.streams[0].type.elem.shape == std::vector<std::int64_t>{8});
  CHECK(p.streams[0].grid == std::vector<std::int64_t>{2});
  CHECK(p.streams[0].type.depth == 4);
  CHECK(p.streams[0].type.pack == 2);
  CHECK(p.tasks[0].mapping == std::vector<std::int64_t>{2});
  CHECK(p.tasks[0].body[0]->bound == 2);
}

TEST_CASE("round-trip: corpus programs") {
  for (const char* name :
       {"producer_consumer.dato", "gemm.dato", "gemm_large.dato", "deadlock.dato",
        "token_leak.dato", "ffn_stream.dato", "ffn_memory.dato", "attention.dato"}) {
    CAPTURE(name);
    Program p = testutil::load_corpus(name);
    std::string text = emit_text(p);
    auto r = parse_program(text, "round");
    REQUIRE_MESSAGE(r.ok(), text);
    CHECK(equal(p, *r.program));
    // Emission is a fixpoint.
    CHECK(emit_text(*r.program) == text);
  }
}

TEST_CASE("round-trip: nested loops and slices") {
  Program p = testutil::parse_ok(R"(
stream s: stream<i16[4, 8]> depth 3;
task t[2, 2](A: i16[8, 8] @ "RS1", B: i16[8, 8]) {
  for i in range(2) {
    for j in range(2) {
      local x = A[i * 4:i * 4 + 4, :];
      s.put(x + tid(1) * (1 - 2));
    }
  }
  B[0:4, 4:8] = reduce("max", 0, s.get()) * 3 - 1;
}
)");
  std::string text = emit_text(p);
  auto r = parse_program(text, "round");
  REQUIRE_MESSAGE(r.ok(), text);
  CHECK(equal(p, *r.program));
  CHECK(emit_text(*r.program) == text);
}

TEST_CASE("await round-trips") {
  Program p = testutil::parse_ok(R"(
stream s: stream<i8> depth 1;
task t[1](B: i8) {
  B = await(s.get()) + 1;
}
)");
  std::string text = emit_text(p);
  auto r = parse_program(text, "round");
  REQUIRE(r.ok());
  CHECK(equal(p, *r.program));
}

TEST_CASE("keywords cannot be identifiers") {
  auto r = parse_program("let task = 3;", "<kw>");
  CHECK_FALSE(r.ok());
}
