#include <doctest.h>

#include "datoc/validate.hpp"
#include "support/util.hpp"

using namespace datoc;

TEST_CASE("corpus programs validate cleanly") {
  for (const char* name :
       {"producer_consumer.dato", "gemm.dato", "gemm_large.dato", "deadlock.dato",
        "token_leak.dato", "ffn_stream.dato", "ffn_memory.dato", "attention.dato"}) {
    CAPTURE(name);
    Program p = testutil::load_corpus(name);
    auto ds = validate_program(p);
    CHECK_FALSE(has_error(ds));
  }
}

TEST_CASE("divisibility violations are reported") {
  Program p = testutil::parse_ok(R"(
task t[2](A: i8[15] @ "S0") {
  A[:] = A + 1;
}
)");
  auto ds = validate_program(p);
  REQUIRE(has_error(ds));
  bool found = false;
  for (const auto& d : ds) found = found || d.message.find("not divisible") != std::string::npos;
  CHECK(found);
}

TEST_CASE("device axis out of range is reported") {
  Program p = testutil::parse_ok(R"(
task t[2, 2](A: i8[16] @ "S3") {
  A[:] = A + 1;
}
)");
  auto ds = validate_program(p);
  REQUIRE(has_error(ds));
  bool found = false;
  for (const auto& d : ds) found = found || d.message.find("out of range") != std::string::npos;
  CHECK(found);
}

TEST_CASE("duplicate device axes within one parameter conflict") {
  Program p = testutil::parse_ok(R"(
task t[2](A: i8[16, 16] @ "S0S0") {
  A[:, :] = A + 1;
}
)");
  auto ds = validate_program(p);
  CHECK(has_code(ds, code::AxisConflict));
}

TEST_CASE("layout rank must match tensor rank") {
  Program p = testutil::parse_ok(R"(
task t[2](A: i8[16, 16] @ "S0") {
  A[:, :] = A + 1;
}
)");
  auto ds = validate_program(p);
  CHECK(has_code(ds, code::LayoutMismatch));
}

TEST_CASE("non-affine stream indices are rejected") {
  Program p = testutil::parse_ok(R"(
stream s: stream<i8>[4] depth 1;
task t[2]() {
  for i in range(2) {
    s[i * tid(0)].put(0);
  }
}
)");
  auto ds = validate_program(p);
  CHECK(has_code(ds, code::NonAffineIndex));
}

TEST_CASE("constant stream indices are bounds-checked") {
  Program p = testutil::parse_ok(R"(
stream s: stream<i8>[2] depth 1;
task t[1]() {
  s[5].put(0);
}
)");
  auto ds = validate_program(p);
  CHECK(has_code(ds, code::StreamIndexOob));
}

TEST_CASE("pack must divide the transfer element count") {
  Program p = testutil::parse_ok(R"(
stream s: stream<i8[6]> depth 1 pack 4;
task t[1]() {
  s.put(0);
}
)");
  auto ds = validate_program(p);
  CHECK(has_error(ds));
}

TEST_CASE("nested allreduce is rejected") {
  Program p = testutil::parse_ok(R"(
task t[2](A: i16[8, 8] @ "S0R", C: i16[8, 8] @ "S0R") {
  local x = matmul(A, A);
  C[:, :] = allreduce(x, "+") + 1;
}
)");
  auto ds = validate_program(p);
  CHECK(has_error(ds));
}

TEST_CASE("buffers shared across tasks need one writer and no cycles") {
  Program two_writers = testutil::parse_ok(R"(
task a[1](H: i8[4]) { H[:] = H + 1; }
task b[1](H: i8[4]) { H[:] = H + 2; }
)");
  CHECK(has_error(validate_program(two_writers)));

  Program cyclic = testutil::parse_ok(R"(
task a[1](X: i8[4], Y: i8[4]) { Y[:] = X + 1; }
task b[1](Y: i8[4], X: i8[4]) { X[:] = Y + 1; }
)");
  CHECK(has_error(validate_program(cyclic)));
}
