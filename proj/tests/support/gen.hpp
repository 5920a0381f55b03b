// Random program generation for property tests: stream pipelines with
// optional fan-out/fan-in diamonds, sharded GEMM tasks, and optional
// fault injection (unbalanced puts/gets, crossed waits).
#pragma once

#include <random>

#include "datoc/ast.hpp"

namespace testutil {

struct GenOptions {
  bool allow_faults = false;  // inject token bugs / potential deadlocks
  bool allow_gemm = true;
  int max_stages = 3;
};

datoc::Program random_program(std::mt19937& rng, const GenOptions& opts = {});

}  // namespace testutil
