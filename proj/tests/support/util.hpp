#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "datoc/parser.hpp"
#include "datoc/sim.hpp"
#include "datoc/tensor_io.hpp"
#include "datoc/typecheck.hpp"
#include "datoc/validate.hpp"

namespace testutil {

inline std::string corpus_path(const std::string& name) {
  return std::string(DATOC_SOURCE_DIR) + "/corpus/" + name;
}

inline std::string source_path(const std::string& rel) {
  return std::string(DATOC_SOURCE_DIR) + "/" + rel;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// Parses a corpus file; aborts the test on failure.
inline datoc::Program load_corpus(const std::string& name) {
  auto r = datoc::parse_program(read_file(corpus_path(name)), name);
  if (!r.ok()) throw std::runtime_error("parse failed: " + name + ": " + r.error->message());
  return std::move(*r.program);
}

inline datoc::Program parse_ok(const std::string& text) {
  auto r = datoc::parse_program(text, "<test>");
  if (!r.ok())
    throw std::runtime_error("parse failed at " + r.error->span.str() + ": " +
                             r.error->message());
  return std::move(*r.program);
}

}  // namespace testutil
