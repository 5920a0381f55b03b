// Textual .dato frontend: parsing and canonical pretty-printing.
#pragma once

#include <optional>
#include <string>

#include "datoc/ast.hpp"
#include "datoc/diag.hpp"

namespace datoc {

struct ParseError {
  SourceSpan span;
  std::string expected;
  std::string found;

  std::string message() const { return "expected " + expected + ", found " + found; }
  Diagnostic to_diagnostic() const {
    return Diagnostic::error(code::Parse, span, message());
  }
};

struct ParseResult {
  std::optional<Program> program;
  std::optional<ParseError> error;

  bool ok() const { return program.has_value(); }
};

ParseResult parse_program(const std::string& text, const std::string& filename = "<input>");

// Canonical text form; parse_program(emit_text(p)) is structurally equal
// to p (spans ignored). Integer expressions appear folded.
std::string emit_text(const Program& p);

}  // namespace datoc
