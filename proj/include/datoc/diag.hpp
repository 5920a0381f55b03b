// Source locations and diagnostics shared by all passes.
#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace datoc {

struct SourceSpan {
  std::string file;
  int line = 1;  // 1-based
  int col = 1;   // 1-based
  int length = 0;

  bool valid() const { return line >= 1 && col >= 1; }
  std::string str() const {
    return file + ":" + std::to_string(line) + ":" + std::to_string(col);
  }
};

enum class Severity { Error, Warning, Note };

// Stable diagnostic codes. These strings are part of the CLI contract and
// must not be renamed.
namespace code {
inline constexpr const char* Parse = "PARSE";
inline constexpr const char* Invalid = "INVALID";
inline constexpr const char* Deadlock = "DEADLOCK";
inline constexpr const char* TokenLeak = "TOKEN_LEAK";
inline constexpr const char* FutureReuse = "FUTURE_REUSE";
inline constexpr const char* ContractionMismatch = "CONTRACTION_MISMATCH";
inline constexpr const char* PendingEffect = "PENDING_EFFECT";
inline constexpr const char* LayoutMismatch = "LAYOUT_MISMATCH";
inline constexpr const char* AxisConflict = "AXIS_CONFLICT";
inline constexpr const char* NonAffineIndex = "NONAFFINE_INDEX";
inline constexpr const char* MultiEndpoint = "MULTI_ENDPOINT";
inline constexpr const char* StreamIndexOob = "STREAM_INDEX_OOB";
}  // namespace code

struct Diagnostic {
  Severity severity = Severity::Error;
  std::string code;
  SourceSpan span;
  std::string message;
  std::vector<std::string> notes;

  static Diagnostic error(std::string code, SourceSpan span, std::string msg) {
    return Diagnostic{Severity::Error, std::move(code), std::move(span), std::move(msg), {}};
  }
};

using Diagnostics = std::vector<Diagnostic>;

inline bool has_error(const Diagnostics& ds) {
  for (const auto& d : ds)
    if (d.severity == Severity::Error) return true;
  return false;
}

inline bool has_code(const Diagnostics& ds, const std::string& c) {
  for (const auto& d : ds)
    if (d.code == c) return true;
  return false;
}

nlohmann::ordered_json to_json(const SourceSpan& s);
nlohmann::ordered_json to_json(const Diagnostic& d);
nlohmann::ordered_json to_json(const Diagnostics& ds);
std::string render(const Diagnostic& d);

}  // namespace datoc
