#include "datoc/diag.hpp"

#include <sstream>

namespace datoc {

using nlohmann::ordered_json;

ordered_json to_json(const SourceSpan& s) {
  return ordered_json{{"file", s.file}, {"line", s.line}, {"col", s.col}, {"length", s.length}};
}

static const char* severity_name(Severity s) {
  switch (s) {
    case Severity::Error: return "error";
    case Severity::Warning: return "warning";
    case Severity::Note: return "note";
  }
  return "error";
}

ordered_json to_json(const Diagnostic& d) {
  ordered_json j;
  j["severity"] = severity_name(d.severity);
  j["code"] = d.code;
  j["span"] = to_json(d.span);
  j["message"] = d.message;
  j["notes"] = d.notes;
  return j;
}

ordered_json to_json(const Diagnostics& ds) {
  ordered_json arr = ordered_json::array();
  for (const auto& d : ds) arr.push_back(to_json(d));
  return arr;
}

std::string render(const Diagnostic& d) {
  std::ostringstream os;
  os << d.span.str() << ": " << severity_name(d.severity) << " [" << d.code << "] " << d.message;
  for (const auto& n : d.notes) os << "\n  note: " << n;
  return os.str();
}

}  // namespace datoc
