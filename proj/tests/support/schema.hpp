// Minimal structural JSON-schema checker: type / properties / required /
// items / enum. Enough to validate the shipped report schemas.
#pragma once

#include <string>

#include <json.hpp>

namespace testutil {

bool schema_valid(const nlohmann::json& schema, const nlohmann::json& value,
                  std::string* why = nullptr, const std::string& path = "$");

// Loads a schema from the repository's schemas/ directory.
nlohmann::json load_schema(const std::string& name);

}  // namespace testutil
