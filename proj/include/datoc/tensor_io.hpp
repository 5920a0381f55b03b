// Binary tensor container: header per tensor (name, elem kind, shape),
// payload little-endian row-major. i4 elements occupy one byte each.
#pragma once

#include <map>
#include <optional>
#include <string>

#include "datoc/value.hpp"

namespace datoc {

bool write_tensors(const std::string& path, const std::map<std::string, TensorValue>& tensors);
std::optional<std::map<std::string, TensorValue>> read_tensors(const std::string& path);

}  // namespace datoc
