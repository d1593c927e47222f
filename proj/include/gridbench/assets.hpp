#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "gridbench/grid_env.hpp"

namespace gridbench {

// Versioned text assets compiled into the library (layouts and prompt blocks).
// Names are paths relative to assets/, e.g. "prompts/grid_reference.txt".
// Throws std::out_of_range for unknown names.
std::string_view asset(std::string_view name);
std::vector<std::string> asset_names();

// "easy", "medium", "hard".
std::vector<std::string> shipped_layout_names();
std::string_view shipped_layout_text(std::string_view name);
std::shared_ptr<const GridMap> shipped_layout(std::string_view name);

// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);

}  // namespace gridbench
