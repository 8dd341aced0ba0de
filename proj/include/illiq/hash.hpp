#pragma once

#include "illiq/model.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <string_view>

namespace illiq {

/// Lower-case hex SHA-256 of raw bytes.
std::string sha256_hex(std::string_view bytes);

/// SHA-256 of the compact serialization (object keys sorted).
std::string json_hash(const nlohmann::json& j);

std::string game_hash(const GameSpec& game);
std::string grid_hash(const GridSpec& grid);

}  // namespace illiq
