#pragma once

#include <string>

#include "json.hpp"

namespace floodgnn {

/// Compact JSON dump with every floating-point number written as %.17g, object
/// keys in sorted order (nlohmann's default map). Output is byte-stable.
std::string dump_json(const nlohmann::json& j);

}  // namespace floodgnn
