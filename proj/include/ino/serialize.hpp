#pragma once

#include <json.hpp>

#include "ino/geometry.hpp"

namespace ino {

nlohmann::json layout_to_json(const ChannelLayout& layout);
ChannelLayout layout_from_json(const nlohmann::json& j);

}  // namespace ino
