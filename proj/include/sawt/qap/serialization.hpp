#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "sawt/qap/instance.hpp"

namespace sawt {

/// {name, n, flow, distance, coords?, seed?, p?}; matrices row-major flat arrays.
nlohmann::json to_json(const QapInstance& inst);
QapInstance instance_from_json(const nlohmann::json& j);

void save_instance(const QapInstance& inst, const std::filesystem::path& path);
QapInstance load_instance(const std::filesystem::path& path);

}  // namespace sawt
