#pragma once

#include <string>

#include "skelact/model.hpp"

namespace skelact {

// Flat `key = value` text with '#' comments. Serialization is canonical
// (fixed key order, full-precision numbers) so that round-trips are exact.
std::string serialize_config(const ModelConfig& cfg);
ModelConfig parse_config_text(const std::string& text);
ModelConfig load_config_file(const std::string& path);

}  // namespace skelact
