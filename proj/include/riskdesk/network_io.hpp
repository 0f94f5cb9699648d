// Network interchange file (JSON). Schema: docs/formats.md.
#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "riskdesk/pgm.hpp"

namespace riskdesk::pgm {

inline constexpr const char* kNetworkFormat = "riskdesk.network";
inline constexpr int kNetworkFormatVersion = 1;

nlohmann::ordered_json network_to_json(const BayesNet& net);
BayesNet network_from_json(const nlohmann::json& doc);

/// Canonical text: two-space indentation, trailing newline.
std::string dump_network(const BayesNet& net);
BayesNet parse_network(const std::string& text);

BayesNet read_network_file(const std::filesystem::path& path);
void write_network_file(const std::filesystem::path& path, const BayesNet& net);

}  // namespace riskdesk::pgm
