#pragma once

#include <string>

#include <nlohmann/json.hpp>

namespace blift {

/// Executes one pipeline stage ("simulate", "estimate", "project", "report")
/// against a resolved JSON config. Writes all artifacts under the config's
/// out_dir (atomic writes, no timestamps) and returns a summary document.
/// Validation failures name the offending config field.
nlohmann::ordered_json run_command(const std::string& command, const nlohmann::json& config);

/// 64-bit FNV-1a of the canonical (sorted-key) config serialization.
std::string config_hash(const nlohmann::json& config);

}  // namespace blift
