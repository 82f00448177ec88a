#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace dexgrasp {

/// key=value configuration text: one pair per line, '#' comments, blank
/// lines ignored. Values keep their literal text; typed getters convert.
using ConfigMap = std::map<std::string, std::string>;

ConfigMap parse_config_text(const std::string& text);
ConfigMap parse_config_file(const std::filesystem::path& path);

/// Throws a config error when cfg holds a key outside `allowed`.
void validate_config_keys(const ConfigMap& cfg,
                          const std::vector<std::string>& allowed);

std::string config_get(const ConfigMap& cfg, const std::string& key,
                       const std::string& fallback);
int config_get_int(const ConfigMap& cfg, const std::string& key, int fallback);
double config_get_double(const ConfigMap& cfg, const std::string& key,
                         double fallback);
bool config_get_bool(const ConfigMap& cfg, const std::string& key,
                     bool fallback);
std::uint64_t config_get_u64(const ConfigMap& cfg, const std::string& key,
                             std::uint64_t fallback);

/// Sorted key=value lines; the hash input for run manifests.
std::string canonical_config_string(const ConfigMap& cfg);
std::uint64_t config_hash(const ConfigMap& cfg);

}  // namespace dexgrasp
