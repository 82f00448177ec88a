#include "dexgrasp/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "dexgrasp/errors.hpp"
#include "dexgrasp/network.hpp"  // fnv1a_hash

namespace dexgrasp {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

ConfigMap parse_config_text(const std::string& text) {
  ConfigMap cfg;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, Errc::config,
            "config line " + std::to_string(lineno) + " is not key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    require(!key.empty(), Errc::config,
            "config line " + std::to_string(lineno) + " has an empty key");
    require(!cfg.count(key), Errc::config, "duplicate config key '" + key + "'");
    cfg[key] = value;
  }
  return cfg;
}

ConfigMap parse_config_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  require(is.good(), Errc::config, "cannot open config '" + path.string() + "'");
  std::stringstream buf;
  buf << is.rdbuf();
  return parse_config_text(buf.str());
}

void validate_config_keys(const ConfigMap& cfg,
                          const std::vector<std::string>& allowed) {
  for (const auto& [key, value] : cfg) {
    (void)value;
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      fail(Errc::config, "unknown config key '" + key + "'");
  }
}

std::string config_get(const ConfigMap& cfg, const std::string& key,
                       const std::string& fallback) {
  const auto it = cfg.find(key);
  return it == cfg.end() ? fallback : it->second;
}

int config_get_int(const ConfigMap& cfg, const std::string& key, int fallback) {
  const auto it = cfg.find(key);
  if (it == cfg.end()) return fallback;
  try {
    return std::stoi(it->second);
  } catch (const std::exception&) {
    fail(Errc::config, "config key '" + key + "' is not an integer");
  }
}

double config_get_double(const ConfigMap& cfg, const std::string& key,
                         double fallback) {
  const auto it = cfg.find(key);
  if (it == cfg.end()) return fallback;
  try {
    return std::stod(it->second);
  } catch (const std::exception&) {
    fail(Errc::config, "config key '" + key + "' is not a number");
  }
}

bool config_get_bool(const ConfigMap& cfg, const std::string& key,
                     bool fallback) {
  const auto it = cfg.find(key);
  if (it == cfg.end()) return fallback;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  fail(Errc::config, "config key '" + key + "' is not a boolean");
}

std::uint64_t config_get_u64(const ConfigMap& cfg, const std::string& key,
                             std::uint64_t fallback) {
  const auto it = cfg.find(key);
  if (it == cfg.end()) return fallback;
  try {
    return std::stoull(it->second);
  } catch (const std::exception&) {
    fail(Errc::config, "config key '" + key + "' is not an unsigned integer");
  }
}

std::string canonical_config_string(const ConfigMap& cfg) {
  std::string out;
  for (const auto& [key, value] : cfg) {
    out += key;
    out += '=';
    out += value;
    out += '\n';
  }
  return out;
}

std::uint64_t config_hash(const ConfigMap& cfg) {
  return fnv1a_hash(canonical_config_string(cfg));
}

}  // namespace dexgrasp
