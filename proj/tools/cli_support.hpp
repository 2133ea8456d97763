#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "heun/scanner.hpp"

namespace heun::cli {

using nlohmann::json;

inline constexpr const char* kToolVersion = "heun 1.0.0";
inline constexpr int kSchemaVersion = 1;

/// Parses "RE,IM" (IM optional).
Complex parse_complex(const std::string& text);
/// Parses exactly n comma-separated reals.
std::vector<double> parse_reals(const std::string& text, std::size_t n);

json to_json(Complex z);
Complex complex_from_json(const json& j);
json to_json(const Matrix2& m);

/// Certificate H as [h11, Re h12, Im h12, h22]; null when absent.
json certificate_to_json(const UnitarizationCertificate& c);
json solution_to_json(const Solution& s);
json diagnostic_to_json(const Diagnostic& d);
json real_root_to_json(const RealRoot& r);

/// 17 significant digits, the rendering used by all text and CSV output.
std::string num(double x);

/// Lowercase hex SHA-256 of the canonical dump of `config` prefixed by the
/// command name.
std::string cache_key(const std::string& command, const json& config);

std::optional<json> cache_load(const std::filesystem::path& dir, const std::string& key);
void cache_store(const std::filesystem::path& dir, const std::string& key, const json& record);

/// Reads a flat `key = value` file and turns every key that is not already
/// present on the command line into `--key value` arguments (explicit flags
/// win). Boolean values true/false become bare flags or are dropped.
std::vector<std::string> merge_config_file(const std::string& path,
                                           const std::vector<std::string>& args);

}  // namespace heun::cli
