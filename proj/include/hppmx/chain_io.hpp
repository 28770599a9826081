#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include <json.hpp>

#include "hppmx/sampler.hpp"

namespace hppmx {

inline constexpr const char* kChainFormat = "hppmx-chain";
inline constexpr int kChainVersion = 1;

nlohmann::json to_json(const ModelState& s);
ModelState state_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PriorConfig& p);
PriorConfig prior_from_json(const nlohmann::json& j);
nlohmann::json to_json(const McmcConfig& c);
McmcConfig mcmc_from_json(const nlohmann::json& j);

/// Newline-delimited chain: a header object (format, version, seed, configs,
/// subject metadata, acceptance rates) followed by one object per stored
/// iterate. Labels are written 1-based.
void write_chain(std::ostream& out, const Chain& chain);
Chain read_chain(std::istream& in, const std::string& source = "chain");

void save_chain(const std::filesystem::path& path, const Chain& chain);
Chain load_chain(const std::filesystem::path& path);

/// Writes `contents` to a temporary sibling and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace hppmx
