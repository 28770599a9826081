#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "hppmx/model.hpp"
#include "hppmx/sampler.hpp"

namespace hppmx {

/// Everything a run needs besides its input files.
struct RunConfig {
  PriorConfig prior;
  McmcConfig mcmc;
  IngestOptions ingest;
};

/// INI-style configuration with sections [prior], [similarity], [mcmc] and
/// [data]. Unknown sections or keys raise ValidationError so that typos do
/// not silently fall back to defaults.
RunConfig parse_config(std::istream& in, const std::string& source = "config");
RunConfig load_config(const std::filesystem::path& path);

/// Writes every setting, defaults included, in the format parse_config reads.
void write_config(std::ostream& out, const RunConfig& cfg);

}  // namespace hppmx
