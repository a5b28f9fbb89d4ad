#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "otdenoise/errors.hpp"

namespace otdenoise {

/// Malformed or incomplete experiment configuration (CLI exit code 2).
class ConfigError : public Error {
public:
  using Error::Error;
};

/// FNV-1a over the canonical (key-sorted) dump; stable across runs.
std::uint64_t config_hash(const nlohmann::json& config);

//! Run one experiment described by a JSON config with a "kind"
//! discriminator and mandatory "seed". Artifacts plus a manifest.json are
//! written under out_dir; the returned list names every file written.
//! Outputs are byte-deterministic given the config, whatever the thread
//! count.
std::vector<std::string> run_experiment(const nlohmann::json& config,
                                        const std::string& out_dir, int threads = 1);

/// Kinds accepted by run_experiment.
const std::vector<std::string>& experiment_kinds();

}  // namespace otdenoise
