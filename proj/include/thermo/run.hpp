#pragma once

#include <cstdint>
#include <exception>
#include <optional>
#include <string>

#include <json.hpp>

namespace thermo {

inline constexpr const char* kVersion = "0.1.0";

struct RunOptions {
  std::optional<std::uint64_t> seed;  // overrides the config seed
  unsigned threads = 0;               // 0: hardware concurrency
  bool stable = false;                // omit wall time so reports compare byte for byte
  std::optional<std::string> emit_cloud;
};

/// Validates `config` for `command` ("pressure", "gibbs", "beta", "dimension"), runs it
/// and returns the report. Unknown keys, wrong types and bad values raise ConfigError.
nlohmann::json run_command(const std::string& command, const nlohmann::json& config, const RunOptions& options);

nlohmann::json cmd_pressure(const nlohmann::json& config, const RunOptions& options);
nlohmann::json cmd_gibbs(const nlohmann::json& config, const RunOptions& options);
nlohmann::json cmd_beta(const nlohmann::json& config, const RunOptions& options);
nlohmann::json cmd_dimension(const nlohmann::json& config, const RunOptions& options);

/// 3 for configuration errors, 2 for every other failure.
int exit_code(const std::exception& error);

/// Report serialisation shared by the CLI and the tests.
std::string dump_report(const nlohmann::json& report);

}  // namespace thermo
