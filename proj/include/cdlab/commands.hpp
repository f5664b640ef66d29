#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "cdlab/config.hpp"
#include "json.hpp"

namespace cdlab {

inline constexpr int kExitPass = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitFailure = 2;

inline constexpr const char* kReportSchema = "cdlab.report/1";

struct SideFile {
  std::string name;     // relative to the output directory
  std::string content;
};

/// Outcome of one command. `report` is reproducible given the config and seed;
/// wall time is kept out of it and written to run_meta.json.
struct RunReport {
  nlohmann::json report;
  std::vector<SideFile> files;
  int exit_code = kExitPass;
};

/// Commands: validate-profile, verify-cd, convexity, counterexample (with the
/// variant branching, no-map, dimension or strict) and mgh. Throws Error on
/// invalid configuration or a failed precondition.
RunReport run_command(std::string_view command, std::string_view variant, const Config& config);

/// Every key accepted in a config file.
const std::vector<std::string>& known_options();

/// Serialized report.json content (two-space indent, trailing newline).
std::string report_text(const RunReport& run);

/// Writes report.json, the side files and run_meta.json into `dir`.
void write_run(const RunReport& run, const std::filesystem::path& dir, double wall_seconds);

}  // namespace cdlab
