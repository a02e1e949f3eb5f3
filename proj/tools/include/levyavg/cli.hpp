#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "levyavg/averaging.hpp"
#include "levyavg/levy_noise.hpp"

namespace levyavg::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitVerdict = 2;
inline constexpr int kExitUsage = 64;
inline constexpr int kExitStaleCache = 65;
inline constexpr int kExitNoInput = 66;

/// Entry point for the `levyavg` binary. Never throws.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Compact JSON with sorted keys; equal documents give equal strings.
std::string canonical_json(const nlohmann::json& doc);
/// Git blob hash (SHA-1 of "blob <n>\0" + content), lowercase hex.
std::string git_blob_hash(const std::string& content);
std::string config_hash(const nlohmann::json& config);

struct RunManifest {
  std::string subcommand;
  nlohmann::json config;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string tool_version;
  std::string started_at;
  std::string finished_at;
  std::filesystem::path output_dir;
  std::vector<std::string> outputs;  // relative to output_dir
  std::uint64_t frozen_runs = 0;
  int exit_code = 0;

  nlohmann::json to_json() const;
};

void cache_fbar(const std::filesystem::path& file, const AveragedCoefficient& table);
/// Throws StaleCache when the file is missing, malformed or from another
/// format version.
AveragedCoefficient load_fbar(const std::filesystem::path& file);

/// "drift,sigma,measure[,cutoff]" where measure is none,
/// uniform:rate:lo:hi or atoms:z@mass;z@mass; a JSON object
/// {drift, sigma, measure, cutoff} is accepted as well.
LevyTriplet parse_triplet(const std::string& text);

}  // namespace levyavg::cli
