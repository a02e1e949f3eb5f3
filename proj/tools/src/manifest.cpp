#include <cstdio>
#include <fstream>

#include <openssl/evp.h>

#include "levyavg/cli.hpp"
#include "levyavg/error.hpp"

namespace levyavg::cli {

std::string canonical_json(const nlohmann::json& doc) { return doc.dump(); }

std::string git_blob_hash(const std::string& content) {
  std::string blob = "blob " + std::to_string(content.size());
  blob.push_back('\0');
  blob += content;
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(blob.data(), blob.size(), digest, &len, EVP_sha1(), nullptr) != 1) {
    throw Error(ErrorCode::kNumericError, "SHA-1 digest failed");
  }
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

std::string config_hash(const nlohmann::json& config) { return git_blob_hash(canonical_json(config)); }

nlohmann::json RunManifest::to_json() const {
  return {{"subcommand", subcommand},
          {"config", config},
          {"config_hash", config_hash},
          {"seed", seed},
          {"tool_version", tool_version},
          {"started_at", started_at},
          {"finished_at", finished_at},
          {"output_dir", output_dir.string()},
          {"outputs", outputs},
          {"frozen_runs", frozen_runs},
          {"exit_code", exit_code}};
}

void cache_fbar(const std::filesystem::path& file, const AveragedCoefficient& table) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  table.write_csv(file);
}

AveragedCoefficient load_fbar(const std::filesystem::path& file) {
  if (!std::filesystem::exists(file)) {
    throw Error(ErrorCode::kStaleCache, "no f-bar table at " + file.string() + "; run `levyavg average` to fit one");
  }
  return AveragedCoefficient::read_csv(file);
}

}  // namespace levyavg::cli
