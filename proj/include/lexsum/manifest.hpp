#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace lexsum::manifest {

inline constexpr int kManifestVersion = 1;

/// Reproducibility record written next to every file a subcommand produces.
struct RunManifest {
  std::string subcommand;
  std::vector<std::string> argv;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  std::map<std::string, std::string> input_digests;   // path -> sha256 hex
  std::map<std::string, std::string> output_digests;  // path -> sha256 hex
  std::optional<std::uint64_t> seed;
  std::string tool_version;
  nlohmann::ordered_json diagnostics = nlohmann::ordered_json::object();

  nlohmann::ordered_json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
};

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

std::filesystem::path manifest_path_for(const std::filesystem::path& output);

void write_manifest(const RunManifest& manifest, const std::filesystem::path& path);
RunManifest read_manifest(const std::filesystem::path& path);

}  // namespace lexsum::manifest
