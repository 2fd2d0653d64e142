#include "lexsum/manifest.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

#include "lexsum/common.hpp"

namespace lexsum::manifest {
namespace {

struct DigestContext {
  DigestContext() : ctx(EVP_MD_CTX_new()) {
    if (ctx == nullptr || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
      throw Error("cli", "sha256 initialisation failed");
    }
  }
  ~DigestContext() { EVP_MD_CTX_free(ctx); }
  DigestContext(const DigestContext&) = delete;
  DigestContext& operator=(const DigestContext&) = delete;

  void update(const void* data, std::size_t size) {
    if (EVP_DigestUpdate(ctx, data, size) != 1) throw Error("cli", "sha256 update failed");
  }

  std::string hex() {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx, digest, &len) != 1) throw Error("cli", "sha256 final failed");
    std::ostringstream out;
    for (unsigned int i = 0; i < len; ++i) {
      out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
    }
    return out.str();
  }

  EVP_MD_CTX* ctx;
};

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  DigestContext ctx;
  ctx.update(bytes.data(), bytes.size());
  return ctx.hex();
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cli", "cannot read '" + path.string() + "' for hashing");
  DigestContext ctx;
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) ctx.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return ctx.hex();
}

std::filesystem::path manifest_path_for(const std::filesystem::path& output) {
  return std::filesystem::path(output.string() + ".manifest.json");
}

nlohmann::ordered_json RunManifest::to_json() const {
  nlohmann::ordered_json j;
  j["schema_version"] = kManifestVersion;
  j["subcommand"] = subcommand;
  j["argv"] = argv;
  j["config"] = config;
  j["seed"] = seed ? nlohmann::ordered_json(*seed) : nlohmann::ordered_json(nullptr);
  j["tool_version"] = tool_version;
  j["inputs"] = input_digests;
  j["outputs"] = output_digests;
  j["diagnostics"] = diagnostics;
  return j;
}

RunManifest RunManifest::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error("cli", "manifest is not a JSON object");
  const int version = j.value("schema_version", 0);
  if (version < kManifestVersion - 1 || version > kManifestVersion) {
    throw Error("cli", "unsupported manifest schema_version " + std::to_string(version));
  }
  RunManifest m;
  try {
    m.subcommand = j.at("subcommand").get<std::string>();
    m.argv = j.at("argv").get<std::vector<std::string>>();
    m.config = nlohmann::ordered_json::parse(j.value("config", nlohmann::json::object()).dump());
    if (j.contains("seed") && !j["seed"].is_null()) m.seed = j["seed"].get<std::uint64_t>();
    m.tool_version = j.value("tool_version", "");
    m.input_digests = j.value("inputs", std::map<std::string, std::string>{});
    m.output_digests = j.value("outputs", std::map<std::string, std::string>{});
    if (j.contains("diagnostics")) {
      m.diagnostics = nlohmann::ordered_json::parse(j["diagnostics"].dump());
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error("cli", std::string("malformed manifest: ") + e.what());
  }
  return m;
}

void write_manifest(const RunManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cli", "cannot write manifest '" + path.string() + "'");
  out << manifest.to_json().dump(2) << '\n';
}

RunManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cli", "cannot open manifest '" + path.string() + "'");
  const auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error("cli", "manifest '" + path.string() + "' is not valid JSON");
  return RunManifest::from_json(j);
}

}  // namespace lexsum::manifest
