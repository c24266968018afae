#pragma once

// Run manifests ("key = value" lines) and git-style content hashes that tie
// a trace back to the exact graph and dataset files it was produced from.

#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <openssl/evp.h>

#include "kwsa/error.hpp"

namespace kwsa {

/// Hex SHA-1 of "blob <size>\0<content>", i.e. what `git hash-object` prints.
inline std::string git_blob_hash(std::string_view content) {
  const std::string header = "blob " + std::to_string(content.size()) + '\0';
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx) throw Error("sha1: cannot allocate digest context");
  const bool ok = EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, header.data(), header.size()) == 1 &&
                  EVP_DigestUpdate(ctx, content.data(), content.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, digest, &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw Error("sha1: digest failed");
  std::string hex;
  hex.reserve(2 * len);
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

/// Hash over a named file set: blob hash of the "<blob-hash> <name>" listing,
/// in the order given.
inline std::string file_set_hash(const std::vector<std::pair<std::string, std::string>>& named_contents) {
  std::string listing;
  for (const auto& [name, content] : named_contents) listing += git_blob_hash(content) + ' ' + name + '\n';
  return git_blob_hash(listing);
}

/// Ordered key/value record.
class Manifest {
 public:
  void set(const std::string& key, const std::string& value) {
    for (auto& [k, v] : entries_)
      if (k == key) {
        v = value;
        return;
      }
    entries_.emplace_back(key, value);
  }

  std::optional<std::string> get(const std::string& key) const {
    for (const auto& [k, v] : entries_)
      if (k == key) return v;
    return std::nullopt;
  }

  const std::vector<std::pair<std::string, std::string>>& entries() const noexcept { return entries_; }

  std::string to_text() const {
    std::ostringstream os;
    for (const auto& [k, v] : entries_) os << k << " = " << v << '\n';
    return os.str();
  }

  static Manifest parse(const std::string& text) {
    Manifest m;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      const auto eq = line.find(" = ");
      if (eq == std::string::npos) throw ParseError("manifest: expected \"key = value\": " + line);
      m.set(line.substr(0, eq), line.substr(eq + 3));
    }
    return m;
  }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

}  // namespace kwsa
