#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace tvc {

// FNV-1a 64-bit content hash; the scheme every artifact manifest uses.
uint64_t fnv1a64(const void* data, size_t len);
uint64_t fnv1a64(const std::string& text);
std::string hash_hex(uint64_t hash);
std::string hash_file(const std::string& path);

// manifest.json inside `dir`: the config hash plus one content hash per
// output file (paths relative to `dir`, sorted).
void write_manifest(const std::string& dir, const std::string& config_hash,
                    const std::vector<std::string>& files);

// Re-hashes every listed file; throws InputError naming the first mismatch
// or missing file.
void verify_manifest(const std::string& dir);

}  // namespace tvc
