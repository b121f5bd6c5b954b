#include "tvc/manifest.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "tvc/errors.hpp"

namespace tvc {

uint64_t fnv1a64(const void* data, size_t len) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    uint64_t hash = 0xcbf29ce484222325ULL;
    for (size_t i = 0; i < len; ++i) {
        hash ^= bytes[i];
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

uint64_t fnv1a64(const std::string& text) { return fnv1a64(text.data(), text.size()); }

std::string hash_hex(uint64_t hash) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

std::string hash_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open for hashing: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return hash_hex(fnv1a64(ss.str()));
}

void write_manifest(const std::string& dir, const std::string& config_hash,
                    const std::vector<std::string>& files) {
    std::vector<std::string> sorted(files);
    std::sort(sorted.begin(), sorted.end());
    nlohmann::ordered_json j;
    j["config_hash"] = config_hash;
    nlohmann::ordered_json entries = nlohmann::ordered_json::object();
    for (const std::string& f : sorted) entries[f] = hash_file(dir + "/" + f);
    j["files"] = entries;
    std::ofstream out(dir + "/manifest.json");
    if (!out) throw InputError("cannot write manifest in: " + dir);
    out << j.dump(2) << '\n';
    if (!out) throw InputError("manifest write failed in: " + dir);
}

void verify_manifest(const std::string& dir) {
    std::ifstream in(dir + "/manifest.json");
    if (!in) throw InputError("missing manifest: " + dir + "/manifest.json");
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.contains("files")) {
        throw InputError("malformed manifest: " + dir + "/manifest.json");
    }
    for (const auto& [name, expected] : j.at("files").items()) {
        std::string actual = hash_file(dir + "/" + name);
        if (actual != expected.get<std::string>()) {
            throw InputError("manifest hash mismatch for: " + name);
        }
    }
}

}  // namespace tvc
