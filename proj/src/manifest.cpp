#include "pbs/manifest.hpp"

#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "pbs/common.hpp"

namespace pbs {

std::uint64_t fnv1a_bytes(const void* data, std::size_t len, std::uint64_t seed) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t fnv1a_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open " + path + " for hashing");
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof buf);
        h = fnv1a_bytes(buf, static_cast<std::size_t>(in.gcount()), h);
    }
    return h;
}

std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void write_manifest(const std::string& path, const RunManifest& manifest) {
    nlohmann::ordered_json j;
    j["command"] = manifest.command;
    j["version"] = manifest.version;
    j["corpus_hash"] = manifest.corpus_hash;
    j["seed"] = manifest.seed;
    nlohmann::ordered_json params = nlohmann::ordered_json::object();
    for (const auto& [k, v] : manifest.parameters) params[k] = v;
    j["parameters"] = params;
    j["outputs"] = manifest.outputs;
    std::ofstream out(path);
    if (!out) throw data_error("cannot write " + path);
    out << j.dump(2) << '\n';
}

}  // namespace pbs
