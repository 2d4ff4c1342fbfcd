#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace pbs {

inline constexpr const char* code_version = "pbs 0.1.0";

std::uint64_t fnv1a_file(const std::string& path);
std::uint64_t fnv1a_bytes(const void* data, std::size_t len, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hash_hex(std::uint64_t h);

// Reproducibility record written next to every output file. Deliberately free
// of wall-clock data so identical invocations produce identical bytes.
struct RunManifest {
    std::string command;
    std::map<std::string, std::string> parameters;
    std::string corpus_hash;
    std::string version = code_version;
    std::uint64_t seed = 0;
    std::vector<std::string> outputs;
};

void write_manifest(const std::string& path, const RunManifest& manifest);

}  // namespace pbs
