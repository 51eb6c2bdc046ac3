#pragma once

#include <zlib.h>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "autofhe/errors.hpp"

namespace autofhe {

using json = nlohmann::json;

inline std::uint32_t crc32_bytes(const void* data, std::size_t n) {
    return static_cast<std::uint32_t>(
        ::crc32(0L, static_cast<const Bytef*>(data), static_cast<uInt>(n)));
}

inline std::uint32_t crc32_str(const std::string& s) {
    return crc32_bytes(s.data(), s.size());
}

inline std::string crc32_hex(const std::string& s) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%08x", crc32_str(s));
    return buf;
}

// write-temp-then-rename so partially written artifacts never appear
inline void atomic_write_file(const std::filesystem::path& path, const std::string& data) {
    namespace fs = std::filesystem;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IntegrityError("cannot open for write: " + tmp.string());
        out.write(data.data(), static_cast<std::streamsize>(data.size()));
        if (!out) throw IntegrityError("short write: " + tmp.string());
    }
    fs::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput("cannot open: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline json read_json(const std::filesystem::path& path) {
    json j = json::parse(read_file(path), nullptr, false);
    if (j.is_discarded()) throw IntegrityError("malformed JSON: " + path.string());
    return j;
}

// Artifacts embed a checksum of their payload plus the hash of the producing
// config; `verify` recomputes both.
inline json seal_artifact(json payload, const std::string& config_hash) {
    json out;
    out["payload"] = std::move(payload);
    out["meta"] = {{"crc32", crc32_hex(out["payload"].dump())},
                   {"config_crc32", config_hash},
                   {"schema", 1}};
    return out;
}

inline json open_artifact(const json& artifact) {
    if (!artifact.contains("payload") || !artifact.contains("meta"))
        throw IntegrityError("artifact missing payload/meta");
    const std::string want = artifact["meta"].value("crc32", "");
    const std::string got = crc32_hex(artifact["payload"].dump());
    if (want != got)
        throw IntegrityError("artifact checksum mismatch: want " + want + " got " + got);
    return artifact["payload"];
}

}  // namespace autofhe
