#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

namespace riskdec {

using json = nlohmann::json;

// Reads a whole file; throws Error::data on failure or invalid JSON.
json read_json_file(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);

// Write-temp-then-rename so concurrent readers never observe a torn file.
void write_text_file_atomic(const std::filesystem::path& path, const std::string& text);

// 64-bit FNV-1a of a string, hex-encoded; used for content-addressed store keys.
std::string content_hash(const std::string& text);

}  // namespace riskdec
