#pragma once

#include <filesystem>
#include <map>
#include <string>

namespace dsscan {

// Flat "key = value" configuration file: one pair per line, '#' comments,
// blank lines ignored. Duplicate keys are an error.
std::map<std::string, std::string> parse_kv_file(const std::filesystem::path& path);
std::map<std::string, std::string> parse_kv_text(const std::string& text);

}  // namespace dsscan
