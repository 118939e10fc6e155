#include "dsscan/kv_config.hpp"

#include <fstream>
#include <sstream>

#include "dsscan/errors.hpp"

namespace dsscan {

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

std::map<std::string, std::string> parse_kv_text(const std::string& text) {
    std::map<std::string, std::string> out;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        std::string trimmed = trim(line);
        if (trimmed.empty()) continue;
        auto eq = trimmed.find('=');
        if (eq == std::string::npos) {
            std::ostringstream msg;
            msg << "config line " << lineno << ": expected key = value";
            throw ConfigError(msg.str());
        }
        std::string key = trim(trimmed.substr(0, eq));
        std::string value = trim(trimmed.substr(eq + 1));
        if (key.empty()) {
            std::ostringstream msg;
            msg << "config line " << lineno << ": empty key";
            throw ConfigError(msg.str());
        }
        if (!out.emplace(key, value).second) {
            std::ostringstream msg;
            msg << "config line " << lineno << ": duplicate key '" << key << "'";
            throw ConfigError(msg.str());
        }
    }
    return out;
}

std::map<std::string, std::string> parse_kv_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_kv_text(buf.str());
}

}  // namespace dsscan
