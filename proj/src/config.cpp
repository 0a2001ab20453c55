#include "cpwtnet/config.hpp"

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cpwtnet/frame.hpp"

namespace cpwtnet {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::string strip_comment(const std::string& line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') quoted = !quoted;
        if (line[i] == '#' && !quoted) return line.substr(0, i);
    }
    return line;
}

double to_double(const std::string& text, const std::string& what) {
    const std::string t = trim(text);
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(t.c_str(), &end);
    if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE) {
        throw ConfigError(what + ": expected a number, got '" + text + "'");
    }
    return v;
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(const std::string& text, const std::string& origin) {
    KeyValueConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::string section;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        const std::string body = trim(strip_comment(line));
        if (body.empty()) continue;
        const std::string where = origin + ":" + std::to_string(number);
        if (body.front() == '[') {
            if (body.back() != ']' || body.size() < 3) {
                throw ConfigError(where + ": malformed section header");
            }
            section = trim(body.substr(1, body.size() - 2));
            continue;
        }
        const auto eq = body.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(where + ": expected key = value");
        }
        const std::string key = trim(body.substr(0, eq));
        std::string value = trim(body.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError(where + ": empty key");
        }
        if (!value.empty() && value.front() == '"') {
            if (value.size() < 2 || value.back() != '"') {
                throw ConfigError(where + ": unterminated string");
            }
            value = value.substr(1, value.size() - 2);
        }
        cfg.values_[section.empty() ? key : section + "." + key] = value;
    }
    return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read config file: " + path.string());
    }
    std::ostringstream text;
    text << in.rdbuf();
    return parse(text.str(), path.string());
}

std::optional<std::string> KeyValueConfig::get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
    return get(key).value_or(fallback);
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
    const auto v = get(key);
    return v ? to_double(*v, key) : fallback;
}

long long KeyValueConfig::get_int(const std::string& key, long long fallback) const {
    const auto v = get(key);
    if (!v) return fallback;
    const std::string t = trim(*v);
    char* end = nullptr;
    errno = 0;
    const long long n = std::strtoll(t.c_str(), &end, 10);
    if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE) {
        throw ConfigError(key + ": expected an integer, got '" + *v + "'");
    }
    return n;
}

std::vector<double> KeyValueConfig::get_doubles(const std::string& key) const {
    const auto v = get(key);
    return v ? parse_double_list(*v, key) : std::vector<double>{};
}

std::vector<double> parse_double_list(const std::string& text, const std::string& what) {
    std::vector<double> out;
    std::istringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) out.push_back(to_double(item, what));
    return out;
}

}  // namespace cpwtnet
