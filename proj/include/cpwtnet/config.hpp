#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace cpwtnet {

/// Flat `[section]` / `key = value` file. Values may be bare or double-quoted;
/// `#` starts a comment outside quotes. Keys are addressed as "section.key".
class KeyValueConfig {
public:
    static KeyValueConfig parse(const std::string& text, const std::string& origin = "<string>");
    static KeyValueConfig load(const std::filesystem::path& path);

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    std::optional<std::string> get(const std::string& key) const;

    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    long long get_int(const std::string& key, long long fallback) const;
    /// Comma-separated reals.
    std::vector<double> get_doubles(const std::string& key) const;

    void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
    const std::map<std::string, std::string>& entries() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

std::vector<double> parse_double_list(const std::string& text, const std::string& what);

}  // namespace cpwtnet
