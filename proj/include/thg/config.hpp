#pragma once

#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace thg {

/// Flat key=value configuration. `#` starts a comment, blank lines are
/// skipped, later assignments win (file values first, then CLI overrides).
/// Consumers list their known keys; anything else is an error, not a
/// warning.
class Config {
  public:
    void set(const std::string& key, const std::string& value) {
        for (auto& [k, v] : entries_)
            if (k == key) {
                v = value;
                return;
            }
        entries_.emplace_back(key, value);
    }

    bool has(const std::string& key) const {
        for (auto& [k, v] : entries_)
            if (k == key) return true;
        return false;
    }

    const std::string& get(const std::string& key) const {
        for (auto& [k, v] : entries_)
            if (k == key) return v;
        throw std::out_of_range("config: missing key " + key);
    }

    std::string get_or(const std::string& key, const std::string& fallback) const {
        return has(key) ? get(key) : fallback;
    }

    int get_int(const std::string& key) const {
        try {
            size_t pos = 0;
            int v = std::stoi(get(key), &pos);
            if (pos != get(key).size()) throw std::invalid_argument("");
            return v;
        } catch (const std::out_of_range&) {
            throw;
        } catch (...) {
            throw std::invalid_argument("config: key " + key + " is not an integer: " + get(key));
        }
    }
    int get_int_or(const std::string& key, int fallback) const { return has(key) ? get_int(key) : fallback; }

    long long get_ll(const std::string& key) const {
        try {
            size_t pos = 0;
            long long v = std::stoll(get(key), &pos);
            if (pos != get(key).size()) throw std::invalid_argument("");
            return v;
        } catch (const std::out_of_range&) {
            throw;
        } catch (...) {
            throw std::invalid_argument("config: key " + key + " is not an integer: " + get(key));
        }
    }

    double get_double(const std::string& key) const {
        try {
            size_t pos = 0;
            double v = std::stod(get(key), &pos);
            if (pos != get(key).size()) throw std::invalid_argument("");
            return v;
        } catch (const std::out_of_range&) {
            throw;
        } catch (...) {
            throw std::invalid_argument("config: key " + key + " is not a number: " + get(key));
        }
    }
    double get_double_or(const std::string& key, double fallback) const {
        return has(key) ? get_double(key) : fallback;
    }

    /// Rejects any key outside the given set, naming the offender.
    void require_known(const std::set<std::string>& known) const {
        for (auto& [k, v] : entries_)
            if (!known.count(k)) throw std::invalid_argument("config: unknown key " + k);
    }

    const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  private:
    std::vector<std::pair<std::string, std::string>> entries_;
};

inline std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline void parse_config_line(Config& cfg, const std::string& raw, int lineno) {
    std::string line = raw;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) return;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
        throw std::invalid_argument("config: line " + std::to_string(lineno) + " is not key=value: " + raw);
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty())
        throw std::invalid_argument("config: empty key on line " + std::to_string(lineno));
    cfg.set(key, value);
}

inline Config parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    Config cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) parse_config_line(cfg, line, ++lineno);
    return cfg;
}

}  // namespace thg
