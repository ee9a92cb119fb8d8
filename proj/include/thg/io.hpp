#pragma once

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace thg {

/// Shortest round-trippable decimal for a double; all CSV numerics go
/// through this so repeated runs are byte-comparable.
inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// Output root: THG_OUT_DIR if set, otherwise ./out.
inline std::filesystem::path out_root() {
    const char* env = std::getenv("THG_OUT_DIR");
    return std::filesystem::path(env && *env ? env : "out");
}

class CsvWriter {
  public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header) : path_(path) {
        std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
        out_.open(path);
        if (!out_) throw std::runtime_error("csv: cannot open " + path.string());
        write_row(header);
    }

    void write_row(const std::vector<std::string>& cells) {
        for (size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << cells[i];
        }
        out_ << '\n';
    }

    const std::filesystem::path& path() const { return path_; }

  private:
    std::filesystem::path path_;
    std::ofstream out_;
};

/// FNV-1a over a byte buffer; used for checkpoint content hashes.
inline uint64_t fnv1a(const std::string& bytes) {
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

struct RunManifest {
    std::string run_id;
    uint64_t seed = 0;
    std::vector<std::pair<std::string, std::string>> config;  // complete snapshot
    std::string checkpoint_hash;
    std::string metrics_path;
    std::string status = "running";  // running | done | failed
    std::string error;

    void write(const std::filesystem::path& path) const {
        std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
        std::ofstream out(path);
        if (!out) throw std::runtime_error("manifest: cannot open " + path.string());
        out << "run_id=" << run_id << '\n';
        out << "seed=" << seed << '\n';
        out << "status=" << status << '\n';
        if (!error.empty()) out << "error=" << error << '\n';
        if (!checkpoint_hash.empty()) out << "checkpoint_hash=" << checkpoint_hash << '\n';
        if (!metrics_path.empty()) out << "metrics=" << metrics_path << '\n';
        for (auto& [k, v] : config) out << "config." << k << '=' << v << '\n';
    }
};

}  // namespace thg
