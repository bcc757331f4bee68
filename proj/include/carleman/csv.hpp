#pragma once

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "carleman/errors.hpp"
#include "carleman/version.hpp"

namespace carleman::io {

/// FNV-1a, used to stamp artifacts with a config fingerprint. Stable across
/// runs and platforms.
inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    std::ostringstream ss;
    ss << std::hex << std::setfill('0') << std::setw(16) << v;
    return ss.str();
}

/// CSV with '#'-prefixed metadata lines (tool version, config echo, config
/// hash) followed by a single column-header line. Values are written with
/// enough digits to round-trip doubles, so reruns are byte-identical.
class CsvWriter {
public:
    CsvWriter(std::ostream& out, const std::string& config_echo) : out_(&out) {
        write_preamble(config_echo);
    }

    CsvWriter(const std::string& path, const std::string& config_echo) {
        file_.open(path, std::ios::trunc);
        if (!file_) throw ConfigError("CsvWriter: cannot open output file: " + path);
        out_ = &file_;
        write_preamble(config_echo);
    }

    void comment(const std::string& line) { *out_ << "# " << line << "\n"; }

    void header(const std::vector<std::string>& cols) {
        for (size_t i = 0; i < cols.size(); ++i) {
            if (i) *out_ << ",";
            *out_ << cols[i];
        }
        *out_ << "\n";
    }

    template <typename... Ts>
    void row(const Ts&... vals) {
        bool first = true;
        ((write_cell(vals, first), first = false), ...);
        *out_ << "\n";
    }

    std::ostream& stream() { return *out_; }

private:
    void write_preamble(const std::string& config_echo) {
        *out_ << "# carleman-hydro " << kVersion << "\n";
        *out_ << "# config: " << config_echo << "\n";
        *out_ << "# config_hash: " << hex64(fnv1a(config_echo)) << "\n";
        out_->precision(17);
    }

    template <typename T>
    void write_cell(const T& v, bool first) {
        if (!first) *out_ << ",";
        *out_ << v;
    }

    std::ofstream file_;
    std::ostream* out_ = nullptr;
};

}  // namespace carleman::io
