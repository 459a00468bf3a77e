#pragma once

// Self-describing output files.  CSV is the canonical format: '#' metadata
// lines (config echo, seed, version, wall time), then a mandatory header
// row, UTF-8, '.' decimal, '\n' line ends.  JSON mirrors the same content.
// Doubles are printed with 17 significant digits so reruns are bit-exact.

#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace sepr {

inline constexpr const char* version_string = "0.1.0";

inline std::string format_double(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

struct Metadata {
    std::vector<std::pair<std::string, std::string>> entries;

    void add(const std::string& key, const std::string& value) { entries.emplace_back(key, value); }
    void add(const std::string& key, double value) { entries.emplace_back(key, format_double(value)); }
    void add(const std::string& key, long long value) { entries.emplace_back(key, std::to_string(value)); }
    void add(const std::string& key, unsigned long long value) { entries.emplace_back(key, std::to_string(value)); }
    void add(const std::string& key, int value) { entries.emplace_back(key, std::to_string(value)); }
};

class TableWriter {
  public:
    TableWriter(Metadata meta, std::vector<std::string> columns)
        : meta_(std::move(meta)), columns_(std::move(columns)) {
        meta_.add("version", std::string(version_string));
    }

    void add_row(const std::vector<std::string>& cells) {
        if (cells.size() != columns_.size()) throw std::invalid_argument("row width mismatch");
        rows_.push_back(cells);
    }
    void add_row(const std::vector<double>& cells) {
        std::vector<std::string> s;
        s.reserve(cells.size());
        for (double v : cells) s.push_back(format_double(v));
        add_row(s);
    }

    template <class V>
    void add_metadata(const std::string& key, V value) { meta_.add(key, value); }

    void write_csv(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open " + path);
        for (const auto& [k, v] : meta_.entries) out << "# " << k << "=" << v << "\n";
        for (std::size_t c = 0; c < columns_.size(); ++c) out << columns_[c] << (c + 1 < columns_.size() ? "," : "");
        out << "\n";
        for (const auto& row : rows_) {
            for (std::size_t c = 0; c < row.size(); ++c) out << row[c] << (c + 1 < row.size() ? "," : "");
            out << "\n";
        }
    }

    void write_json(const std::string& path) const {
        nlohmann::ordered_json j;
        for (const auto& [k, v] : meta_.entries) j["metadata"][k] = v;
        j["columns"] = columns_;
        j["rows"] = rows_;
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open " + path);
        out << j.dump(1) << "\n";
    }

    void write(const std::string& path, const std::string& format) const {
        if (format == "csv") write_csv(path);
        else if (format == "json") write_json(path);
        else throw std::invalid_argument("unknown output format: " + format);
    }

  private:
    Metadata meta_;
    std::vector<std::string> columns_;
    std::vector<std::vector<std::string>> rows_;
};

} // namespace sepr
