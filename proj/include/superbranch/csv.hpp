#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace superbranch {

// Locale-independent shortest round-trip formatting; CSV outputs must be
// byte-identical across runs with the same seed.
inline std::string format_number(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

class CsvWriter {
  public:
    explicit CsvWriter(std::vector<std::string> columns) : columns_(std::move(columns)) {
        line(columns_);
    }

    void line(const std::vector<std::string>& cells) {
        std::string row;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i > 0) {
                row += ',';
            }
            row += cells[i];
        }
        row += '\n';
        body_ += row;
    }

    void row(const std::vector<double>& values) {
        std::vector<std::string> cells;
        cells.reserve(values.size());
        for (double v : values) {
            cells.push_back(format_number(v));
        }
        line(cells);
    }

    const std::string& text() const { return body_; }

    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) {
            throw std::runtime_error("CsvWriter: cannot write '" + path + "'");
        }
        out.write(body_.data(), static_cast<std::streamsize>(body_.size()));
    }

  private:
    std::vector<std::string> columns_;
    std::string body_;
};

}  // namespace superbranch
