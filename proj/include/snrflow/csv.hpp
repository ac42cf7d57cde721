#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace snrflow {

/// Shortest-round-trip-ish deterministic formatting for CSV cells.
inline std::string csv_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& columns)
        : out_(path, std::ios::trunc), n_cols_(columns.size()) {
        if (!out_) throw std::runtime_error("csv: cannot open for writing: " + path.string());
        write_row(columns);
    }

    void row(const std::vector<std::string>& cells) {
        if (cells.size() != n_cols_) throw std::logic_error("csv: row width mismatch");
        write_row(cells);
    }

private:
    void write_row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << cells[i];
        }
        out_ << '\n';
    }

    std::ofstream out_;
    std::size_t n_cols_;
};

}  // namespace snrflow
