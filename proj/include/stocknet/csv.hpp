#pragma once

#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace stocknet {

// Minimal delimiter-separated reader for the plain, unquoted inputs this
// toolkit consumes. Trims \r so CRLF files parse.
inline std::vector<std::string> split_csv_line(std::string_view line, char delim = ',') {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(delim, start);
        if (pos == std::string_view::npos) {
            out.emplace_back(line.substr(start));
            break;
        }
        out.emplace_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    if (!out.empty() && !out.back().empty() && out.back().back() == '\r') out.back().pop_back();
    return out;
}

class CsvReader {
public:
    explicit CsvReader(const std::string& path, char delim = ',') : in_(path), delim_(delim) {
        if (!in_) throw std::runtime_error("cannot open file: " + path);
        std::string header;
        if (!std::getline(in_, header)) throw std::runtime_error("empty file: " + path);
        header_ = split_csv_line(header, delim_);
        for (std::size_t i = 0; i < header_.size(); ++i) column_index_[header_[i]] = i;
        row_number_ = 1;
    }

    // Column lookup for the header row; -1 when absent.
    int column(const std::string& name) const {
        auto it = column_index_.find(name);
        return it == column_index_.end() ? -1 : static_cast<int>(it->second);
    }

    int require_column(const std::string& name) const {
        int c = column(name);
        if (c < 0) throw std::runtime_error("missing required column: " + name);
        return c;
    }

    // Reads the next data row. Returns false at EOF. Blank lines are skipped.
    bool next(std::vector<std::string>& fields) {
        std::string line;
        while (std::getline(in_, line)) {
            ++row_number_;
            if (line.empty() || line == "\r") continue;
            fields = split_csv_line(line, delim_);
            return true;
        }
        return false;
    }

    // 1-based row number of the row most recently returned (header = row 1).
    std::size_t row_number() const { return row_number_; }
    const std::vector<std::string>& header() const { return header_; }

private:
    std::ifstream in_;
    char delim_;
    std::vector<std::string> header_;
    std::map<std::string, std::size_t> column_index_;
    std::size_t row_number_ = 0;
};

class CsvWriter {
public:
    explicit CsvWriter(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_) throw std::runtime_error("cannot open file for writing: " + path);
    }

    void row(const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) out_ << ',';
            out_ << fields[i];
        }
        out_ << '\n';
    }

    void flush() { out_.flush(); }

private:
    std::ofstream out_;
};

} // namespace stocknet
