#pragma once

#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace epimob::csv {

inline std::vector<std::string> split_row(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

/// Reads a CSV file, checks the header, and calls row_fn(line_number, fields)
/// for each data row. Empty lines are skipped.
inline void read_file(const std::string& path, const std::vector<std::string>& expected_header,
                      const std::function<void(int, const std::vector<std::string>&)>& row_fn) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    int lineno = 0;
    bool saw_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        auto fields = split_row(line);
        if (!saw_header) {
            if (fields != expected_header) {
                std::string want;
                for (const auto& h : expected_header) want += (want.empty() ? "" : ",") + h;
                throw std::runtime_error(path + ": bad header (expected '" + want + "')");
            }
            saw_header = true;
            continue;
        }
        row_fn(lineno, fields);
    }
    if (!saw_header) throw std::runtime_error(path + ": empty file");
}

inline double parse_double(const std::string& s, int lineno, const std::string& what) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error("line " + std::to_string(lineno) + ": cannot parse " + what +
                                 " '" + s + "'");
    }
}

inline long long parse_int(const std::string& s, int lineno, const std::string& what) {
    try {
        std::size_t pos = 0;
        long long v = std::stoll(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error("line " + std::to_string(lineno) + ": cannot parse " + what +
                                 " '" + s + "'");
    }
}

}  // namespace epimob::csv
