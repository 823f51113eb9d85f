#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

// Column-oriented plain-text tables. Formatting goes through snprintf with a
// fixed %.Ng format, so identical inputs serialize byte-identically.

namespace ringphonon {

inline std::string format_double(double v, int sig_digits)
{
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.*g", sig_digits, v);
    return buf;
}

struct TextTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    void add_row(std::initializer_list<double> vals) { rows.emplace_back(vals); }

    std::string to_string(int sig_digits) const
    {
        std::ostringstream os;
        os << "#";
        for (const auto& c : columns)
            os << ' ' << c;
        os << '\n';
        for (const auto& row : rows) {
            for (std::size_t i = 0; i < row.size(); ++i)
                os << (i ? " " : "") << format_double(row[i], sig_digits);
            os << '\n';
        }
        return os.str();
    }
};

inline void write_text_file(const std::string& path, const std::string& content)
{
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw std::runtime_error("cannot open for writing: " + path);
    f << content;
    if (!f)
        throw std::runtime_error("write failed: " + path);
}

inline std::string read_text_file(const std::string& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw std::runtime_error("cannot open for reading: " + path);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

/// Parse a whitespace-separated numeric table, skipping '#' comment lines.
inline std::vector<std::vector<double>> parse_table(const std::string& text)
{
    std::vector<std::vector<double>> rows;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#')
            continue;
        std::istringstream ls(line);
        std::vector<double> row;
        double v;
        while (ls >> v)
            row.push_back(v);
        if (!row.empty())
            rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace ringphonon
