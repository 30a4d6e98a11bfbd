#include "loopcoord/csv.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace loopcoord::csv {
namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        cells.push_back(trim(cell));
    }
    if (!line.empty() && line.back() == ',') {
        cells.emplace_back();
    }
    return cells;
}

bool parse_number(const std::string& s, double& out) {
    if (s.empty()) {
        return false;
    }
    const char* begin = s.data();
    if (*begin == '+') {
        ++begin;
    }
    const char* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc() && ptr == end;
}

}  // namespace

Table parse(std::istream& in, const std::string& source_name) {
    Table table;
    std::string line;
    std::size_t line_no = 0;
    bool first_data = true;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty()) {
            continue;
        }
        if (t.front() == '#') {
            table.comments.push_back(t.substr(1));
            continue;
        }
        const auto cells = split(t);
        std::vector<double> row;
        row.reserve(cells.size());
        bool numeric = true;
        for (const auto& c : cells) {
            double v = 0.0;
            if (!parse_number(c, v)) {
                numeric = false;
                break;
            }
            row.push_back(v);
        }
        if (!numeric) {
            if (first_data) {
                table.header = cells;
                first_data = false;
                continue;
            }
            throw InvalidInput(source_name + ":" + std::to_string(line_no) + ": non-numeric cell");
        }
        first_data = false;
        table.rows.push_back(std::move(row));
    }
    return table;
}

Table read_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw InvalidInput("cannot open " + path.string());
    }
    return parse(in, path.string());
}

Matrix to_matrix(const Table& table) {
    require(!table.rows.empty(), "csv: no numeric rows");
    const auto cols = table.rows.front().size();
    Matrix m(static_cast<Eigen::Index>(table.rows.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        require(table.rows[r].size() == cols, "csv: ragged row " + std::to_string(r + 1));
        for (std::size_t c = 0; c < cols; ++c) {
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = table.rows[r][c];
        }
    }
    return m;
}

Matrix read_matrix(const std::filesystem::path& path) { return to_matrix(read_file(path)); }

Vector read_vector(const std::filesystem::path& path) {
    const Matrix m = read_matrix(path);
    if (m.rows() == 1) {
        return m.row(0).transpose();
    }
    require(m.cols() == 1, "csv: " + path.string() + " is neither a row nor a column vector");
    return m.col(0);
}

std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

void write_comment_lines(std::ostream& out, const std::vector<std::string>& lines) {
    for (const auto& l : lines) {
        out << '#' << ' ' << l << '\n';
    }
}

void write_row(std::ostream& out, const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) {
            out << ',';
        }
        out << format_double(values[i]);
    }
    out << '\n';
}

void write_matrix(std::ostream& out, const Matrix& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        std::vector<double> row(static_cast<std::size_t>(m.cols()));
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            row[static_cast<std::size_t>(c)] = m(r, c);
        }
        write_row(out, row);
    }
}

}  // namespace loopcoord::csv
