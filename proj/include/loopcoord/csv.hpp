#pragma once

#include "loopcoord/types.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace loopcoord::csv {

/// Numeric table read from a comma-separated file. Lines starting with '#'
/// are comments; a first row that does not parse as numbers is a header.
struct Table {
    std::vector<std::string> header;
    std::vector<std::string> comments;
    std::vector<std::vector<double>> rows;
};

Table parse(std::istream& in, const std::string& source_name = "<stream>");
Table read_file(const std::filesystem::path& path);

/// Row-major matrix; all rows must have the same width.
Matrix to_matrix(const Table& table);
Matrix read_matrix(const std::filesystem::path& path);

/// Accepts a single row or a single column.
Vector read_vector(const std::filesystem::path& path);

/// Shortest decimal representation that round-trips the double exactly.
std::string format_double(double v);

void write_comment_lines(std::ostream& out, const std::vector<std::string>& lines);
void write_row(std::ostream& out, const std::vector<double>& values);
void write_matrix(std::ostream& out, const Matrix& m);

}  // namespace loopcoord::csv
