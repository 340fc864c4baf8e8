#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace lesiongrade::csv {

// Minimal CSV reader: comma separated, optional double-quote quoting,
// LF or CRLF line endings. Blank lines are skipped.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    // 1-based source line of each row, for diagnostics.
    std::vector<std::size_t> lines;

    // Index of a header column, or npos.
    std::size_t column(std::string_view name) const;
};

Table read(std::istream& in, const std::string& source);
Table read_file(const std::string& path);

// Quotes the field only when it contains a comma, quote or newline.
std::string escape(std::string_view field);
void write_row(std::ostream& out, const std::vector<std::string>& fields);

}  // namespace lesiongrade::csv
