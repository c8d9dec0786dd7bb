#pragma once

#include <fstream>
#include <string>
#include <vector>

namespace stabsde {

// Shortest round-trip decimal form; '.' decimal point regardless of locale.
std::string fmt(double v);

// RFC-4180 writer: CRLF line ends, fields quoted when they contain , " or newlines.
class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header);
    void row(const std::vector<std::string>& fields);

private:
    std::ofstream out_;
    std::size_t width_;
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(const std::string& path);

} // namespace stabsde
