#include "stabsde/csv.hpp"

#include "stabsde/common.hpp"

#include <charconv>
#include <sstream>

namespace stabsde {

std::string fmt(double v)
{
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

namespace {

std::string quote(const std::string& s)
{
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q += '"';
        q += c;
    }
    return q + "\"";
}

} // namespace

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header)
    : out_(path, std::ios::binary), width_(header.size())
{
    require(static_cast<bool>(out_), "cannot open " + path + " for writing");
    require(!header.empty(), "CsvWriter: header row is mandatory");
    row(header);
}

void CsvWriter::row(const std::vector<std::string>& fields)
{
    require(fields.size() == width_, "CsvWriter: row width does not match the header");
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out_ << ',';
        out_ << quote(fields[i]);
    }
    out_ << "\r\n";
}

CsvTable read_csv(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), "cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string s = ss.str();
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> cur;
    std::string field;
    bool quoted = false, any = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        char c = s[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < s.size() && s[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        if (c == '"') {
            quoted = true;
            any = true;
        } else if (c == ',') {
            cur.push_back(field);
            field.clear();
            any = true;
        } else if (c == '\r' || c == '\n') {
            if (c == '\r' && i + 1 < s.size() && s[i + 1] == '\n') ++i;
            if (any || !field.empty()) {
                cur.push_back(field);
                rows.push_back(cur);
            }
            cur.clear();
            field.clear();
            any = false;
        } else {
            field += c;
            any = true;
        }
    }
    if (any || !field.empty()) {
        cur.push_back(field);
        rows.push_back(cur);
    }
    require(!rows.empty(), "read_csv: missing header row in " + path);
    CsvTable t;
    t.header = rows.front();
    t.rows.assign(rows.begin() + 1, rows.end());
    for (const auto& r : t.rows) require(r.size() == t.header.size(), "read_csv: ragged row in " + path);
    return t;
}

} // namespace stabsde
