#include "meshray/csv.hpp"

#include <charconv>
#include <fstream>
#include <string>

#include "meshray/error.hpp"

namespace meshray {

namespace {

std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

bool parse_row(std::string_view line, std::vector<double>& out)
{
    out.clear();
    while (true) {
        const auto comma = line.find(',');
        const std::string_view field = trim(line.substr(0, comma));
        double d = 0.0;
        auto [p, ec] = std::from_chars(field.data(), field.data() + field.size(), d);
        if (field.empty() || ec != std::errc{} || p != field.data() + field.size()) return false;
        out.push_back(d);
        if (comma == std::string_view::npos) return true;
        line.remove_prefix(comma + 1);
    }
}

}  // namespace

std::vector<std::vector<double>> read_numeric_csv(const std::filesystem::path& path, std::size_t columns)
{
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    std::vector<std::vector<double>> rows;
    std::vector<double> row;
    std::string line;
    std::size_t line_no = 0;
    bool first_content = true;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view body = trim(line);
        if (body.empty() || body.front() == '#') continue;
        const bool ok = parse_row(body, row);
        if (!ok && first_content) {
            first_content = false;
            continue;  // header
        }
        first_content = false;
        if (!ok) throw Error(ErrorCode::ParseError, path.string() + ":" + std::to_string(line_no) + ": non-numeric field");
        if (row.size() != columns) {
            throw Error(ErrorCode::ParseError, path.string() + ":" + std::to_string(line_no) + ": expected " +
                                                   std::to_string(columns) + " fields, got " +
                                                   std::to_string(row.size()));
        }
        rows.push_back(row);
    }
    return rows;
}

}  // namespace meshray
