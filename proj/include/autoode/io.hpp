#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "autoode/errors.hpp"
#include "json.hpp"

namespace autoode {

// Dates are plain serial day counts (days since 1970-01-01, negative before),
// so arithmetic and gap detection are integer operations.
struct CivilDate {
    int year = 1970;
    int month = 1;
    int day = 1;
};

int days_from_civil(int year, int month, int day);
CivilDate civil_from_days(int serial);

// Strict ISO YYYY-MM-DD with real-calendar validation.
int parse_date(std::string_view text);
std::string format_date(int serial);
bool is_leap_year(int year);

// Shortest decimal string that round-trips the exact double.
std::string format_double(double value);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

// RFC-4180 style: quoted fields may contain commas, doubled quotes, and
// newlines; both LF and CRLF line endings are accepted on read.
CsvTable read_csv(const std::string& path);
void write_csv(const std::string& path, const CsvTable& table);

nlohmann::json read_json(const std::string& path);
void write_json(const std::string& path, const nlohmann::json& value);

}  // namespace autoode
