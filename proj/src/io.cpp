#include "autoode/io.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <sstream>

namespace autoode {

bool is_leap_year(int year) {
    return year % 4 == 0 && (year % 100 != 0 || year % 400 == 0);
}

namespace {

int days_in_month(int year, int month) {
    static constexpr std::array<int, 12> lengths = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (month == 2 && is_leap_year(year)) return 29;
    return lengths[static_cast<std::size_t>(month - 1)];
}

}  // namespace

// Shift to a March-based year so leap days land at the end of the cycle; the
// day-of-year polynomial (153m+2)/5 then covers all months uniformly.
int days_from_civil(int year, int month, int day) {
    year -= month <= 2;
    const int era = (year >= 0 ? year : year - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(year - era * 400);
    const unsigned mp = static_cast<unsigned>(month + (month > 2 ? -3 : 9));
    const unsigned doy = (153 * mp + 2) / 5 + static_cast<unsigned>(day) - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<int>(doe) - 719468;
}

CivilDate civil_from_days(int serial) {
    const int z = serial + 719468;
    const int era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const int y = static_cast<int>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp + (mp < 10 ? 3 : static_cast<unsigned>(-9));
    return CivilDate{y + (m <= 2), static_cast<int>(m), static_cast<int>(d)};
}

int parse_date(std::string_view text) {
    auto fail = [&] { throw DomainError("bad date '" + std::string(text) + "', want YYYY-MM-DD"); };
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') fail();
    for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u})
        if (text[i] < '0' || text[i] > '9') fail();
    auto num = [&](std::size_t pos, std::size_t len) {
        int v = 0;
        for (std::size_t i = pos; i < pos + len; ++i) v = v * 10 + (text[i] - '0');
        return v;
    };
    int year = num(0, 4), month = num(5, 2), day = num(8, 2);
    if (month < 1 || month > 12 || day < 1 || day > days_in_month(year, month)) fail();
    return days_from_civil(year, month, day);
}

std::string format_date(int serial) {
    CivilDate c = civil_from_days(serial);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", c.year, c.month, c.day);
    return std::string(buf);
}

std::string format_double(double value) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(path, 0, "cannot open file");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    const std::string text = buffer.str();

    CsvTable table;
    std::vector<std::string> record;
    std::string field;
    int line = 1;
    bool in_quotes = false;
    bool field_was_quoted = false;
    bool any_char_on_line = false;

    auto end_field = [&] {
        record.push_back(std::move(field));
        field.clear();
        field_was_quoted = false;
    };
    auto end_record = [&] {
        end_field();
        if (table.header.empty() && table.rows.empty())
            table.header = std::move(record);
        else
            table.rows.push_back(std::move(record));
        record.clear();
        any_char_on_line = false;
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                if (!field.empty() || field_was_quoted)
                    throw ParseError(path, line, "quote inside unquoted field");
                in_quotes = true;
                field_was_quoted = true;
                any_char_on_line = true;
                break;
            case ',':
                end_field();
                any_char_on_line = true;
                break;
            case '\r':
                if (i + 1 < text.size() && text[i + 1] != '\n')
                    throw ParseError(path, line, "bare carriage return");
                break;
            case '\n':
                if (any_char_on_line || !record.empty()) end_record();
                ++line;
                break;
            default:
                field.push_back(c);
                any_char_on_line = true;
        }
    }
    if (in_quotes) throw ParseError(path, line, "unterminated quoted field");
    if (any_char_on_line || !record.empty()) end_record();
    if (table.header.empty() && table.rows.empty()) throw ParseError(path, 0, "empty file");
    return table;
}

namespace {

void write_field(std::ostream& out, const std::string& field) {
    bool needs_quotes = field.find_first_of(",\"\n\r") != std::string::npos;
    if (!needs_quotes) {
        out << field;
        return;
    }
    out << '"';
    for (char c : field) {
        if (c == '"') out << '"';
        out << c;
    }
    out << '"';
}

void write_record(std::ostream& out, const std::vector<std::string>& record) {
    for (std::size_t i = 0; i < record.size(); ++i) {
        if (i > 0) out << ',';
        write_field(out, record[i]);
    }
    out << '\n';
}

}  // namespace

void write_csv(const std::string& path, const CsvTable& table) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError(path, 0, "cannot open file for writing");
    write_record(out, table.header);
    for (const auto& row : table.rows) write_record(out, row);
    if (!out) throw ParseError(path, 0, "write failed");
}

nlohmann::json read_json(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(path, 0, "cannot open file");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path, 0, e.what());
    }
}

void write_json(const std::string& path, const nlohmann::json& value) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError(path, 0, "cannot open file for writing");
    out << value.dump(2) << '\n';
    if (!out) throw ParseError(path, 0, "write failed");
}

}  // namespace autoode
