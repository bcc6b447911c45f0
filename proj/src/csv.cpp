#include "psycontour/csv.hpp"

#include "psycontour/error.hpp"

namespace psycontour {

bool CsvReader::next(CsvRow& row) {
    row.fields.clear();
    row.line = line_;
    if (in_.peek() == std::char_traits<char>::eof()) return false;

    std::string field;
    bool in_quotes = false;
    bool quoted_field = false;
    int ch;
    while ((ch = in_.get()) != std::char_traits<char>::eof()) {
        const char c = static_cast<char>(ch);
        if (in_quotes) {
            if (c == '"') {
                if (in_.peek() == '"') {
                    in_.get();
                    field.push_back('"');
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line_;
                field.push_back(c);
            }
            continue;
        }
        if (c == '"' && field.empty() && !quoted_field) {
            in_quotes = true;
            quoted_field = true;
        } else if (c == sep_) {
            row.fields.push_back(std::move(field));
            field.clear();
            quoted_field = false;
        } else if (c == '\n') {
            ++line_;
            if (!field.empty() && field.back() == '\r') field.pop_back();
            row.fields.push_back(std::move(field));
            return true;
        } else {
            field.push_back(c);
        }
    }
    if (in_quotes) {
        throw DataError("line " + std::to_string(row.line) + ": unterminated quoted field");
    }
    if (!field.empty() && field.back() == '\r') field.pop_back();
    row.fields.push_back(std::move(field));
    return true;
}

}  // namespace psycontour
