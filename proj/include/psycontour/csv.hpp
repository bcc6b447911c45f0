#pragma once

#include <cstddef>
#include <istream>
#include <string>
#include <vector>

namespace psycontour {

struct CsvRow {
    std::vector<std::string> fields;
    std::size_t line = 0;  // 1-based line where the record starts
};

// RFC 4180 reader: quoted fields may contain separators, doubled quotes and newlines.
class CsvReader {
public:
    explicit CsvReader(std::istream& in, char sep = ',') : in_(in), sep_(sep) {}

    // False at end of input. Throws DataError on an unterminated quoted field.
    bool next(CsvRow& row);

private:
    std::istream& in_;
    char sep_;
    std::size_t line_ = 1;
};

}  // namespace psycontour
