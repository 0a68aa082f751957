#pragma once

#include <istream>
#include <optional>
#include <string>
#include <vector>

namespace recagent::csv {

struct Row {
    std::vector<std::string> fields;
    std::size_t line = 0;  // 1-based line where the record starts
};

/// RFC 4180 reader: quoted fields may hold commas, doubled quotes and newlines.
class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    /// Next record, or nullopt at end of input. Throws IngestError on an
    /// unterminated quoted field.
    std::optional<Row> next();

private:
    std::istream& in_;
    std::size_t line_ = 0;
};

}  // namespace recagent::csv
