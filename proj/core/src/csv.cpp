#include "csv.hpp"

#include "recagent/errors.hpp"

namespace recagent::csv {

std::optional<Row> Reader::next() {
    std::string line;
    while (std::getline(in_, line)) {
        ++line_;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) break;
    }
    if (line.empty() && !in_) return std::nullopt;

    Row row;
    row.line = line_;
    std::string field;
    bool quoted = false;
    std::size_t i = 0;
    while (true) {
        if (i == line.size()) {
            if (!quoted) break;
            // Quoted field spans a newline.
            std::string more;
            if (!std::getline(in_, more)) throw IngestError("unterminated quoted field", row.line);
            ++line_;
            if (!more.empty() && more.back() == '\r') more.pop_back();
            field += '\n';
            line = std::move(more);
            i = 0;
            continue;
        }
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            row.fields.push_back(std::move(field));
            field.clear();
        } else {
            field += c;
        }
        ++i;
    }
    row.fields.push_back(std::move(field));
    return row;
}

}  // namespace recagent::csv
