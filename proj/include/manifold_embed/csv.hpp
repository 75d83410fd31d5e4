#pragma once

#include <string>
#include <vector>

#include "manifold_embed/errors.hpp"

namespace manifold_embed {

struct CsvRow {
    std::vector<std::string> fields;
    std::size_t row_number = 0;  // 1-based record index in the file
};

// Comma-separated records with double-quote quoting: quoted fields may hold
// commas, newlines, and doubled quotes. Rows end at \n or \r\n; blank lines
// are skipped.
inline std::vector<CsvRow> parse_csv(const std::string& content) {
    std::vector<CsvRow> rows;
    CsvRow row;
    std::string field;
    bool in_quotes = false;
    bool row_has_data = false;

    auto end_row = [&] {
        if (!row_has_data && field.empty() && row.fields.empty()) return;  // blank line
        row.fields.push_back(std::move(field));
        field.clear();
        row.row_number = rows.size() + 1;
        rows.push_back(std::move(row));
        row = CsvRow{};
        row_has_data = false;
    };

    for (std::size_t i = 0; i < content.size(); ++i) {
        const char c = content[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < content.size() && content[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                if (field.empty()) {
                    in_quotes = true;
                    row_has_data = true;
                } else {
                    field.push_back(c);  // stray quote mid-field, keep verbatim
                }
                break;
            case ',':
                row.fields.push_back(std::move(field));
                field.clear();
                row_has_data = true;
                break;
            case '\r':
                if (i + 1 < content.size() && content[i + 1] == '\n') break;  // \n ends the row
                end_row();
                break;
            case '\n':
                end_row();
                break;
            default:
                field.push_back(c);
                row_has_data = true;
                break;
        }
    }
    if (in_quotes) throw IoError("malformed CSV: unterminated quoted field at end of input");
    end_row();
    return rows;
}

}  // namespace manifold_embed
