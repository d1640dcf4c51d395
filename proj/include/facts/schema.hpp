#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "facts/errors.hpp"

namespace facts {

enum class DataType { Integer, Real, Text, Boolean, Date };

const char* to_string(DataType t);
DataType data_type_from_string(const std::string& s);

// A cell is null or a typed scalar. Dates are carried as ISO-8601 strings.
using Cell = std::variant<std::monostate, std::int64_t, double, bool, std::string>;

bool cell_is_null(const Cell& c);
// Rendering used by prompts, templates and reports. Doubles keep a decimal
// point ("200000.0"), matching how SQL results read in prose.
std::string cell_to_display(const Cell& c);
std::string format_double(double d);

struct Column {
    std::string name;
    DataType type = DataType::Text;
    bool nullable = true;
};

struct TableSchema {
    std::string table_name;
    std::vector<Column> columns;

    const Column* find_column(const std::string& name) const;
};

using Row = std::vector<Cell>;

struct Table {
    TableSchema schema;
    std::vector<Row> rows;
};

enum class TableFormat { CsvWithHeader, JsonRecords };

// Parses CSV (RFC-4180, first row = header) or a JSON array of flat objects.
// Column types are inferred from all values; empty CSV cells and JSON nulls
// both become null.
Table load_table(std::istream& source, TableFormat format, const std::string& table_name);
Table load_table(const std::string& source, TableFormat format, const std::string& table_name);

DataType infer_column_type(const std::vector<std::string>& values);

// Value-free digest of (table name, ordered column names, types). Names are
// lowercased; order and types are significant.
std::string schema_fingerprint(const TableSchema& schema);

// "Table: NAME" followed by "  column: type" lines; blocks joined by a blank
// line. Never contains row values.
std::string render_schema_text(const std::vector<TableSchema>& schemas);

// JSON carrier used by the dataset format and the table round-trip tests:
// {"name":..., "columns":[{"name","type","nullable"}], "rows":[[...]]}.
std::string table_to_json(const Table& table);
Table table_from_json(const std::string& json_text);

// Stable 64-bit FNV-1a digest, hex encoded. Shared by fingerprints and store keys.
std::string fnv1a_hex(const std::string& data);

}  // namespace facts
