#include "facts/schema.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

namespace facts {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

bool parse_int(const std::string& s, std::int64_t& out) {
    if (s.empty()) return false;
    const char* p = s.c_str();
    char* end = nullptr;
    errno = 0;
    long long v = std::strtoll(p, &end, 10);
    if (errno != 0 || end != p + s.size()) return false;
    out = v;
    return true;
}

bool parse_real(const std::string& s, double& out) {
    if (s.empty()) return false;
    const char* p = s.c_str();
    char* end = nullptr;
    errno = 0;
    double v = std::strtod(p, &end);
    if (errno != 0 || end != p + s.size()) return false;
    out = v;
    return true;
}

bool is_bool_literal(const std::string& s) {
    std::string l = lower(s);
    return l == "true" || l == "false";
}

bool is_iso_date(const std::string& s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
    for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u})
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    return true;
}

Cell coerce(const std::string& raw, DataType type) {
    switch (type) {
        case DataType::Integer: {
            std::int64_t v = 0;
            parse_int(raw, v);
            return Cell{v};
        }
        case DataType::Real: {
            double v = 0;
            parse_real(raw, v);
            return Cell{v};
        }
        case DataType::Boolean:
            return Cell{lower(raw) == "true"};
        case DataType::Date:
        case DataType::Text:
            return Cell{raw};
    }
    return Cell{raw};
}

// RFC-4180 field splitting for one logical record; records may span physical
// lines inside quoted fields, so parsing works over the whole stream.
struct CsvParser {
    const std::string& text;
    std::size_t pos = 0;

    bool at_end() const { return pos >= text.size(); }

    bool next_record(std::vector<std::string>& fields, std::vector<bool>& quoted) {
        fields.clear();
        quoted.clear();
        if (at_end()) return false;
        std::string field;
        bool in_quotes = false;
        bool field_quoted = false;
        while (pos < text.size()) {
            char c = text[pos];
            if (in_quotes) {
                if (c == '"') {
                    if (pos + 1 < text.size() && text[pos + 1] == '"') {
                        field += '"';
                        pos += 2;
                    } else {
                        in_quotes = false;
                        ++pos;
                    }
                } else {
                    field += c;
                    ++pos;
                }
            } else if (c == '"') {
                if (!field.empty()) throw IngestError(pos, "unexpected quote inside unquoted field");
                in_quotes = true;
                field_quoted = true;
                ++pos;
            } else if (c == ',') {
                fields.push_back(field);
                quoted.push_back(field_quoted);
                field.clear();
                field_quoted = false;
                ++pos;
            } else if (c == '\r' || c == '\n') {
                if (c == '\r' && pos + 1 < text.size() && text[pos + 1] == '\n') ++pos;
                ++pos;
                fields.push_back(field);
                quoted.push_back(field_quoted);
                return true;
            } else {
                field += c;
                ++pos;
            }
        }
        if (in_quotes) throw IngestError(pos, "unterminated quoted field");
        fields.push_back(field);
        quoted.push_back(field_quoted);
        return true;
    }
};

Table load_csv(const std::string& text, const std::string& table_name) {
    CsvParser parser{text};
    std::vector<std::string> header;
    std::vector<bool> hq;
    if (!parser.next_record(header, hq) || (header.size() == 1 && header[0].empty()))
        throw IngestError(0, "missing CSV header");

    std::vector<std::vector<std::string>> raw_rows;
    std::vector<std::vector<bool>> null_mask;  // empty unquoted cell == null
    std::vector<std::string> fields;
    std::vector<bool> quoted;
    while (parser.next_record(fields, quoted)) {
        if (fields.size() == 1 && fields[0].empty() && parser.at_end()) break;  // trailing newline
        if (fields.size() != header.size())
            throw IngestError(parser.pos, "ragged row: expected " + std::to_string(header.size()) +
                                              " fields, got " + std::to_string(fields.size()));
        std::vector<bool> nulls;
        for (std::size_t i = 0; i < fields.size(); ++i)
            nulls.push_back(fields[i].empty() && !quoted[i]);
        raw_rows.push_back(fields);
        null_mask.push_back(nulls);
    }

    Table table;
    table.schema.table_name = table_name;
    std::unordered_set<std::string> seen;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (header[c].empty()) throw IngestError(0, "empty column name in header");
        if (!seen.insert(header[c]).second) throw IngestError(0, "duplicate column name: " + header[c]);
        std::vector<std::string> values;
        bool any_null = false;
        for (std::size_t r = 0; r < raw_rows.size(); ++r) {
            if (null_mask[r][c])
                any_null = true;
            else
                values.push_back(raw_rows[r][c]);
        }
        table.schema.columns.push_back(Column{header[c], infer_column_type(values), any_null});
    }
    for (std::size_t r = 0; r < raw_rows.size(); ++r) {
        Row row;
        for (std::size_t c = 0; c < header.size(); ++c) {
            if (null_mask[r][c])
                row.push_back(Cell{std::monostate{}});
            else
                row.push_back(coerce(raw_rows[r][c], table.schema.columns[c].type));
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

DataType json_value_type(const nlohmann::json& v) {
    if (v.is_number_integer() || v.is_number_unsigned()) return DataType::Integer;
    if (v.is_number_float()) return DataType::Real;
    if (v.is_boolean()) return DataType::Boolean;
    if (v.is_string()) return is_iso_date(v.get<std::string>()) ? DataType::Date : DataType::Text;
    return DataType::Text;
}

DataType merge_types(DataType a, DataType b) {
    if (a == b) return a;
    if ((a == DataType::Integer && b == DataType::Real) ||
        (a == DataType::Real && b == DataType::Integer))
        return DataType::Real;
    if ((a == DataType::Date && b == DataType::Text) || (a == DataType::Text && b == DataType::Date))
        return DataType::Text;
    return DataType::Text;
}

Table load_json_records(const std::string& text, const std::string& table_name) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw IngestError(e.byte, e.what());
    }
    if (!doc.is_array()) throw IngestError(0, "JSON records input must be an array of objects");

    std::vector<std::string> order;
    std::unordered_set<std::string> seen;
    for (const auto& rec : doc) {
        if (!rec.is_object()) throw IngestError(0, "JSON record is not an object");
        for (auto it = rec.begin(); it != rec.end(); ++it)
            if (seen.insert(it.key()).second) order.push_back(it.key());
    }
    if (order.empty()) throw IngestError(0, "JSON records carry no columns");

    Table table;
    table.schema.table_name = table_name;
    for (const auto& name : order) {
        bool any_null = false, any_value = false;
        DataType type = DataType::Text;
        for (const auto& rec : doc) {
            if (!rec.contains(name) || rec[name].is_null()) {
                any_null = true;
                continue;
            }
            DataType t = json_value_type(rec[name]);
            type = any_value ? merge_types(type, t) : t;
            any_value = true;
        }
        table.schema.columns.push_back(Column{name, any_value ? type : DataType::Text, any_null});
    }
    for (const auto& rec : doc) {
        Row row;
        for (std::size_t c = 0; c < order.size(); ++c) {
            const auto& name = order[c];
            if (!rec.contains(name) || rec[name].is_null()) {
                row.push_back(Cell{std::monostate{}});
                continue;
            }
            const auto& v = rec[name];
            switch (table.schema.columns[c].type) {
                case DataType::Integer:
                    row.push_back(Cell{v.get<std::int64_t>()});
                    break;
                case DataType::Real:
                    row.push_back(Cell{v.get<double>()});
                    break;
                case DataType::Boolean:
                    row.push_back(Cell{v.get<bool>()});
                    break;
                case DataType::Date:
                case DataType::Text:
                    if (v.is_string())
                        row.push_back(Cell{v.get<std::string>()});
                    else
                        row.push_back(Cell{v.dump()});
                    break;
            }
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

}  // namespace

const char* to_string(DataType t) {
    switch (t) {
        case DataType::Integer: return "integer";
        case DataType::Real: return "real";
        case DataType::Text: return "text";
        case DataType::Boolean: return "boolean";
        case DataType::Date: return "date";
    }
    return "text";
}

DataType data_type_from_string(const std::string& s) {
    if (s == "integer") return DataType::Integer;
    if (s == "real") return DataType::Real;
    if (s == "text") return DataType::Text;
    if (s == "boolean") return DataType::Boolean;
    if (s == "date") return DataType::Date;
    throw Error("unknown data type: " + s);
}

bool cell_is_null(const Cell& c) { return std::holds_alternative<std::monostate>(c); }

std::string format_double(double d) {
    // Shortest representation that round-trips, with a decimal point kept.
    char buf[64];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, d);
        if (std::strtod(buf, nullptr) == d) break;
    }
    std::string s = buf;
    // prefer plain notation when it stays readable ("200000.0", not "2e+05")
    if (s.find('e') != std::string::npos && std::isfinite(d) && std::abs(d) < 1e15) {
        for (int decimals = 0; decimals <= 17; ++decimals) {
            std::snprintf(buf, sizeof buf, "%.*f", decimals, d);
            if (std::strtod(buf, nullptr) == d) {
                s = buf;
                break;
            }
        }
    }
    if (s.find('.') == std::string::npos && s.find('e') == std::string::npos &&
        s.find("inf") == std::string::npos && s.find("nan") == std::string::npos)
        s += ".0";
    return s;
}

std::string cell_to_display(const Cell& c) {
    struct Visitor {
        std::string operator()(std::monostate) const { return "null"; }
        std::string operator()(std::int64_t v) const { return std::to_string(v); }
        std::string operator()(double v) const { return format_double(v); }
        std::string operator()(bool v) const { return v ? "true" : "false"; }
        std::string operator()(const std::string& v) const { return v; }
    };
    return std::visit(Visitor{}, c);
}

const Column* TableSchema::find_column(const std::string& name) const {
    for (const auto& c : columns)
        if (c.name == name) return &c;
    return nullptr;
}

Table load_table(std::istream& source, TableFormat format, const std::string& table_name) {
    std::ostringstream buf;
    buf << source.rdbuf();
    return load_table(buf.str(), format, table_name);
}

Table load_table(const std::string& source, TableFormat format, const std::string& table_name) {
    switch (format) {
        case TableFormat::CsvWithHeader: return load_csv(source, table_name);
        case TableFormat::JsonRecords: return load_json_records(source, table_name);
    }
    throw IngestError(0, "unknown table format");
}

DataType infer_column_type(const std::vector<std::string>& values) {
    bool all_int = true, all_real = true, all_bool = true, all_date = true;
    bool any = false;
    for (const auto& v : values) {
        if (v.empty()) continue;  // nulls don't decide the type
        any = true;
        std::int64_t i;
        double d;
        if (!parse_int(v, i)) all_int = false;
        if (!parse_real(v, d)) all_real = false;
        if (!is_bool_literal(v)) all_bool = false;
        if (!is_iso_date(v)) all_date = false;
    }
    if (!any) return DataType::Text;
    if (all_int) return DataType::Integer;
    if (all_real) return DataType::Real;
    if (all_bool) return DataType::Boolean;
    if (all_date) return DataType::Date;
    return DataType::Text;
}

std::string fnv1a_hex(const std::string& data) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string schema_fingerprint(const TableSchema& schema) {
    std::string canon = lower(schema.table_name);
    for (const auto& c : schema.columns) {
        canon += '|';
        canon += lower(c.name);
        canon += ':';
        canon += to_string(c.type);
    }
    return fnv1a_hex(canon);
}

std::string render_schema_text(const std::vector<TableSchema>& schemas) {
    std::string out;
    for (std::size_t i = 0; i < schemas.size(); ++i) {
        if (i) out += "\n\n";
        out += "Table: " + schemas[i].table_name;
        for (const auto& c : schemas[i].columns) out += "\n  " + c.name + ": " + to_string(c.type);
    }
    return out;
}

std::string table_to_json(const Table& table) {
    nlohmann::ordered_json doc;
    doc["name"] = table.schema.table_name;
    doc["columns"] = nlohmann::ordered_json::array();
    for (const auto& c : table.schema.columns)
        doc["columns"].push_back({{"name", c.name}, {"type", to_string(c.type)}, {"nullable", c.nullable}});
    doc["rows"] = nlohmann::ordered_json::array();
    for (const auto& row : table.rows) {
        nlohmann::ordered_json jrow = nlohmann::ordered_json::array();
        for (const auto& cell : row) {
            if (cell_is_null(cell))
                jrow.push_back(nullptr);
            else if (const auto* i = std::get_if<std::int64_t>(&cell))
                jrow.push_back(*i);
            else if (const auto* d = std::get_if<double>(&cell))
                jrow.push_back(*d);
            else if (const auto* b = std::get_if<bool>(&cell))
                jrow.push_back(*b);
            else
                jrow.push_back(std::get<std::string>(cell));
        }
        doc["rows"].push_back(std::move(jrow));
    }
    return doc.dump();
}

Table table_from_json(const std::string& json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw IngestError(e.byte, e.what());
    }
    if (!doc.is_object() || !doc.contains("name") || !doc.contains("columns") || !doc.contains("rows"))
        throw IngestError(0, "table document requires name, columns, rows");
    Table table;
    table.schema.table_name = doc["name"].get<std::string>();
    for (const auto& jc : doc["columns"]) {
        Column c;
        c.name = jc.at("name").get<std::string>();
        c.type = data_type_from_string(jc.at("type").get<std::string>());
        c.nullable = jc.value("nullable", true);
        table.schema.columns.push_back(c);
    }
    if (table.schema.columns.empty()) throw IngestError(0, "table document has no columns");
    for (const auto& jrow : doc["rows"]) {
        if (jrow.size() != table.schema.columns.size())
            throw IngestError(0, "row width does not match column count");
        Row row;
        for (std::size_t c = 0; c < jrow.size(); ++c) {
            const auto& v = jrow[c];
            if (v.is_null()) {
                row.push_back(Cell{std::monostate{}});
                continue;
            }
            switch (table.schema.columns[c].type) {
                case DataType::Integer: row.push_back(Cell{v.get<std::int64_t>()}); break;
                case DataType::Real: row.push_back(Cell{v.get<double>()}); break;
                case DataType::Boolean: row.push_back(Cell{v.get<bool>()}); break;
                case DataType::Date:
                case DataType::Text: row.push_back(Cell{v.get<std::string>()}); break;
            }
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

}  // namespace facts
