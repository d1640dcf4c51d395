#include "facts/sqlexec.hpp"

#include <sqlite3.h>

#include <algorithm>
#include <cctype>
#include <unordered_set>

namespace facts {

namespace {

std::string upper(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    return s;
}

// Strips line/block comments and string/identifier literals so keyword and
// semicolon scans cannot be fooled by quoted content.
std::string strip_literals(const std::string& sql) {
    std::string out;
    out.reserve(sql.size());
    for (std::size_t i = 0; i < sql.size();) {
        char c = sql[i];
        if (c == '\'' || c == '"') {
            char q = c;
            ++i;
            while (i < sql.size()) {
                if (sql[i] == q) {
                    if (i + 1 < sql.size() && sql[i + 1] == q) { i += 2; continue; }
                    ++i;
                    break;
                }
                ++i;
            }
            out += ' ';
        } else if (c == '-' && i + 1 < sql.size() && sql[i + 1] == '-') {
            while (i < sql.size() && sql[i] != '\n') ++i;
        } else if (c == '/' && i + 1 < sql.size() && sql[i + 1] == '*') {
            i += 2;
            while (i + 1 < sql.size() && !(sql[i] == '*' && sql[i + 1] == '/')) ++i;
            i = std::min(i + 2, sql.size());
        } else {
            out += c;
            ++i;
        }
    }
    return out;
}

std::string first_word(const std::string& text) {
    std::size_t b = 0;
    while (b < text.size() && std::isspace(static_cast<unsigned char>(text[b]))) ++b;
    std::size_t e = b;
    while (e < text.size() && (std::isalpha(static_cast<unsigned char>(text[e])) || text[e] == '_')) ++e;
    return upper(text.substr(b, e - b));
}

std::string quote_ident(const std::string& name) {
    std::string out = "\"";
    for (char c : name) {
        out += c;
        if (c == '"') out += '"';
    }
    out += '"';
    return out;
}

const char* sqlite_type_for(DataType t) {
    switch (t) {
        case DataType::Integer: return "INTEGER";
        case DataType::Real: return "REAL";
        case DataType::Boolean: return "INTEGER";
        case DataType::Text: return "TEXT";
        case DataType::Date: return "TEXT";
    }
    return "TEXT";
}

}  // namespace

ScreenResult screen(const SqlQuery& query) {
    std::string stripped = strip_literals(query.text);
    // allow one trailing semicolon
    auto last = stripped.find_last_not_of(" \t\r\n");
    if (last == std::string::npos) return {false, "empty statement"};
    if (stripped[last] == ';') stripped = stripped.substr(0, last);
    if (stripped.find(';') != std::string::npos) return {false, "multiple statements"};
    std::string head = first_word(stripped);
    if (head != "SELECT" && head != "WITH") return {false, "non-SELECT statement"};
    static const std::unordered_set<std::string> forbidden = {
        "INSERT", "UPDATE", "DELETE", "DROP",   "CREATE", "ALTER",  "REPLACE",
        "PRAGMA", "ATTACH", "DETACH", "VACUUM", "BEGIN",  "COMMIT", "ROLLBACK"};
    // scan remaining words for command keywords smuggled past the head check
    std::string word;
    for (std::size_t i = 0; i <= stripped.size(); ++i) {
        char c = i < stripped.size() ? stripped[i] : ' ';
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            word += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        } else {
            if (forbidden.count(word)) return {false, "forbidden keyword: " + word};
            word.clear();
        }
    }
    return {true, ""};
}

struct SqlSession::Impl {
    sqlite3* db = nullptr;
    ~Impl() {
        if (db) sqlite3_close(db);
    }
};

SqlSession::SqlSession(const std::vector<Table>& tables) : impl_(std::make_unique<Impl>()) {
    std::unordered_set<std::string> names;
    for (const auto& t : tables)
        if (!names.insert(t.schema.table_name).second)
            throw DuplicateTableName("duplicate table name: " + t.schema.table_name);

    if (sqlite3_open(":memory:", &impl_->db) != SQLITE_OK)
        throw Error("cannot open in-memory database");
    sqlite3* db = impl_->db;
    // keep un-ORDER-BY'd results in table scan order: automatic indexes would
    // silently re-sort join output and make summaries depend on the planner
    sqlite3_exec(db, "PRAGMA automatic_index=OFF", nullptr, nullptr, nullptr);

    auto exec = [db](const std::string& sql) {
        char* err = nullptr;
        if (sqlite3_exec(db, sql.c_str(), nullptr, nullptr, &err) != SQLITE_OK) {
            std::string msg = err ? err : "unknown error";
            sqlite3_free(err);
            throw Error("table registration failed: " + msg);
        }
    };

    for (const auto& t : tables) {
        std::string ddl = "CREATE TABLE " + quote_ident(t.schema.table_name) + " (";
        for (std::size_t i = 0; i < t.schema.columns.size(); ++i) {
            if (i) ddl += ", ";
            ddl += quote_ident(t.schema.columns[i].name);
            ddl += ' ';
            ddl += sqlite_type_for(t.schema.columns[i].type);
        }
        ddl += ")";
        exec(ddl);

        std::string ins = "INSERT INTO " + quote_ident(t.schema.table_name) + " VALUES (";
        for (std::size_t i = 0; i < t.schema.columns.size(); ++i) {
            if (i) ins += ", ";
            ins += '?';
        }
        ins += ")";
        sqlite3_stmt* stmt = nullptr;
        if (sqlite3_prepare_v2(db, ins.c_str(), -1, &stmt, nullptr) != SQLITE_OK)
            throw Error(std::string("insert preparation failed: ") + sqlite3_errmsg(db));
        exec("BEGIN");
        for (const auto& row : t.rows) {
            for (std::size_t i = 0; i < row.size(); ++i) {
                const Cell& cell = row[i];
                int idx = static_cast<int>(i) + 1;
                if (cell_is_null(cell))
                    sqlite3_bind_null(stmt, idx);
                else if (const auto* v = std::get_if<std::int64_t>(&cell))
                    sqlite3_bind_int64(stmt, idx, *v);
                else if (const auto* d = std::get_if<double>(&cell))
                    sqlite3_bind_double(stmt, idx, *d);
                else if (const auto* b = std::get_if<bool>(&cell))
                    sqlite3_bind_int64(stmt, idx, *b ? 1 : 0);
                else
                    sqlite3_bind_text(stmt, idx, std::get<std::string>(cell).c_str(), -1,
                                      SQLITE_TRANSIENT);
            }
            if (sqlite3_step(stmt) != SQLITE_DONE) {
                sqlite3_finalize(stmt);
                throw Error(std::string("row insert failed: ") + sqlite3_errmsg(db));
            }
            sqlite3_reset(stmt);
        }
        sqlite3_finalize(stmt);
        exec("COMMIT");
    }

    // Single-table datasets follow the `df` convention; multi-table sets use
    // real names.
    if (tables.size() == 1 && tables[0].schema.table_name != "df")
        exec("CREATE VIEW df AS SELECT * FROM " + quote_ident(tables[0].schema.table_name));
}

SqlSession::~SqlSession() = default;
SqlSession::SqlSession(SqlSession&&) noexcept = default;
SqlSession& SqlSession::operator=(SqlSession&&) noexcept = default;

SqlExecutionResult SqlSession::execute(const std::vector<SqlQuery>& queries) {
    SqlExecutionResult result;
    sqlite3* db = impl_->db;
    for (const auto& q : queries) {
        QueryResult qr;
        sqlite3_stmt* stmt = nullptr;
        if (sqlite3_prepare_v2(db, q.text.c_str(), -1, &stmt, nullptr) != SQLITE_OK) {
            qr.error = sqlite3_errmsg(db);
            result.per_query.push_back(std::move(qr));
            continue;
        }
        int ncol = sqlite3_column_count(stmt);
        for (int i = 0; i < ncol; ++i) {
            const char* name = sqlite3_column_name(stmt, i);
            qr.columns.push_back(name ? name : "");
        }
        int rc;
        while ((rc = sqlite3_step(stmt)) == SQLITE_ROW) {
            Row row;
            for (int i = 0; i < ncol; ++i) {
                switch (sqlite3_column_type(stmt, i)) {
                    case SQLITE_INTEGER: row.push_back(Cell{sqlite3_column_int64(stmt, i)}); break;
                    case SQLITE_FLOAT: row.push_back(Cell{sqlite3_column_double(stmt, i)}); break;
                    case SQLITE_NULL: row.push_back(Cell{std::monostate{}}); break;
                    default: {
                        const unsigned char* text = sqlite3_column_text(stmt, i);
                        row.push_back(Cell{std::string(text ? reinterpret_cast<const char*>(text) : "")});
                    }
                }
            }
            qr.rows.push_back(std::move(row));
        }
        if (rc != SQLITE_DONE) {
            qr.error = sqlite3_errmsg(db);
            qr.columns.clear();
            qr.rows.clear();
        }
        sqlite3_finalize(stmt);
        result.per_query.push_back(std::move(qr));
    }
    return result;
}

std::size_t SqlSession::row_count(const std::string& table_name) const {
    std::string sql = "SELECT COUNT(*) FROM " + quote_ident(table_name);
    sqlite3_stmt* stmt = nullptr;
    if (sqlite3_prepare_v2(impl_->db, sql.c_str(), -1, &stmt, nullptr) != SQLITE_OK)
        throw Error(std::string("row_count failed: ") + sqlite3_errmsg(impl_->db));
    std::size_t n = 0;
    if (sqlite3_step(stmt) == SQLITE_ROW) n = static_cast<std::size_t>(sqlite3_column_int64(stmt, 0));
    sqlite3_finalize(stmt);
    return n;
}

ValidationResult validate(const SqlExecutionResult& result) {
    ValidationResult v;
    for (std::size_t i = 0; i < result.per_query.size(); ++i) {
        const auto& qr = result.per_query[i];
        if (qr.error)
            v.reasons.push_back("query " + std::to_string(i + 1) + ": " + *qr.error);
        else if (qr.rows.empty())
            v.reasons.push_back("query " + std::to_string(i + 1) + ": empty result");
    }
    v.valid = v.reasons.empty() && !result.per_query.empty();
    return v;
}

std::string render_execution_status(const SqlExecutionResult& result) {
    std::string out;
    for (std::size_t i = 0; i < result.per_query.size(); ++i) {
        const auto& qr = result.per_query[i];
        if (i) out += "\n";
        out += "Query " + std::to_string(i + 1) + ": ";
        if (qr.error) {
            out += "ERROR: " + *qr.error;
            continue;
        }
        out += std::to_string(qr.rows.size()) + " row(s), columns [";
        for (std::size_t c = 0; c < qr.columns.size(); ++c) {
            if (c) out += ", ";
            out += qr.columns[c];
        }
        out += "]";
        if (qr.rows.empty()) out += " (empty result)";
    }
    return out;
}

}  // namespace facts
