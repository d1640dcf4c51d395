#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "facts/schema.hpp"

namespace facts {

struct SqlQuery {
    std::string text;  // a single SELECT statement (optional CTEs)
};

struct QueryResult {
    std::vector<std::string> columns;
    std::vector<Row> rows;
    std::optional<std::string> error;
};

struct SqlExecutionResult {
    std::vector<QueryResult> per_query;  // aligned 1:1 with the submitted queries
};

struct ScreenResult {
    bool accepted = false;
    std::string reason;  // set when rejected
};

struct ValidationResult {
    bool valid = false;
    std::vector<std::string> reasons;
};

// Rejects anything that is not exactly one SELECT (or WITH ... SELECT)
// statement: no DDL/DML, no PRAGMA/ATTACH-class commands, no statement lists.
ScreenResult screen(const SqlQuery& query);

// In-memory execution session over registered tables. When exactly one table
// is registered it is also addressable as `df`.
class SqlSession {
public:
    explicit SqlSession(const std::vector<Table>& tables);
    ~SqlSession();
    SqlSession(SqlSession&&) noexcept;
    SqlSession& operator=(SqlSession&&) noexcept;
    SqlSession(const SqlSession&) = delete;
    SqlSession& operator=(const SqlSession&) = delete;

    // Each query runs independently; failures are captured per query and
    // never abort the batch. Callers must screen() first.
    SqlExecutionResult execute(const std::vector<SqlQuery>& queries);

    std::size_t row_count(const std::string& table_name) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

inline SqlSession register_tables(const std::vector<Table>& tables) { return SqlSession(tables); }

// Valid iff every result has no error and at least one row.
ValidationResult validate(const SqlExecutionResult& result);

// Value-free rendering for council prompts and error traces: per-query error
// text, row count and output column names. Cell values never appear here —
// prompts carry only schema-level information.
std::string render_execution_status(const SqlExecutionResult& result);

}  // namespace facts
