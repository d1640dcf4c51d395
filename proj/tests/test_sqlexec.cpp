#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "facts/sqlexec.hpp"

using namespace facts;

namespace {

Table make_accounts() {
    std::string csv =
        "name,balance\n"
        "alice,200000\n"
        "bob,150000\n"
        "carol,120000\n"
        "dave,90000\n";
    return load_table(csv, TableFormat::CsvWithHeader, "accounts");
}

}  // namespace

TEST_CASE("screen accepts single SELECT statements") {
    CHECK(screen({"SELECT * FROM t"}).accepted);
    CHECK(screen({"select a, b from t where a > 1"}).accepted);
    CHECK(screen({"SELECT 1;"}).accepted);  // trailing semicolon ok
    CHECK(screen({"WITH x AS (SELECT 1 AS a) SELECT a FROM x"}).accepted);
    CHECK(screen({"  \n SELECT 1"}).accepted);
}

TEST_CASE("screen rejects non-SELECT and multi-statement input") {
    CHECK_FALSE(screen({"DROP TABLE t"}).accepted);
    CHECK_FALSE(screen({"INSERT INTO t VALUES (1)"}).accepted);
    CHECK_FALSE(screen({"SELECT 1; SELECT 2"}).accepted);
    CHECK(screen({"SELECT 1; SELECT 2"}).reason == "multiple statements");
    CHECK_FALSE(screen({"PRAGMA table_info(t)"}).accepted);
    CHECK_FALSE(screen({"ATTACH DATABASE 'x' AS y"}).accepted);
    CHECK_FALSE(screen({""}).accepted);
    CHECK_FALSE(screen({"UPDATE t SET a = 1"}).accepted);
    // forbidden keyword hidden mid-query
    CHECK_FALSE(screen({"SELECT 1 FROM t; DELETE FROM t"}).accepted);
}

TEST_CASE("screen ignores keywords inside string literals") {
    CHECK(screen({"SELECT * FROM t WHERE note = 'please DROP this'"}).accepted);
    CHECK(screen({"SELECT * FROM t WHERE note = 'a;b'"}).accepted);
    CHECK(screen({"SELECT * FROM t -- DROP TABLE t\n"}).accepted);
}

TEST_CASE("execution returns typed rows in scan order") {
    SqlSession session({make_accounts()});
    auto exec = session.execute({{"SELECT name, balance FROM accounts WHERE balance > 100000"}});
    REQUIRE(exec.per_query.size() == 1);
    const auto& r = exec.per_query[0];
    REQUIRE_FALSE(r.error.has_value());
    REQUIRE(r.columns.size() == 2);
    CHECK(r.columns[0] == "name");
    REQUIRE(r.rows.size() == 3);
    CHECK(std::get<std::string>(r.rows[0][0]) == "alice");
    CHECK(std::get<std::int64_t>(r.rows[2][1]) == 120000);
}

TEST_CASE("single registered table is addressable as df") {
    SqlSession session({make_accounts()});
    auto exec = session.execute({{"SELECT COUNT(*) AS n FROM df"}});
    REQUIRE_FALSE(exec.per_query[0].error.has_value());
    CHECK(std::get<std::int64_t>(exec.per_query[0].rows[0][0]) == 4);
}

TEST_CASE("df view is absent with two tables") {
    Table a = make_accounts();
    Table b = load_table(std::string("id\n1\n"), TableFormat::CsvWithHeader, "other");
    SqlSession session({a, b});
    auto exec = session.execute({{"SELECT * FROM df"}});
    CHECK(exec.per_query[0].error.has_value());
}

TEST_CASE("duplicate table names are rejected") {
    Table a = make_accounts();
    CHECK_THROWS_AS(SqlSession({a, a}), DuplicateTableName);
}

TEST_CASE("per-query isolation captures errors without aborting the batch") {
    SqlSession session({make_accounts()});
    auto exec = session.execute({{"SELECT bogus FROM accounts"},
                                 {"SELECT name FROM accounts"}});
    REQUIRE(exec.per_query.size() == 2);
    CHECK(exec.per_query[0].error.has_value());
    CHECK_FALSE(exec.per_query[1].error.has_value());
    CHECK(exec.per_query[1].rows.size() == 4);
}

TEST_CASE("validate requires no error and at least one row per query") {
    SqlSession session({make_accounts()});
    auto ok = session.execute({{"SELECT name FROM accounts"}});
    CHECK(validate(ok).valid);

    auto empty = session.execute({{"SELECT name FROM accounts WHERE balance > 999999"}});
    ValidationResult v = validate(empty);
    CHECK_FALSE(v.valid);
    REQUIRE_FALSE(v.reasons.empty());
    CHECK(v.reasons[0].find("empty result") != std::string::npos);

    auto err = session.execute({{"SELECT nope FROM accounts"}});
    CHECK_FALSE(validate(err).valid);
}

TEST_CASE("execution status is value-free") {
    SqlSession session({make_accounts()});
    auto exec = session.execute({{"SELECT name, balance FROM accounts"}});
    std::string status = render_execution_status(exec);
    CHECK(status.find("4") != std::string::npos);        // row count
    CHECK(status.find("name") != std::string::npos);     // column names
    CHECK(status.find("alice") == std::string::npos);    // never cell values
    CHECK(status.find("200000") == std::string::npos);
}

TEST_CASE("row_count reports registered table sizes") {
    SqlSession session({make_accounts()});
    CHECK(session.row_count("accounts") == 4);
}

TEST_CASE("aggregation and ordering work") {
    SqlSession session({make_accounts()});
    auto exec = session.execute(
        {{"SELECT name, balance FROM accounts ORDER BY balance DESC LIMIT 3"}});
    const auto& r = exec.per_query[0];
    REQUIRE(r.rows.size() == 3);
    CHECK(std::get<std::string>(r.rows[0][0]) == "alice");
    CHECK(std::get<std::string>(r.rows[1][0]) == "bob");
    CHECK(std::get<std::string>(r.rows[2][0]) == "carol");
}

// A tiny independent interpreter for queries of the shape
//   SELECT <col>[, <col>] FROM t [WHERE <col> (<|>|=) <int>]
// used as an execution oracle against randomly generated integer tables.
namespace oracle {

struct Query {
    std::vector<std::string> cols;
    std::string where_col;
    char op = 0;  // 0 = no WHERE
    std::int64_t literal = 0;
};

std::vector<std::vector<std::int64_t>> run(const Table& t, const Query& q) {
    auto col_index = [&](const std::string& name) {
        for (std::size_t i = 0; i < t.schema.columns.size(); ++i)
            if (t.schema.columns[i].name == name) return i;
        throw std::runtime_error("no column");
    };
    std::vector<std::vector<std::int64_t>> out;
    for (const auto& row : t.rows) {
        if (q.op) {
            std::int64_t v = std::get<std::int64_t>(row[col_index(q.where_col)]);
            bool keep = q.op == '<' ? v < q.literal : q.op == '>' ? v > q.literal : v == q.literal;
            if (!keep) continue;
        }
        std::vector<std::int64_t> projected;
        for (const auto& c : q.cols) projected.push_back(std::get<std::int64_t>(row[col_index(c)]));
        out.push_back(std::move(projected));
    }
    return out;
}

}  // namespace oracle

TEST_CASE("engine agrees with a naive interpreter on random tables") {
    std::mt19937 rng(99);
    for (int trial = 0; trial < 60; ++trial) {
        // random 3-column integer table
        Table t;
        t.schema.table_name = "t";
        for (const char* name : {"a", "b", "c"})
            t.schema.columns.push_back({name, DataType::Integer, false});
        std::size_t n_rows = rng() % 20;
        for (std::size_t i = 0; i < n_rows; ++i)
            t.rows.push_back({Cell{std::int64_t(rng() % 10)}, Cell{std::int64_t(rng() % 10)},
                              Cell{std::int64_t(rng() % 10)}});

        oracle::Query q;
        const char* names[] = {"a", "b", "c"};
        q.cols.push_back(names[rng() % 3]);
        if (rng() % 2) q.cols.push_back(names[rng() % 3]);
        std::string sql = "SELECT ";
        for (std::size_t i = 0; i < q.cols.size(); ++i)
            sql += (i ? ", " : "") + ("\"" + q.cols[i] + "\"");
        sql += " FROM t";
        if (rng() % 2) {
            q.where_col = names[rng() % 3];
            q.op = "<>="[rng() % 3];
            q.literal = rng() % 10;
            sql += " WHERE \"" + q.where_col + "\" " + std::string(1, q.op) + " " +
                   std::to_string(q.literal);
        }

        SqlSession session({t});
        auto exec = session.execute({{sql}});
        REQUIRE_FALSE(exec.per_query[0].error.has_value());
        auto expected = oracle::run(t, q);
        REQUIRE(exec.per_query[0].rows.size() == expected.size());
        for (std::size_t i = 0; i < expected.size(); ++i)
            for (std::size_t j = 0; j < expected[i].size(); ++j)
                CHECK(std::get<std::int64_t>(exec.per_query[0].rows[i][j]) == expected[i][j]);
    }
}
