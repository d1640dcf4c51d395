#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>

#include "facts/eval.hpp"
#include "facts/store.hpp"
#include "facts/workflow.hpp"

using namespace facts;

namespace {

const char* kYesSpec = "Decision: YES\nFeedback: Question is good";
const char* kYesSql = "Decision: YES\nFeedback: SQL query is good";
const char* kYesAlign = "Decision: YES\nFeedback: SQL and template are well-aligned";
const char* kYesSummary = "Decision: YES\nFeedback: Summary is good";

Table accounts() {
    std::string csv =
        "name,balance\n"
        "Alice,200000.0\n"
        "Bob,150000.0\n"
        "Charlie,120000.0\n"
        "Dana,90000.0\n";
    return load_table(csv, TableFormat::CsvWithHeader, "accounts");
}

const char* kQuery = "Who are the three accounts with the highest savings balances?";

struct Rig {
    std::shared_ptr<ScriptedBackend> backend;
    Agent agent;
    Council council;

    explicit Rig(std::vector<ScriptEntry> script)
        : backend(std::make_shared<ScriptedBackend>(std::move(script))),
          agent{backend, "agent"},
          council({{"m1", backend, "m1"}, {"m2", backend, "m2"}, {"m3", backend, "m3"}}) {}
};

// script fragments for a clean three-stage run
std::vector<ScriptEntry> happy_script() {
    return {
        {"generate ONE specific, detailed question",
         "Specification: Should ties in balance be broken by account name?", 1},
        {"generate ONE specific, detailed question",
         "Specification: Return exactly the top 3 rows ordered by balance descending.", 1},
        {"You are evaluating a question or filtering rule", kYesSpec, 6},
        {"Do these specifications suffice", "YES", 1},
        {"generate a valid DuckDB SQL query",
         "SQL query:\nSELECT name, balance FROM df ORDER BY balance DESC LIMIT 3;", 1},
        {"You are evaluating a SQL query execution", kYesSql, 3},
        {"generate a Jinja2 template",
         "Jinja2 template:\n{% if values|length > 0 %}The three accounts with the highest savings "
         "balances are:\n{% for row in values %}- {{ row[\"name\"] }} with a savings balance of "
         "{{ row[\"balance\"] }}.\n{% endfor %}Overall, these represent the top savers by balance "
         "in the dataset.{% else %}No results were found.{% endif %}", 1},
        {"aligns with a Jinja2 template", kYesAlign, 3},
        {"You are evaluating a generated summary", kYesSummary, 3},
    };
}

WorkflowConfig config() {
    WorkflowConfig c;
    c.fixed_created_at = "2026-01-01T00:00:00Z";
    return c;
}

}  // namespace

TEST_CASE("stage1 accepts specifications until sufficiency") {
    Rig rig(happy_script());
    auto tables = std::vector<Table>{accounts()};
    Stage1Result r = stage1(rig.agent, rig.council, kQuery, {tables[0].schema}, config());
    REQUIRE(r.specifications.size() == 2);
    CHECK(r.specifications[0].kind == GuidedSpecification::Kind::GuidedQuestion);
    CHECK(r.specifications[1].kind == GuidedSpecification::Kind::FilteringRule);
    CHECK(r.generation_calls == 2);
    CHECK(r.judge_rounds == 2);
}

TEST_CASE("stage1 skips duplicates without convening the council") {
    Rig rig({
        {"generate ONE specific, detailed question", "Specification: Is balance numeric?", 2},
        {"generate ONE specific, detailed question", "Specification: Only top three rows?", 1},
        {"You are evaluating a question or filtering rule", kYesSpec, 6},
        {"Do these specifications suffice", "YES", 1},
    });
    Stage1Result r = stage1(rig.agent, rig.council, kQuery, {accounts().schema}, config());
    CHECK(r.specifications.size() == 2);
    CHECK(r.generation_calls == 3);  // duplicate cost one generation call
    CHECK(r.judge_rounds == 2);      // but no judge round
}

TEST_CASE("stage1 revises after council NO and succeeds") {
    Rig rig({
        {"Revise the specification",
         "Specification: Should ties in balance be broken deterministically by name?", 1},
        {"generate ONE specific, detailed question", "Specification: vague thing?", 1},
        {"generate ONE specific, detailed question", "Specification: Top three only?", 1},
        {"You are evaluating a question or filtering rule",
         "Decision: NO\nFeedback: too vague to guide SQL", 3},
        {"You are evaluating a question or filtering rule", kYesSpec, 6},
        {"Do these specifications suffice", "YES", 1},
    });
    Stage1Result r = stage1(rig.agent, rig.council, kQuery, {accounts().schema}, config());
    REQUIRE(r.specifications.size() == 2);
    CHECK(r.specifications[0].text.find("deterministically") != std::string::npos);
    CHECK(r.generation_calls == 3);  // gen, revise, gen
    CHECK(r.judge_rounds == 3);
}

TEST_CASE("stage1 exhausts all slots under an all-NO council") {
    Rig rig({
        {"Revise the specification", "Specification: revised?", -1},
        {"generate ONE specific, detailed question", "Specification: anything?", -1},
        {"You are evaluating a question or filtering rule",
         "Decision: NO\nFeedback: never good enough", -1},
    });
    WorkflowConfig cfg = config();
    try {
        stage1(rig.agent, rig.council, kQuery, {accounts().schema}, cfg);
        FAIL("expected EmptySpecificationSet");
    } catch (const EmptySpecificationSet&) {
    }
    // K_q slots, each: 1 generation + P_q revisions, each followed by a judge
    // round of 3 member calls
    std::size_t expected_gen = 10 * (1 + 3);
    std::size_t expected_judge_calls = 10 * (1 + 3) * 3;
    CHECK(rig.backend->call_count() == expected_gen + expected_judge_calls);
}

TEST_CASE("stage2 produces validated sql on the happy path") {
    Rig rig(happy_script());
    auto tables = std::vector<Table>{accounts()};
    std::vector<GuidedSpecification> specs = {
        {GuidedSpecification::Kind::FilteringRule, "Top three by balance."}};
    Stage2Result r = stage2(rig.agent, rig.council, kQuery, specs, tables, config());
    REQUIRE(r.queries.size() == 1);
    CHECK(r.queries[0].text.find("ORDER BY balance DESC") != std::string::npos);
    CHECK(r.generation_calls == 1);
    CHECK(r.judge_rounds == 1);
    REQUIRE(r.exec.per_query.size() == 1);
    CHECK(r.exec.per_query[0].rows.size() == 3);
}

TEST_CASE("stage2 recovers from a faulty first attempt via execution feedback") {
    Rig rig({
        {"Revise the SQL", "SQL query:\nSELECT name, balance FROM df ORDER BY balance DESC LIMIT 3;",
         1},
        {"generate a valid DuckDB SQL query",
         "SQL query:\nSELECT nonexistent_column FROM df;", 1},
        {"You are evaluating a SQL query execution",
         "Decision: NO\nFeedback: query references a missing column", 3},
        {"You are evaluating a SQL query execution", kYesSql, 3},
    });
    auto tables = std::vector<Table>{accounts()};
    std::vector<GuidedSpecification> specs = {
        {GuidedSpecification::Kind::FilteringRule, "Top three by balance."}};
    Stage2Result r = stage2(rig.agent, rig.council, kQuery, specs, tables, config());
    CHECK(r.generation_calls == 2);
    CHECK(r.judge_rounds == 2);
    CHECK_FALSE(r.exec.per_query[0].error.has_value());
}

TEST_CASE("stage2 patience exhaustion raises with the documented ceiling") {
    Rig rig({
        {"Revise the SQL", "SQL query:\nSELECT name FROM df;", -1},
        {"generate a valid DuckDB SQL query", "SQL query:\nSELECT name FROM df;", -1},
        {"You are evaluating a SQL query execution", "Decision: NO\nFeedback: not appropriate",
         -1},
    });
    auto tables = std::vector<Table>{accounts()};
    std::vector<GuidedSpecification> specs = {
        {GuidedSpecification::Kind::FilteringRule, "Top three."}};
    try {
        stage2(rig.agent, rig.council, kQuery, specs, tables, config());
        FAIL("expected SqlPatienceExhausted");
    } catch (const SqlPatienceExhausted&) {
    }
    // P_sql rounds: 3 generation/revision calls + 3 judge rounds x 3 members
    CHECK(rig.backend->call_count() == 3 + 3 * 3);
}

TEST_CASE("stage3 happy path aligns template with sql results") {
    Rig rig(happy_script());
    auto tables = std::vector<Table>{accounts()};
    std::vector<GuidedSpecification> specs = {
        {GuidedSpecification::Kind::FilteringRule, "Top three by balance."}};
    Stage2Result s2 = stage2(rig.agent, rig.council, kQuery, specs, tables, config());
    Stage3Result s3 = stage3(rig.agent, rig.council, kQuery, s2.queries, s2.exec,
                             {tables[0].schema}, tables, config());
    CHECK(s3.generation_calls == 1);
    CHECK(s3.judge_rounds == 1);
    auto rendered = render(s3.tmpl, binding_from(s3.exec));
    CHECK(rendered.find("Alice with a savings balance of 200000.0") != std::string::npos);
}

TEST_CASE("stage3 refinement fixes a misaligned template") {
    auto script = std::vector<ScriptEntry>{
        {"Refine the template",
         "Jinja2 template:\n{% for row in values %}{{ row[\"name\"] }} {% endfor %}", 1},
        {"generate a Jinja2 template",
         "Jinja2 template:\n{% for row in values %}{{ row[\"wrong_field\"] }}{% endfor %}", 1},
        {"aligns with a Jinja2 template", kYesAlign, 6},
    };
    Rig rig(script);
    auto tables = std::vector<Table>{accounts()};
    std::vector<SqlQuery> sql = {{"SELECT name, balance FROM df ORDER BY balance DESC LIMIT 3"}};
    SqlSession session(tables);
    auto exec = session.execute(sql);
    Stage3Result r = stage3(rig.agent, rig.council, kQuery, sql, exec, {tables[0].schema}, tables,
                            config());
    CHECK(r.generation_calls == 2);
    CHECK(render(r.tmpl, binding_from(r.exec)).find("Alice") != std::string::npos);
}

TEST_CASE("stage3 patience exhaustion raises with the documented ceiling") {
    Rig rig({
        {"Refine the template",
         "Jinja2 template:\n{% for row in values %}{{ row[\"name\"] }}{% endfor %}", -1},
        {"generate a Jinja2 template",
         "Jinja2 template:\n{% for row in values %}{{ row[\"name\"] }}{% endfor %}", -1},
        {"aligns with a Jinja2 template", "Decision: NO\nFeedback: formatting is wrong", -1},
    });
    auto tables = std::vector<Table>{accounts()};
    std::vector<SqlQuery> sql = {{"SELECT name FROM df"}};
    SqlSession session(tables);
    auto exec = session.execute(sql);
    try {
        stage3(rig.agent, rig.council, kQuery, sql, exec, {tables[0].schema}, tables, config());
        FAIL("expected TemplatePatienceExhausted");
    } catch (const TemplatePatienceExhausted&) {
    }
    CHECK(rig.backend->call_count() == 3 + 3 * 3);  // P_tpl rounds
}

TEST_CASE("build_offline_template composes the three stages") {
    Rig rig(happy_script());
    auto tables = std::vector<Table>{accounts()};
    OfflineTemplate tmpl = build_offline_template(rig.agent, rig.council, kQuery, tables, config());
    CHECK(tmpl.user_query == kQuery);
    REQUIRE(tmpl.schema_fingerprints.size() == 1);
    CHECK(tmpl.schema_fingerprints[0] == schema_fingerprint(tables[0].schema));
    REQUIRE(tmpl.sql_queries.size() == 1);
    CHECK(tmpl.provenance.created_at == "2026-01-01T00:00:00Z");
    CHECK(tmpl.provenance.council_member_ids.size() == 3);
    CHECK(tmpl.provenance.accepted_specifications.size() == 2);
    CHECK(tmpl.provenance.iteration_counts.at("stage1_generation_calls") == 2);
    CHECK(tmpl.provenance.iteration_counts.at("stage2_judge_rounds") == 1);
    CHECK(tmpl.provenance.iteration_counts.at("stage3_generation_calls") == 1);
}

TEST_CASE("apply_offline_template uses zero LLM calls") {
    Rig rig(happy_script());
    auto tables = std::vector<Table>{accounts()};
    OfflineTemplate tmpl = build_offline_template(rig.agent, rig.council, kQuery, tables, config());
    std::size_t calls_after_build = total_llm_calls(rig.agent, rig.council);

    Summary s = apply_offline_template(tmpl, tables);
    CHECK(s.text.find("Alice with a savings balance of 200000.0") != std::string::npos);
    CHECK(total_llm_calls(rig.agent, rig.council) == calls_after_build);

    // value-permuted same-schema table also applies cleanly
    Table permuted = accounts();
    std::rotate(permuted.rows.begin(), permuted.rows.begin() + 2, permuted.rows.end());
    Summary s2 = apply_offline_template(tmpl, {permuted});
    CHECK(s2.text.find("Alice") != std::string::npos);  // ORDER BY still finds the top saver
    CHECK(total_llm_calls(rig.agent, rig.council) == calls_after_build);
}

TEST_CASE("apply_offline_template rejects mismatched schemas") {
    Rig rig(happy_script());
    auto tables = std::vector<Table>{accounts()};
    OfflineTemplate tmpl = build_offline_template(rig.agent, rig.council, kQuery, tables, config());

    Table other = load_table(std::string("x,y\n1,2\n"), TableFormat::CsvWithHeader, "accounts");
    CHECK_THROWS_AS(apply_offline_template(tmpl, {other}), FingerprintMismatch);
    CHECK_THROWS_AS(apply_offline_template(tmpl, {}), FingerprintMismatch);
}

TEST_CASE("no cell value ever reaches a prompt") {
    // sentinels that would be conspicuous in any prompt text
    std::string csv =
        "name,balance\n"
        "XXSENTINEL_ALICEXX,987654321.0\n"
        "XXSENTINEL_BOBXX,876543210.0\n"
        "XXSENTINEL_CAROLXX,765432109.0\n";
    Table t = load_table(csv, TableFormat::CsvWithHeader, "accounts");
    Rig rig(happy_script());
    build_offline_template(rig.agent, rig.council, kQuery, {t}, config());
    for (const auto& call : rig.backend->call_log()) {
        CHECK(call.prompt.find("XXSENTINEL") == std::string::npos);
        CHECK(call.prompt.find("987654321") == std::string::npos);
        CHECK(call.prompt.find("765432109") == std::string::npos);
    }
    CHECK(rig.backend->call_count() > 0);
}

TEST_CASE("single_call_template skips the agentic loop") {
    Rig good({
        {"generate an entire offline template in a single step",
         "SQL queries:\nSELECT name, balance FROM df ORDER BY balance DESC LIMIT 3;\n\n"
         "Jinja2 template:\n{% for row in values %}{{ row[\"name\"] }} {% endfor %}", 1},
    });
    auto tables = std::vector<Table>{accounts()};
    SingleCallResult r = single_call_template(good.agent, kQuery, tables, config());
    CHECK(r.sql_ok);
    CHECK(good.backend->call_count() == 1);
    CHECK(r.tmpl.sql_queries.size() == 1);

    Rig bad({
        {"generate an entire offline template in a single step",
         "SQL queries:\nSELECT missing_col FROM df;\n\n"
         "Jinja2 template:\n{{ values | length }}", 1},
    });
    SingleCallResult rb = single_call_template(bad.agent, kQuery, tables, config());
    CHECK_FALSE(rb.sql_ok);  // no feedback loop to recover with
}

TEST_CASE("summarize builds once then serves from the store") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "facts-workflow-store-test";
    fs::remove_all(dir);
    fs::create_directories(dir);
    TemplateStore store(dir);

    Rig rig(happy_script());
    auto tables = std::vector<Table>{accounts()};
    Summary first = summarize(rig.agent, rig.council, store, kQuery, tables, config());
    CHECK_FALSE(first.from_store);
    CHECK(first.llm_calls_used > 0);
    CHECK(store.size() == 1);

    std::size_t calls = total_llm_calls(rig.agent, rig.council);
    Summary second = summarize(rig.agent, rig.council, store, kQuery, tables, config());
    CHECK(second.from_store);
    CHECK(second.llm_calls_used == 0);
    CHECK(total_llm_calls(rig.agent, rig.council) == calls);
    CHECK(second.text == first.text);

    // a differently-phrased but identical query also hits
    Summary third = summarize(rig.agent, rig.council, store,
                              "  who ARE the three accounts with the highest savings balances? ",
                              tables, config());
    CHECK(third.from_store);
    fs::remove_all(dir);
}

TEST_CASE("a failed summary validation is recorded as a warning, not a failure") {
    auto script = happy_script();
    // replace the summary verdict with NO
    for (auto& e : script)
        if (e.match == "You are evaluating a generated summary")
            e.response = "Decision: NO\nFeedback: summary tone is off";
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "facts-workflow-warn-test";
    fs::remove_all(dir);
    fs::create_directories(dir);
    TemplateStore store(dir);
    Rig rig(script);
    auto tables = std::vector<Table>{accounts()};
    Summary s = summarize(rig.agent, rig.council, store, kQuery, tables, config());
    CHECK_FALSE(s.text.empty());
    auto stored = store.lookup(kQuery, {tables[0].schema});
    REQUIRE(stored.has_value());
    REQUIRE_FALSE(stored->provenance.warnings.empty());
    CHECK(stored->provenance.warnings[0].find("summary validation NO") != std::string::npos);
    fs::remove_all(dir);
}
