#include "facts/workflow.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <ctime>
#include <set>
#include <sstream>

#include "facts/store.hpp"

namespace facts {

namespace {

constexpr const char* kSpecGenPrompt =
    R"(Based on the table information and user query below, generate ONE specific, detailed question or filtering rule that will help guide SQL query generation.

Table Information:
{schema_text}

User Query: {user_query}

Previously generated questions and filtering rules:
{prior_specs}

Generate ONE new question or filtering rule that:
1. Is different from previously generated questions and filtering rules
2. Clarifies what specific information is needed or what information is irrelevant
3. Helps understand data relationships
4. Guides the SQL query structure

Output format:
Specification: [Your single question or filtering rule here])";

constexpr const char* kSqlGenPrompt =
    R"(Based on the table information, user query, and refined questions below, generate a valid DuckDB SQL query.

Table Information:
{schema_text}

User Query: {user_query}

Guided Specifications:
{guidance}

{naming_note}

Generate valid DuckDB SQL SELECT query that:
1. Retrieves the necessary information to answer the user query
2. Uses proper DuckDB syntax
3. {naming_rule}
4. Quotes column names exactly as they appear
5. Handles data types appropriately

Output format:
SQL queries:
[Your SQL query here])";

constexpr const char* kJinjaGenPrompt =
    R"(Based on the demonstration examples below and the current SQL result, generate a Jinja2 template.

--- Demonstration Examples ---
{demos}

--- Current Task ---
Table Information: {schema_text}
User Query: {user_query}
SQL Query: {sql}

Generate a Jinja2 template that:
1. Uses the variable name 'values' to access the data
2. Iterates with {% for row in values %}
3. Accesses fields with row["Column Name"]
4. Produces a coherent paragraph summary in the style of the examples
5. Handles empty results gracefully

Output format:
Jinja2 template:
[Your Jinja2 template here])";

constexpr const char* kSingleCallPrompt =
    R"(Based on the demonstration examples, table information, and user query below, generate an entire offline template in a single step: SQL queries plus a Jinja2 template that renders their results.

--- Demonstration Examples ---
{demos}

--- Current Task ---
Table Information:
{schema_text}

User Query: {user_query}

{naming_note}

Output format:
SQL queries:
[Your SQL query here]
Jinja2 template:
[Your Jinja2 template here])";

void substitute(std::string& text, const std::string& placeholder, const std::string& value) {
    std::string needle = "{" + placeholder + "}";
    std::size_t pos = 0;
    while ((pos = text.find(needle, pos)) != std::string::npos) {
        text.replace(pos, needle.size(), value);
        pos += value.size();
    }
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::string render_prior_specs(const std::vector<GuidedSpecification>& specs) {
    if (specs.empty()) return "None";
    std::string out;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        if (i) out += "\n";
        out += std::to_string(i + 1) + ". " + specs[i].text;
    }
    return out;
}

std::string render_demos(const std::vector<Demo>& demos) {
    if (demos.empty()) return "None";
    std::string out;
    for (std::size_t i = 0; i < demos.size(); ++i) {
        if (i) out += "\n\n";
        out += "Example " + std::to_string(i + 1) + ":\nTable Information:\n" + demos[i].schema_text +
               "\nUser Query: " + demos[i].query + "\nReference Summary: " + demos[i].reference_summary;
    }
    return out;
}

std::string join_sql(const std::vector<SqlQuery>& queries) {
    std::string out;
    for (std::size_t i = 0; i < queries.size(); ++i) {
        if (i) out += "\n";
        out += queries[i].text;
        if (out.back() != ';') out += ';';
    }
    return out;
}

std::vector<TableSchema> schemas_of(const std::vector<Table>& tables) {
    std::vector<TableSchema> out;
    for (const auto& t : tables) out.push_back(t.schema);
    return out;
}

void fill_naming(std::string& prompt, std::size_t table_count) {
    if (table_count == 1) {
        substitute(prompt, "naming_note",
                   "IMPORTANT: You are querying a pandas DataFrame named 'df' that contains the table data.");
        substitute(prompt, "naming_rule", "References the DataFrame as 'df'");
    } else {
        substitute(prompt, "naming_note",
                   "IMPORTANT: You are querying the tables listed above by their exact table names.");
        substitute(prompt, "naming_rule", "References tables by their exact quoted names");
    }
}

GuidedSpecification parse_specification(const std::string& response) {
    std::istringstream in(response);
    std::string line;
    while (std::getline(in, line)) {
        std::string l = trim(line);
        if (lower(l).rfind("specification", 0) != 0) continue;
        auto colon = l.find(':');
        if (colon == std::string::npos) continue;
        std::string text = trim(l.substr(colon + 1));
        if (text.empty()) {
            // specification may start on the next line
            while (std::getline(in, line) && trim(line).empty()) {}
            text = trim(line);
        }
        if (text.empty()) break;
        GuidedSpecification spec;
        spec.text = text;
        spec.kind = text.back() == '?' ? GuidedSpecification::Kind::GuidedQuestion
                                       : GuidedSpecification::Kind::FilteringRule;
        return spec;
    }
    throw SpecParseError("no 'Specification:' line in agent response: " + trim(response).substr(0, 80));
}

std::string strip_code_fences(const std::string& text) {
    std::string out = text;
    std::size_t pos;
    while ((pos = out.find("```")) != std::string::npos) {
        auto eol = out.find('\n', pos);
        out.erase(pos, eol == std::string::npos ? out.size() - pos : eol - pos + 1);
    }
    return out;
}

// split on statement-separating semicolons, ignoring quoted content
std::vector<SqlQuery> split_statements(const std::string& text) {
    std::vector<SqlQuery> queries;
    std::string current;
    bool in_single = false, in_double = false;
    for (char c : text) {
        if (c == '\'' && !in_double) in_single = !in_single;
        if (c == '"' && !in_single) in_double = !in_double;
        if (c == ';' && !in_single && !in_double) {
            std::string stmt = trim(current);
            if (!stmt.empty()) queries.push_back({stmt});
            current.clear();
        } else {
            current += c;
        }
    }
    std::string stmt = trim(current);
    if (!stmt.empty()) queries.push_back({stmt});
    return queries;
}

std::size_t find_marker(const std::string& text, const std::string& marker) {
    std::string lo = lower(text);
    return lo.find(lower(marker));
}

std::vector<SqlQuery> parse_sql_response(const std::string& response) {
    std::string text = strip_code_fences(response);
    std::size_t pos = find_marker(text, "sql queries:");
    std::size_t skip = 12;
    if (pos == std::string::npos) {
        pos = find_marker(text, "sql query:");
        skip = 10;
    }
    std::string body = pos == std::string::npos ? text : text.substr(pos + skip);
    // stop before a template section if the response carries both
    std::size_t tpos = find_marker(body, "jinja2 template:");
    if (tpos != std::string::npos) body = body.substr(0, tpos);
    return split_statements(body);
}

std::string parse_template_response(const std::string& response) {
    std::string text = strip_code_fences(response);
    std::size_t pos = find_marker(text, "jinja2 template:");
    std::string body = pos == std::string::npos ? text : text.substr(pos + 16);
    return trim(body);
}

// per-query screen + execute; rejected queries become error entries
SqlExecutionResult screen_and_execute(SqlSession& session, const std::vector<SqlQuery>& queries) {
    SqlExecutionResult exec;
    for (const auto& q : queries) {
        ScreenResult sr = screen(q);
        if (!sr.accepted) {
            QueryResult qr;
            qr.error = "rejected by screen: " + sr.reason;
            exec.per_query.push_back(std::move(qr));
            continue;
        }
        SqlExecutionResult one = session.execute({q});
        exec.per_query.push_back(std::move(one.per_query[0]));
    }
    return exec;
}

bool render_handles_empty(const Jinja2Template& tmpl, std::size_t query_count) {
    RenderBinding empty;
    empty.query_rows.resize(std::max<std::size_t>(query_count, 1));
    try {
        render(tmpl, empty);
        return true;
    } catch (const Error&) {
        return false;
    }
}

std::string now_iso8601() {
    std::time_t t = std::time(nullptr);
    char buf[32];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

std::string Agent::ask(const std::string& prompt) const {
    ChatRequest req{model_id, prompt, 0.0, 4096};
    return with_retry(*client, req, 3).text;
}

std::string normalize_query(const std::string& query) {
    std::string out;
    bool pending_space = false;
    for (char c : query) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!out.empty()) pending_space = true;
        } else {
            if (pending_space) out += ' ';
            pending_space = false;
            out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        }
    }
    return out;
}

GuidedSpecification generate_specification(const Agent& agent, const std::string& query,
                                           const std::vector<TableSchema>& schemas,
                                           const std::vector<GuidedSpecification>& accepted) {
    std::string prompt = kSpecGenPrompt;
    substitute(prompt, "schema_text", render_schema_text(schemas));
    substitute(prompt, "user_query", query);
    substitute(prompt, "prior_specs", render_prior_specs(accepted));
    return parse_specification(agent.ask(prompt));
}

GuidedSpecification revise_specification(const Agent& agent, const GuidedSpecification& spec,
                                         const std::string& feedback, const std::string& query,
                                         const std::vector<TableSchema>& schemas,
                                         const std::vector<GuidedSpecification>& accepted) {
    std::string prompt = kSpecGenPrompt;
    substitute(prompt, "schema_text", render_schema_text(schemas));
    substitute(prompt, "user_query", query);
    substitute(prompt, "prior_specs", render_prior_specs(accepted));
    prompt += "\n\nPrevious specification:\n" + spec.text + "\n\nCouncil feedback:\n" + feedback +
              "\n\nRevise the specification to address the feedback, keeping the same output format.";
    return parse_specification(agent.ask(prompt));
}

bool sufficient(const Agent& agent, const std::string& query,
                const std::vector<GuidedSpecification>& accepted, const WorkflowConfig& config) {
    if (static_cast<int>(accepted.size()) >= config.max_specifications) return true;
    if (static_cast<int>(accepted.size()) < config.min_specs_for_sufficiency) return false;
    std::string prompt = "User Query: " + query + "\n\nAccepted specifications:\n" +
                         render_prior_specs(accepted) +
                         "\n\nDo these specifications suffice to write SQL for the query? YES/NO";
    std::string answer;
    try {
        answer = agent.ask(prompt);
    } catch (const Error&) {
        return false;
    }
    std::string head = lower(trim(answer));
    return head.rfind("yes", 0) == 0 || head.find("decision: yes") != std::string::npos;
}

Stage1Result stage1(const Agent& agent, const Council& council, const std::string& query,
                    const std::vector<TableSchema>& schemas, const WorkflowConfig& config) {
    Stage1Result result;
    std::string schema_text = render_schema_text(schemas);
    auto is_duplicate = [&](const std::string& text) {
        return std::any_of(result.specifications.begin(), result.specifications.end(),
                           [&](const GuidedSpecification& s) { return s.text == text; });
    };
    auto judge_spec = [&](const GuidedSpecification& spec) {
        EvaluationContext ctx;
        ctx.set("schema_text", schema_text)
            .set("user_query", query)
            .set("prior_specs", render_prior_specs(result.specifications));
        ++result.judge_rounds;
        return council.judge(ArtifactKind::GuidedSpecification, spec.text, ctx);
    };

    for (int k = 0; k < config.max_specifications; ++k) {
        GuidedSpecification spec;
        try {
            ++result.generation_calls;
            spec = generate_specification(agent, query, schemas, result.specifications);
        } catch (const SpecParseError&) {
            // one free re-ask; a second failure forfeits this slot
            try {
                ++result.generation_calls;
                spec = generate_specification(agent, query, schemas, result.specifications);
            } catch (const SpecParseError&) {
                continue;
            }
        }
        if (is_duplicate(spec.text)) continue;  // no council call for exact duplicates

        CouncilVerdict verdict = judge_spec(spec);
        int t = 0;
        while (verdict.decision != Decision::Yes && t < config.spec_patience) {
            try {
                ++result.generation_calls;
                spec = revise_specification(agent, spec, verdict.consensus_feedback, query, schemas,
                                            result.specifications);
            } catch (const SpecParseError&) {
                ++t;
                continue;
            }
            verdict = judge_spec(spec);
            ++t;
        }
        if (verdict.decision == Decision::Yes && !is_duplicate(spec.text))
            result.specifications.push_back(spec);
        if (sufficient(agent, query, result.specifications, config)) break;
    }
    if (result.specifications.empty())
        throw EmptySpecificationSet("stage1 exhausted " + std::to_string(config.max_specifications) +
                                    " slots with zero accepted specifications");
    return result;
}

namespace {

std::string sql_generation_prompt(const std::string& query, const std::vector<GuidedSpecification>& specs,
                                  const std::vector<TableSchema>& schemas, std::size_t table_count) {
    std::string prompt = kSqlGenPrompt;
    substitute(prompt, "schema_text", render_schema_text(schemas));
    substitute(prompt, "user_query", query);
    substitute(prompt, "guidance", render_prior_specs(specs));
    fill_naming(prompt, table_count);
    return prompt;
}

}  // namespace

Stage2Result stage2(const Agent& agent, const Council& council, const std::string& query,
                    const std::vector<GuidedSpecification>& specs, const std::vector<Table>& tables,
                    const WorkflowConfig& config) {
    if (specs.empty()) throw Error("stage2 requires accepted specifications");
    if (tables.empty()) throw Error("stage2 requires at least one table");

    Stage2Result result;
    std::vector<TableSchema> schemas = schemas_of(tables);
    std::string schema_text = render_schema_text(schemas);
    std::string guidance = render_prior_specs(specs);
    SqlSession session = register_tables(tables);

    std::vector<SqlQuery> current;
    std::string feedback;
    std::string last_status;

    for (int t = 0; t < config.sql_patience; ++t) {
        std::string response;
        ++result.generation_calls;
        if (t == 0) {
            response = agent.ask(sql_generation_prompt(query, specs, schemas, tables.size()));
        } else {
            std::string prompt = sql_generation_prompt(query, specs, schemas, tables.size());
            prompt += "\n\nPrevious SQL:\n" + join_sql(current) + "\n\nExecution trace:\n" + last_status +
                      "\n\nCouncil feedback:\n" + feedback +
                      "\n\nRevise the SQL to address the errors and feedback, keeping the same output format.";
            response = agent.ask(prompt);
        }
        std::vector<SqlQuery> candidate = parse_sql_response(response);
        if (candidate.empty()) {
            feedback = "agent response contained no SQL statement";
            last_status = feedback;
            current.clear();
            continue;
        }
        current = candidate;
        SqlExecutionResult exec = screen_and_execute(session, current);
        last_status = render_execution_status(exec);
        ValidationResult valid = validate(exec);

        EvaluationContext ctx;
        ctx.set("schema_text", schema_text).set("guidance", guidance).set("execution_result", last_status);
        ++result.judge_rounds;
        CouncilVerdict verdict = council.judge(ArtifactKind::SqlQuery, join_sql(current), ctx);

        if (verdict.decision == Decision::Yes && valid.valid) {
            result.queries = current;
            result.exec = std::move(exec);
            return result;
        }
        feedback = verdict.consensus_feedback;
        for (const auto& reason : valid.reasons) feedback += "; " + reason;
    }
    throw SqlPatienceExhausted(feedback, last_status);
}

namespace {

std::string jinja_generation_prompt(const std::string& query, const std::vector<SqlQuery>& sql,
                                    const std::vector<TableSchema>& schemas,
                                    const WorkflowConfig& config) {
    std::string prompt = kJinjaGenPrompt;
    substitute(prompt, "demos", render_demos(config.demos));
    substitute(prompt, "schema_text", render_schema_text(schemas));
    substitute(prompt, "user_query", query);
    substitute(prompt, "sql", join_sql(sql));
    return prompt;
}

}  // namespace

Stage3Result stage3(const Agent& agent, const Council& council, const std::string& query,
                    const std::vector<SqlQuery>& sql, const SqlExecutionResult& exec,
                    const std::vector<TableSchema>& schemas, const std::vector<Table>& tables,
                    const WorkflowConfig& config) {
    Stage3Result result;
    result.queries = sql;
    result.exec = exec;
    std::string schema_text = render_schema_text(schemas);
    std::string feedback;
    std::string last_report = "no template generated";
    std::string last_template_source;

    for (int t = 0; t < config.template_patience; ++t) {
        std::string response;
        ++result.generation_calls;
        if (t == 0) {
            response = agent.ask(jinja_generation_prompt(query, result.queries, schemas, config));
        } else {
            // SQL and template may be refined together
            std::string prompt = jinja_generation_prompt(query, result.queries, schemas, config);
            prompt += "\n\nPrevious Jinja2 template:\n" + last_template_source +
                      "\n\nAlignment and council feedback:\n" + feedback +
                      "\n\nRefine the template (and the SQL if needed) to fix the issues. If you change "
                      "the SQL, include an 'SQL queries:' section before the 'Jinja2 template:' section.";
            response = agent.ask(prompt);
        }

        // optional SQL refinement in the same response
        if (t > 0) {
            std::size_t sql_pos = find_marker(response, "sql queries:");
            if (sql_pos != std::string::npos) {
                std::vector<SqlQuery> revised = parse_sql_response(response);
                if (!revised.empty() && join_sql(revised) != join_sql(result.queries)) {
                    SqlSession session = register_tables(tables);
                    SqlExecutionResult new_exec = screen_and_execute(session, revised);
                    ValidationResult valid = validate(new_exec);
                    if (valid.valid) {
                        result.queries = revised;
                        result.exec = std::move(new_exec);
                    } else {
                        feedback = "revised SQL invalid: " + render_execution_status(new_exec);
                        last_report = feedback;
                        continue;
                    }
                }
            }
        }

        std::string source = parse_template_response(response);
        last_template_source = source;
        Jinja2Template tmpl;
        try {
            tmpl = parse_template(source);
        } catch (const Error& e) {
            feedback = std::string("template parse failure: ") + e.what();
            last_report = feedback;
            continue;  // parse failure costs one patience unit, no judge round
        }

        AlignmentReport report = check_alignment(tmpl, result.exec);
        last_report = report.to_text();

        EvaluationContext ctx;
        ctx.set("schema_text", schema_text).set("sql", join_sql(result.queries));
        ++result.judge_rounds;
        CouncilVerdict verdict = council.judge(ArtifactKind::SqlTemplateAlignment, source, ctx);

        bool empty_safe = render_handles_empty(tmpl, result.exec.per_query.size());
        if (verdict.decision == Decision::Yes && report.aligned && empty_safe) {
            result.tmpl = std::move(tmpl);
            return result;
        }
        feedback = verdict.consensus_feedback;
        if (!report.aligned) feedback += "; alignment: " + report.to_text();
        if (!empty_safe) feedback += "; template fails on empty results";
    }
    throw TemplatePatienceExhausted(last_report);
}

OfflineTemplate build_offline_template(const Agent& agent, const Council& council,
                                       const std::string& query, const std::vector<Table>& tables,
                                       const WorkflowConfig& config) {
    if (tables.empty()) throw Error("build_offline_template requires at least one table");
    std::vector<TableSchema> schemas = schemas_of(tables);

    Stage1Result s1 = stage1(agent, council, query, schemas, config);
    Stage2Result s2 = stage2(agent, council, query, s1.specifications, tables, config);
    Stage3Result s3 = stage3(agent, council, query, s2.queries, s2.exec, schemas, tables, config);

    OfflineTemplate tmpl;
    tmpl.user_query = query;
    for (const auto& s : schemas) tmpl.schema_fingerprints.push_back(schema_fingerprint(s));
    tmpl.sql_queries = s3.queries;
    tmpl.jinja2_template = s3.tmpl.source;
    tmpl.provenance.created_at =
        config.fixed_created_at.empty() ? now_iso8601() : config.fixed_created_at;
    for (const auto& m : council.members()) tmpl.provenance.council_member_ids.push_back(m.member_id);
    tmpl.provenance.accepted_specifications = s1.specifications;
    tmpl.provenance.iteration_counts = {
        {"stage1_generation_calls", s1.generation_calls}, {"stage1_judge_rounds", s1.judge_rounds},
        {"stage2_generation_calls", s2.generation_calls}, {"stage2_judge_rounds", s2.judge_rounds},
        {"stage3_generation_calls", s3.generation_calls}, {"stage3_judge_rounds", s3.judge_rounds},
    };
    return tmpl;
}

Summary apply_offline_template(const OfflineTemplate& tmpl, const std::vector<Table>& tables) {
    auto start = std::chrono::steady_clock::now();
    if (tables.size() != tmpl.schema_fingerprints.size())
        throw FingerprintMismatch(std::to_string(tmpl.schema_fingerprints.size()) + " fingerprints",
                                  std::to_string(tables.size()) + " tables");
    for (std::size_t i = 0; i < tables.size(); ++i) {
        std::string got = schema_fingerprint(tables[i].schema);
        if (got != tmpl.schema_fingerprints[i])
            throw FingerprintMismatch(tmpl.schema_fingerprints[i], got);
    }
    try {
        SqlSession session = register_tables(tables);
        for (const auto& q : tmpl.sql_queries) {
            ScreenResult sr = screen(q);
            if (!sr.accepted) throw ApplicationError("stored query rejected by screen: " + sr.reason);
        }
        SqlExecutionResult exec = session.execute(tmpl.sql_queries);
        for (const auto& qr : exec.per_query)
            if (qr.error) throw ApplicationError("stored query failed: " + *qr.error);
        Jinja2Template parsed = parse_template(tmpl.jinja2_template);
        Summary summary;
        summary.text = render(parsed, binding_from(exec));
        summary.llm_calls_used = 0;
        summary.wall_time = std::chrono::steady_clock::now() - start;
        return summary;
    } catch (const ApplicationError&) {
        throw;
    } catch (const Error& e) {
        throw ApplicationError(std::string("template application failed: ") + e.what());
    }
}

SingleCallResult single_call_template(const Agent& agent, const std::string& query,
                                      const std::vector<Table>& tables, const WorkflowConfig& config) {
    if (tables.empty()) throw Error("single_call_template requires at least one table");
    std::vector<TableSchema> schemas = schemas_of(tables);
    std::string prompt = kSingleCallPrompt;
    substitute(prompt, "demos", render_demos(config.demos));
    substitute(prompt, "schema_text", render_schema_text(schemas));
    substitute(prompt, "user_query", query);
    fill_naming(prompt, tables.size());

    std::string response = agent.ask(prompt);
    SingleCallResult result;
    result.tmpl.user_query = query;
    for (const auto& s : schemas) result.tmpl.schema_fingerprints.push_back(schema_fingerprint(s));
    result.tmpl.sql_queries = parse_sql_response(response);
    result.tmpl.jinja2_template = parse_template_response(response);
    result.tmpl.provenance.created_at =
        config.fixed_created_at.empty() ? now_iso8601() : config.fixed_created_at;
    result.tmpl.provenance.iteration_counts = {{"single_call", 1}};

    if (result.tmpl.sql_queries.empty()) {
        result.exec_status = "no SQL statement in response";
        return result;
    }
    SqlSession session = register_tables(tables);
    SqlExecutionResult exec = screen_and_execute(session, result.tmpl.sql_queries);
    result.exec_status = render_execution_status(exec);
    result.sql_ok = validate(exec).valid;
    return result;
}

std::size_t total_llm_calls(const Agent& agent, const Council& council) {
    std::vector<const LlmClient*> seen;
    std::size_t total = 0;
    auto add = [&](const std::shared_ptr<LlmClient>& c) {
        if (!c) return;
        if (std::find(seen.begin(), seen.end(), c.get()) != seen.end()) return;
        seen.push_back(c.get());
        total += c->call_count();
    };
    add(agent.client);
    for (const auto& m : council.members()) add(m.provider);
    return total;
}

Summary summarize(const Agent& agent, const Council& council, TemplateStore& store,
                  const std::string& query, const std::vector<Table>& tables,
                  const WorkflowConfig& config) {
    auto start = std::chrono::steady_clock::now();
    std::size_t calls_before = total_llm_calls(agent, council);
    std::vector<TableSchema> schemas = schemas_of(tables);

    std::optional<OfflineTemplate> tmpl = store.lookup(query, schemas);
    bool from_store = tmpl.has_value();
    if (!tmpl) {
        tmpl = build_offline_template(agent, council, query, tables, config);
        store.save(*tmpl);
    }
    Summary summary = apply_offline_template(*tmpl, tables);
    summary.from_store = from_store;

    // validation happens once, when the template is first built; a store hit
    // must stay LLM-free
    if (config.validate_final_summary && !from_store) {
        EvaluationContext ctx;
        ctx.set("schema_text", render_schema_text(schemas)).set("user_query", query);
        CouncilVerdict verdict = council.judge(ArtifactKind::Summary, summary.text, ctx);
        if (verdict.decision == Decision::No) {
            // advisory, not gating: the template is kept, the warning recorded
            tmpl->provenance.warnings.push_back("summary validation NO: " + verdict.consensus_feedback);
            store.save(*tmpl);
        }
    }

    summary.llm_calls_used = total_llm_calls(agent, council) - calls_before;
    summary.wall_time = std::chrono::steady_clock::now() - start;
    return summary;
}

}  // namespace facts
