#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "facts/council.hpp"
#include "facts/jinja.hpp"
#include "facts/schema.hpp"
#include "facts/sqlexec.hpp"

namespace facts {

struct GuidedSpecification {
    enum class Kind { GuidedQuestion, FilteringRule };
    Kind kind = Kind::GuidedQuestion;
    std::string text;
};

struct Demo {
    std::string schema_text;
    std::string query;
    std::string reference_summary;
};

struct WorkflowConfig {
    int max_specifications = 10;       // K_q
    int spec_patience = 3;             // P_q
    int sql_patience = 3;              // P_sql
    int template_patience = 3;         // P_tpl
    int min_specs_for_sufficiency = 2;
    bool validate_final_summary = true;
    std::vector<Demo> demos;
    // When set, provenance timestamps use this value instead of the wall
    // clock, making template serialization byte-reproducible.
    std::string fixed_created_at;
};

struct Provenance {
    std::string created_at;
    std::vector<std::string> council_member_ids;
    std::vector<GuidedSpecification> accepted_specifications;
    std::map<std::string, int> iteration_counts;
    std::vector<std::string> warnings;
};

struct OfflineTemplate {
    std::string user_query;
    std::vector<std::string> schema_fingerprints;
    std::vector<SqlQuery> sql_queries;
    std::string jinja2_template;
    Provenance provenance;
};

struct Summary {
    std::string text;
    std::size_t llm_calls_used = 0;
    std::chrono::duration<double> wall_time{0};
    bool from_store = false;
};

struct Agent {
    std::shared_ptr<LlmClient> client;
    std::string model_id;

    std::string ask(const std::string& prompt) const;
};

// Stage 1 ------------------------------------------------------------------

GuidedSpecification generate_specification(const Agent& agent, const std::string& query,
                                           const std::vector<TableSchema>& schemas,
                                           const std::vector<GuidedSpecification>& accepted);

GuidedSpecification revise_specification(const Agent& agent, const GuidedSpecification& spec,
                                         const std::string& feedback, const std::string& query,
                                         const std::vector<TableSchema>& schemas,
                                         const std::vector<GuidedSpecification>& accepted);

bool sufficient(const Agent& agent, const std::string& query,
                const std::vector<GuidedSpecification>& accepted, const WorkflowConfig& config);

struct Stage1Result {
    std::vector<GuidedSpecification> specifications;
    int generation_calls = 0;
    int judge_rounds = 0;
};

Stage1Result stage1(const Agent& agent, const Council& council, const std::string& query,
                    const std::vector<TableSchema>& schemas, const WorkflowConfig& config);

// Stage 2 ------------------------------------------------------------------

struct Stage2Result {
    std::vector<SqlQuery> queries;
    SqlExecutionResult exec;
    int generation_calls = 0;
    int judge_rounds = 0;
};

Stage2Result stage2(const Agent& agent, const Council& council, const std::string& query,
                    const std::vector<GuidedSpecification>& specs, const std::vector<Table>& tables,
                    const WorkflowConfig& config);

// Stage 3 ------------------------------------------------------------------

struct Stage3Result {
    std::vector<SqlQuery> queries;  // may differ from stage 2 if refined together
    SqlExecutionResult exec;
    Jinja2Template tmpl;
    int generation_calls = 0;
    int judge_rounds = 0;
};

Stage3Result stage3(const Agent& agent, const Council& council, const std::string& query,
                    const std::vector<SqlQuery>& sql, const SqlExecutionResult& exec,
                    const std::vector<TableSchema>& schemas, const std::vector<Table>& tables,
                    const WorkflowConfig& config);

// Composition ---------------------------------------------------------------

OfflineTemplate build_offline_template(const Agent& agent, const Council& council,
                                       const std::string& query, const std::vector<Table>& tables,
                                       const WorkflowConfig& config);

// Zero LLM calls: register tables, run the stored queries, render.
Summary apply_offline_template(const OfflineTemplate& tmpl, const std::vector<Table>& tables);

// Non-agentic ablation: one prompt produces SQL and template in a single
// step; no execution feedback, no council, no refinement.
struct SingleCallResult {
    OfflineTemplate tmpl;
    bool sql_ok = false;        // every query executed without error, non-empty
    std::string exec_status;    // value-free execution status text
};

SingleCallResult single_call_template(const Agent& agent, const std::string& query,
                                      const std::vector<Table>& tables,
                                      const WorkflowConfig& config);

// Combined call count across the agent and all council members (shared
// backends counted once). Ground truth for zero-LLM-call assertions.
std::size_t total_llm_calls(const Agent& agent, const Council& council);

class TemplateStore;

Summary summarize(const Agent& agent, const Council& council, TemplateStore& store,
                  const std::string& query, const std::vector<Table>& tables,
                  const WorkflowConfig& config);

// trim + collapse internal whitespace + lowercase; the store-key half.
std::string normalize_query(const std::string& query);

}  // namespace facts
