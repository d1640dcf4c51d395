#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "facts/eval.hpp"
#include "facts/store.hpp"
#include "facts/workflow.hpp"

namespace {

using facts::ConfigError;

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;        // input / configuration errors
constexpr int kExitApplication = 3;  // template-application errors
constexpr int kExitPatience = 4;     // pipeline patience exhaustion

struct RunConfig {
    std::string agent_model = "agent";
    std::vector<std::pair<std::string, std::string>> council;  // (member_id, model_id)
    std::string backend_mode = "scripted";                     // live | scripted
    std::string script_path;
    std::string endpoint;
    std::string api_key_env = "FACTS_API_KEY";
    std::string store_path = "store";
    facts::WorkflowConfig workflow;
};

RunConfig load_config(const std::string& path) {
    RunConfig cfg;
    if (path.empty()) return cfg;
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config: " + path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad config: ") + e.what());
    }
    cfg.agent_model = doc.value("agent", cfg.agent_model);
    if (doc.contains("council")) {
        for (const auto& m : doc["council"]) {
            if (m.is_string())
                cfg.council.emplace_back(m.get<std::string>(), m.get<std::string>());
            else
                cfg.council.emplace_back(m.value("id", m.value("model", "member")),
                                         m.value("model", "member"));
        }
    }
    if (doc.contains("backend")) {
        const auto& b = doc["backend"];
        cfg.backend_mode = b.value("mode", cfg.backend_mode);
        cfg.script_path = b.value("script", cfg.script_path);
        cfg.endpoint = b.value("endpoint", cfg.endpoint);
        cfg.api_key_env = b.value("api_key_env", cfg.api_key_env);
    }
    cfg.store_path = doc.value("store", cfg.store_path);
    if (doc.contains("workflow")) {
        const auto& w = doc["workflow"];
        cfg.workflow.max_specifications = w.value("max_specifications", cfg.workflow.max_specifications);
        cfg.workflow.spec_patience = w.value("spec_patience", cfg.workflow.spec_patience);
        cfg.workflow.sql_patience = w.value("sql_patience", cfg.workflow.sql_patience);
        cfg.workflow.template_patience = w.value("template_patience", cfg.workflow.template_patience);
        cfg.workflow.min_specs_for_sufficiency =
            w.value("min_specs_for_sufficiency", cfg.workflow.min_specs_for_sufficiency);
        cfg.workflow.validate_final_summary =
            w.value("validate_final_summary", cfg.workflow.validate_final_summary);
    }
    if (doc.contains("demos")) {
        for (const auto& d : doc["demos"]) {
            facts::Demo demo;
            demo.schema_text = d.value("schema_text", "");
            demo.query = d.value("query", "");
            demo.reference_summary = d.value("reference_summary", "");
            cfg.workflow.demos.push_back(std::move(demo));
        }
    }
    return cfg;
}

facts::Pipeline make_pipeline(const RunConfig& cfg) {
    std::shared_ptr<facts::LlmClient> client;
    if (cfg.backend_mode == "scripted") {
        if (cfg.script_path.empty()) throw ConfigError("scripted mode requires a script path");
        client = facts::ScriptedBackend::from_json_file(cfg.script_path);
    } else if (cfg.backend_mode == "live") {
        if (cfg.endpoint.empty()) throw ConfigError("live mode requires an endpoint");
        if (!std::getenv(cfg.api_key_env.c_str()))
            throw ConfigError("live mode requires credentials in " + cfg.api_key_env);
        client = std::make_shared<facts::HttpProvider>(cfg.endpoint, cfg.api_key_env);
    } else {
        throw ConfigError("unknown backend mode: " + cfg.backend_mode);
    }

    std::vector<facts::CouncilMember> members;
    if (cfg.council.empty()) {
        for (const char* id : {"member-1", "member-2", "member-3"})
            members.push_back({id, client, id});
    } else {
        for (const auto& [id, model] : cfg.council) members.push_back({id, client, model});
    }

    facts::Pipeline p{facts::Agent{client, cfg.agent_model}, facts::Council(std::move(members)),
                      std::make_shared<facts::TemplateStore>(cfg.store_path), cfg.workflow};
    if (cfg.backend_mode == "scripted" && p.config.fixed_created_at.empty())
        p.config.fixed_created_at = "1970-01-01T00:00:00Z";  // bit-reproducible output
    return p;
}

// --table name=path, format by extension (.csv or .json/.jsonl record array)
std::vector<facts::Table> load_tables(const std::vector<std::string>& specs) {
    if (specs.empty()) throw ConfigError("at least one --table name=path is required");
    std::vector<facts::Table> tables;
    for (const auto& spec : specs) {
        auto eq = spec.find('=');
        if (eq == std::string::npos || eq == 0)
            throw ConfigError("--table expects name=path, got: " + spec);
        std::string name = spec.substr(0, eq);
        std::string path = spec.substr(eq + 1);
        std::ifstream in(path);
        if (!in) throw facts::IngestError(0, "cannot open table file: " + path);
        auto format = path.size() > 4 && path.compare(path.size() - 4, 4, ".csv") == 0
                          ? facts::TableFormat::CsvWithHeader
                          : facts::TableFormat::JsonRecords;
        tables.push_back(facts::load_table(in, format, name));
    }
    return tables;
}

void write_out(const std::string& out_path, const nlohmann::ordered_json& doc) {
    if (out_path.empty()) return;
    std::ofstream out(out_path);
    if (!out) throw facts::IoError("cannot write report: " + out_path);
    out << doc.dump(2) << "\n";
}

int classify(const std::exception& e) {
    if (dynamic_cast<const facts::SqlPatienceExhausted*>(&e) ||
        dynamic_cast<const facts::TemplatePatienceExhausted*>(&e) ||
        dynamic_cast<const facts::EmptySpecificationSet*>(&e))
        return kExitPatience;
    if (dynamic_cast<const facts::FingerprintMismatch*>(&e) ||
        dynamic_cast<const facts::ApplicationError*>(&e) ||
        dynamic_cast<const facts::RenderError*>(&e) ||
        dynamic_cast<const facts::UndefinedFieldError*>(&e))
        return kExitApplication;
    return kExitInput;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"FACTS: query-focused table summarization via reusable offline templates"};
    app.require_subcommand(1);

    std::string config_path, query, template_ref, store_override, script_override, out_path;
    std::vector<std::string> table_specs;
    std::string dataset_path;
    int n_tables = 100;
    std::vector<std::size_t> row_counts;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON config file");
        cmd->add_option("--store", store_override, "template store directory (overrides config)");
        cmd->add_option("--script", script_override, "scripted-backend script (overrides config)");
        cmd->add_option("--out", out_path, "write a machine-readable report/document here");
    };

    auto* gen = app.add_subcommand("gen-template", "build and save an offline template");
    add_common(gen);
    gen->add_option("--query", query)->required();
    gen->add_option("--table", table_specs, "name=path (repeatable)")->required();

    auto* apply = app.add_subcommand("apply", "apply a stored template to tables (zero LLM calls)");
    add_common(apply);
    apply->add_option("--template", template_ref, "store digest or path to a template document")
        ->required();
    apply->add_option("--table", table_specs)->required();

    auto* summ = app.add_subcommand("summarize", "lookup-or-build, then render");
    add_common(summ);
    summ->add_option("--query", query)->required();
    summ->add_option("--table", table_specs)->required();

    auto* ev = app.add_subcommand("eval", "run the benchmark harness over a JSONL dataset");
    add_common(ev);
    ev->add_option("--dataset", dataset_path)->required();

    auto* reuse = app.add_subcommand("bench-reuse", "one build, n applies over permuted tables");
    add_common(reuse);
    reuse->add_option("--query", query)->required();
    reuse->add_option("--table", table_specs)->required();
    reuse->add_option("--n", n_tables);

    auto* scale = app.add_subcommand("bench-scale", "schema-only prompt flatness across row counts");
    add_common(scale);
    scale->add_option("--query", query)->required();
    scale->add_option("--table", table_specs)->required();
    scale->add_option("--rows", row_counts, "row counts (repeatable)");

    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig cfg = load_config(config_path);
        if (!store_override.empty()) cfg.store_path = store_override;
        if (!script_override.empty()) {
            cfg.backend_mode = "scripted";
            cfg.script_path = script_override;
        }

        if (gen->parsed()) {
            auto pipeline = make_pipeline(cfg);
            auto tables = load_tables(table_specs);
            auto tmpl = facts::build_offline_template(pipeline.agent, pipeline.council, query,
                                                      tables, pipeline.config);
            auto key = pipeline.store->save(tmpl);
            std::cout << "store key: " << key.digest() << "\n";
            for (const auto& q : tmpl.sql_queries) std::cout << "sql: " << q.text << "\n";
            std::cout << "specifications: " << tmpl.provenance.accepted_specifications.size()
                      << ", council: " << tmpl.provenance.council_member_ids.size()
                      << " members, created " << tmpl.provenance.created_at << "\n";
            if (!out_path.empty()) {
                std::ofstream out(out_path);
                out << facts::template_to_document(tmpl);
            }
            return kExitOk;
        }

        if (apply->parsed()) {
            auto tables = load_tables(table_specs);
            std::optional<facts::OfflineTemplate> tmpl;
            if (std::ifstream in(template_ref); in) {
                std::ostringstream buf;
                buf << in.rdbuf();
                tmpl = facts::template_from_document(buf.str());
            } else {
                facts::TemplateStore store(cfg.store_path);
                tmpl = store.load_by_digest(template_ref);
            }
            if (!tmpl) throw ConfigError("template not found: " + template_ref);
            auto summary = facts::apply_offline_template(*tmpl, tables);
            std::cout << summary.text << "\n";
            return kExitOk;
        }

        if (summ->parsed()) {
            auto pipeline = make_pipeline(cfg);
            auto tables = load_tables(table_specs);
            auto summary = facts::summarize(pipeline.agent, pipeline.council, *pipeline.store,
                                            query, tables, pipeline.config);
            std::cout << summary.text << "\n";
            std::cout << (summary.from_store ? "store hit" : "built") << " ("
                      << summary.llm_calls_used << " LLM calls)\n";
            return kExitOk;
        }

        if (ev->parsed()) {
            auto pipeline = make_pipeline(cfg);
            auto dataset = facts::load_dataset(dataset_path);
            auto report = facts::run_benchmark(pipeline, dataset);
            std::cout << facts::report_table(report);
            write_out(out_path, facts::report_to_json(report));
            return kExitOk;
        }

        if (reuse->parsed()) {
            auto pipeline = make_pipeline(cfg);
            facts::DatasetExample base{"base", query, load_tables(table_specs), ""};
            auto report = facts::reusability_experiment(pipeline, base, n_tables);
            std::cout << "builds: " << report.builds << ", applies: " << report.applies
                      << ", LLM calls: " << report.llm_calls << ", total "
                      << report.total_seconds << "s\n";
            nlohmann::ordered_json doc;
            doc["builds"] = report.builds;
            doc["applies"] = report.applies;
            doc["llm_calls"] = report.llm_calls;
            doc["total_seconds"] = report.total_seconds;
            doc["per_table_seconds"] = report.per_table_seconds;
            write_out(out_path, doc);
            return kExitOk;
        }

        if (scale->parsed()) {
            if (row_counts.empty()) row_counts = {100, 500, 1000};
            facts::DatasetExample base{"base", query, load_tables(table_specs), ""};
            auto factory = [&cfg]() { return make_pipeline(cfg); };
            auto report = facts::scalability_experiment(factory, base, row_counts);
            nlohmann::ordered_json doc;
            doc["prompt_chars_flat"] = report.prompt_chars_flat;
            doc["points"] = nlohmann::ordered_json::array();
            for (const auto& p : report.points) {
                std::cout << "rows " << p.rows << ": prompt_chars " << p.prompt_chars
                          << ", llm " << p.llm_seconds << "s, sql " << p.sql_seconds << "s\n";
                nlohmann::ordered_json e;
                e["rows"] = p.rows;
                e["prompt_chars"] = p.prompt_chars;
                e["llm_seconds"] = p.llm_seconds;
                e["sql_seconds"] = p.sql_seconds;
                doc["points"].push_back(std::move(e));
            }
            std::cout << "prompt_chars flat: " << (report.prompt_chars_flat ? "yes" : "no") << "\n";
            write_out(out_path, doc);
            return kExitOk;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return classify(e);
    }
    return kExitInput;
}
