#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "facts/council.hpp"
#include "facts/metrics.hpp"
#include "facts/schema.hpp"
#include "facts/store.hpp"
#include "facts/workflow.hpp"

#include "json.hpp"

namespace facts {

struct DatasetExample {
    std::string id;
    std::string query;
    std::vector<Table> tables;
    std::string reference;
};

// One agent + council + store + knobs: everything summarize() needs.
struct Pipeline {
    Agent agent;
    Council council;
    std::shared_ptr<TemplateStore> store;
    WorkflowConfig config;
};

struct ExampleScore {
    std::string id;
    bool sql_ok = false;
    double bleu = 0.0;
    double rouge_l = 0.0;
    double meteor = 0.0;
    std::string summary;
    std::string error;  // non-empty when the example failed
};

struct MetricReport {
    double bleu = 0.0;      // corpus-level (counts pooled across examples)
    double rouge_l = 0.0;   // mean over examples
    double meteor = 0.0;    // mean over examples
    double pass_rate = 0.0;
    std::vector<ExampleScore> per_example;
    std::map<std::string, double> timing;  // seconds
};

// JSONL, one example per line: {id, query, tables: [{name, columns, rows}], reference}
std::vector<DatasetExample> load_dataset(const std::string& path);

MetricReport run_benchmark(Pipeline& pipeline, const std::vector<DatasetExample>& dataset);

std::string report_table(const MetricReport& report);
nlohmann::ordered_json report_to_json(const MetricReport& report);

struct ReusabilityReport {
    std::size_t builds = 0;
    std::size_t applies = 0;
    std::size_t llm_calls = 0;  // across agent + council, shared backends once
    double total_seconds = 0.0;
    std::vector<double> per_table_seconds;
};

// Runs summarize over n value-permuted copies of the base tables (same
// schema). The first run builds; the rest must be store hits.
ReusabilityReport reusability_experiment(Pipeline& pipeline, const DatasetExample& base,
                                         int n_tables);

struct ScalabilityPoint {
    std::size_t rows = 0;
    std::size_t prompt_chars = 0;  // total prompt payload across all LLM calls
    double llm_seconds = 0.0;      // template-build wall time
    double sql_seconds = 0.0;      // execution + render wall time
    std::string summary;
};

struct ScalabilityReport {
    std::vector<ScalabilityPoint> points;
    bool prompt_chars_flat = false;
};

// Each row count gets a fresh pipeline from the factory so call logs and
// stores do not bleed between sizes.
ScalabilityReport scalability_experiment(const std::function<Pipeline()>& factory,
                                         const DatasetExample& base,
                                         const std::vector<std::size_t>& row_counts);

// Total prompt characters across the agent and council members, shared
// backends counted once.
std::size_t total_prompt_chars(const Agent& agent, const Council& council);

}  // namespace facts
