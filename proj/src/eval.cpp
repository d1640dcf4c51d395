#include "facts/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace facts {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::set<const LlmClient*> distinct_clients(const Agent& agent, const Council& council) {
    std::set<const LlmClient*> clients;
    if (agent.client) clients.insert(agent.client.get());
    for (const auto& member : council.members())
        if (member.provider) clients.insert(member.provider.get());
    return clients;
}

}  // namespace

std::size_t total_prompt_chars(const Agent& agent, const Council& council) {
    std::size_t total = 0;
    for (const auto* c : distinct_clients(agent, council)) total += c->total_prompt_chars();
    return total;
}

std::vector<DatasetExample> load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dataset: " + path);
    std::vector<DatasetExample> examples;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DatasetError(line_no, std::string("invalid JSON: ") + e.what());
        }
        DatasetExample ex;
        try {
            ex.id = doc.contains("id") && doc["id"].is_string()
                        ? doc["id"].get<std::string>()
                        : doc.at("id").dump();
            ex.query = doc.at("query").get<std::string>();
            ex.reference = doc.at("reference").get<std::string>();
            if (!doc.contains("tables") || !doc["tables"].is_array() || doc["tables"].empty())
                throw DatasetError(line_no, "tables must be a non-empty array");
            for (const auto& t : doc["tables"]) ex.tables.push_back(table_from_json(t.dump()));
        } catch (const DatasetError&) {
            throw;
        } catch (const std::exception& e) {
            throw DatasetError(line_no, e.what());
        }
        if (ex.query.empty()) throw DatasetError(line_no, "empty query");
        if (ex.reference.empty()) throw DatasetError(line_no, "empty reference");
        examples.push_back(std::move(ex));
    }
    return examples;
}

MetricReport run_benchmark(Pipeline& pipeline, const std::vector<DatasetExample>& dataset) {
    MetricReport report;
    BleuStats corpus_bleu;
    std::vector<PipelineOutcome> outcomes;
    auto run_start = Clock::now();

    for (const auto& ex : dataset) {
        ExampleScore score;
        score.id = ex.id;
        auto start = Clock::now();
        try {
            Summary s = summarize(pipeline.agent, pipeline.council, *pipeline.store, ex.query,
                                  ex.tables, pipeline.config);
            score.summary = s.text;
            score.sql_ok = true;
            score.bleu = bleu(s.text, {ex.reference});
            score.rouge_l = rouge_l_f1(s.text, ex.reference);
            score.meteor = meteor(s.text, ex.reference);
        } catch (const Error& e) {
            score.error = e.what();
        }
        report.timing["example." + ex.id] = seconds_since(start);
        corpus_bleu.add(tokenize(score.summary), {tokenize(ex.reference)});
        outcomes.push_back({score.sql_ok});
        report.per_example.push_back(std::move(score));
    }

    report.bleu = corpus_bleu.score();
    for (const auto& s : report.per_example) {
        report.rouge_l += s.rouge_l;
        report.meteor += s.meteor;
    }
    if (!report.per_example.empty()) {
        report.rouge_l /= report.per_example.size();
        report.meteor /= report.per_example.size();
    }
    report.pass_rate = pass_rate(outcomes);
    report.timing["total"] = seconds_since(run_start);
    return report;
}

std::string report_table(const MetricReport& report) {
    std::ostringstream out;
    out << "id              sql_ok  BLEU     ROUGE-L  METEOR\n";
    for (const auto& s : report.per_example) {
        std::string id = s.id.size() > 15 ? s.id.substr(0, 15) : s.id;
        out << id << std::string(16 - id.size(), ' ') << (s.sql_ok ? "yes" : "NO ") << "     ";
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%-8.2f %-8.2f %-8.2f", s.bleu, s.rouge_l, s.meteor);
        out << buf << "\n";
    }
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "corpus BLEU %.2f | mean ROUGE-L %.2f | mean METEOR %.2f | pass rate %.3f\n",
                  report.bleu, report.rouge_l, report.meteor, report.pass_rate);
    out << buf;
    return out.str();
}

nlohmann::ordered_json report_to_json(const MetricReport& report) {
    nlohmann::ordered_json doc;
    doc["bleu"] = report.bleu;
    doc["rouge_l"] = report.rouge_l;
    doc["meteor"] = report.meteor;
    doc["pass_rate"] = report.pass_rate;
    doc["per_example"] = nlohmann::ordered_json::array();
    for (const auto& s : report.per_example) {
        nlohmann::ordered_json e;
        e["id"] = s.id;
        e["sql_ok"] = s.sql_ok;
        e["bleu"] = s.bleu;
        e["rouge_l"] = s.rouge_l;
        e["meteor"] = s.meteor;
        e["summary"] = s.summary;
        if (!s.error.empty()) e["error"] = s.error;
        doc["per_example"].push_back(std::move(e));
    }
    doc["timing"] = report.timing;
    return doc;
}

namespace {

// Same schema, shuffled values: rotate the row order by `shift` and, for text
// cells, leave values in place (row permutation alone changes the value
// layout without touching the fingerprint).
std::vector<Table> permute_tables(const std::vector<Table>& tables, std::size_t shift) {
    std::vector<Table> out = tables;
    for (auto& t : out) {
        if (t.rows.size() < 2) continue;
        std::rotate(t.rows.begin(), t.rows.begin() + (shift % t.rows.size()), t.rows.end());
    }
    return out;
}

std::vector<Table> resize_tables(const std::vector<Table>& tables, std::size_t rows) {
    std::vector<Table> out = tables;
    for (auto& t : out) {
        if (t.rows.empty()) continue;
        std::vector<Row> grown;
        grown.reserve(rows);
        for (std::size_t i = 0; i < rows; ++i) {
            Row row = t.rows[i % t.rows.size()];
            // perturb integer cells so replicated rows are not byte copies
            for (auto& cell : row)
                if (auto* v = std::get_if<std::int64_t>(&cell))
                    *v += static_cast<std::int64_t>(i / t.rows.size());
            grown.push_back(std::move(row));
        }
        t.rows = std::move(grown);
    }
    return out;
}

}  // namespace

ReusabilityReport reusability_experiment(Pipeline& pipeline, const DatasetExample& base,
                                         int n_tables) {
    if (n_tables < 1) throw ConfigError("n_tables must be >= 1");
    ReusabilityReport report;
    auto start = Clock::now();
    for (int i = 0; i < n_tables; ++i) {
        auto tables = permute_tables(base.tables, static_cast<std::size_t>(i));
        auto t0 = Clock::now();
        Summary s = summarize(pipeline.agent, pipeline.council, *pipeline.store, base.query,
                              tables, pipeline.config);
        report.per_table_seconds.push_back(seconds_since(t0));
        if (s.from_store) ++report.applies;
        else ++report.builds;
    }
    report.total_seconds = seconds_since(start);
    report.llm_calls = total_llm_calls(pipeline.agent, pipeline.council);
    if (report.builds != 1)
        throw Error("reusability: expected exactly one template build, saw " +
                    std::to_string(report.builds));
    return report;
}

ScalabilityReport scalability_experiment(const std::function<Pipeline()>& factory,
                                         const DatasetExample& base,
                                         const std::vector<std::size_t>& row_counts) {
    if (row_counts.empty()) throw ConfigError("row_counts must be non-empty");
    ScalabilityReport report;
    for (std::size_t rows : row_counts) {
        Pipeline pipeline = factory();
        auto tables = resize_tables(base.tables, rows);

        ScalabilityPoint point;
        point.rows = rows;
        auto t0 = Clock::now();
        OfflineTemplate tmpl = build_offline_template(pipeline.agent, pipeline.council, base.query,
                                                      tables, pipeline.config);
        point.llm_seconds = seconds_since(t0);
        auto t1 = Clock::now();
        Summary s = apply_offline_template(tmpl, tables);
        point.sql_seconds = seconds_since(t1);
        point.summary = s.text;
        point.prompt_chars = total_prompt_chars(pipeline.agent, pipeline.council);
        report.points.push_back(std::move(point));
    }
    report.prompt_chars_flat = std::all_of(
        report.points.begin(), report.points.end(),
        [&](const ScalabilityPoint& p) { return p.prompt_chars == report.points[0].prompt_chars; });
    return report;
}

}  // namespace facts
