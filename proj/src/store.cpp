#include "facts/store.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace facts {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {
constexpr int kFormatVersion = 1;

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot read " + p.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file_atomic(const fs::path& p, const std::string& content) {
    fs::path tmp = p;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out << content;
        if (!out) throw IoError("write failed: " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, p, ec);
    if (ec) throw IoError("rename failed: " + p.string() + ": " + ec.message());
}
}  // namespace

std::string StoreKey::digest() const {
    std::string canon = normalized_query;
    for (const auto& fp : fingerprints) canon += "|" + fp;
    return fnv1a_hex(canon);
}

StoreKey make_store_key(const std::string& query, const std::vector<TableSchema>& schemas) {
    StoreKey key;
    key.normalized_query = normalize_query(query);
    for (const auto& s : schemas) key.fingerprints.push_back(schema_fingerprint(s));
    return key;
}

std::string template_to_document(const OfflineTemplate& tmpl) {
    ordered_json doc;
    doc["format_version"] = kFormatVersion;
    doc["user_query"] = tmpl.user_query;
    doc["normalized_query"] = normalize_query(tmpl.user_query);
    doc["schema_fingerprints"] = tmpl.schema_fingerprints;
    doc["sql_queries"] = ordered_json::array();
    for (const auto& q : tmpl.sql_queries) doc["sql_queries"].push_back(q.text);
    doc["jinja2_template"] = tmpl.jinja2_template;
    ordered_json prov;
    prov["created_at"] = tmpl.provenance.created_at;
    prov["council_member_ids"] = tmpl.provenance.council_member_ids;
    prov["accepted_specifications"] = ordered_json::array();
    for (const auto& s : tmpl.provenance.accepted_specifications)
        prov["accepted_specifications"].push_back(
            {{"kind", s.kind == GuidedSpecification::Kind::GuidedQuestion ? "guided_question"
                                                                          : "filtering_rule"},
             {"text", s.text}});
    prov["iteration_counts"] = tmpl.provenance.iteration_counts;
    prov["warnings"] = tmpl.provenance.warnings;
    doc["provenance"] = std::move(prov);
    return doc.dump(2) + "\n";
}

OfflineTemplate template_from_document(const std::string& document) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(document);
    } catch (const nlohmann::json::parse_error& e) {
        throw StoreCorruption(std::string("unparseable document: ") + e.what());
    }
    if (!doc.contains("format_version") || !doc["format_version"].is_number_integer())
        throw StoreCorruption("missing format_version");
    if (doc["format_version"].get<int>() != kFormatVersion)
        throw StoreCorruption("unknown format_version " + std::to_string(doc["format_version"].get<int>()));
    try {
        OfflineTemplate tmpl;
        tmpl.user_query = doc.at("user_query").get<std::string>();
        for (const auto& fp : doc.at("schema_fingerprints"))
            tmpl.schema_fingerprints.push_back(fp.get<std::string>());
        for (const auto& q : doc.at("sql_queries")) tmpl.sql_queries.push_back({q.get<std::string>()});
        tmpl.jinja2_template = doc.at("jinja2_template").get<std::string>();
        const auto& prov = doc.at("provenance");
        tmpl.provenance.created_at = prov.value("created_at", std::string{});
        for (const auto& id : prov.value("council_member_ids", nlohmann::json::array()))
            tmpl.provenance.council_member_ids.push_back(id.get<std::string>());
        for (const auto& js : prov.value("accepted_specifications", nlohmann::json::array())) {
            GuidedSpecification s;
            s.kind = js.value("kind", std::string{}) == "filtering_rule"
                         ? GuidedSpecification::Kind::FilteringRule
                         : GuidedSpecification::Kind::GuidedQuestion;
            s.text = js.at("text").get<std::string>();
            tmpl.provenance.accepted_specifications.push_back(std::move(s));
        }
        if (prov.contains("iteration_counts"))
            for (auto it = prov["iteration_counts"].begin(); it != prov["iteration_counts"].end(); ++it)
                tmpl.provenance.iteration_counts[it.key()] = it.value().get<int>();
        for (const auto& w : prov.value("warnings", nlohmann::json::array()))
            tmpl.provenance.warnings.push_back(w.get<std::string>());
        return tmpl;
    } catch (const nlohmann::json::exception& e) {
        throw StoreCorruption(std::string("malformed document: ") + e.what());
    }
}

TemplateStore::TemplateStore(fs::path directory) : dir_(std::move(directory)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw IoError("cannot create store directory " + dir_.string() + ": " + ec.message());
}

StoreKey TemplateStore::save(const OfflineTemplate& tmpl) {
    StoreKey key;
    key.normalized_query = normalize_query(tmpl.user_query);
    key.fingerprints = tmpl.schema_fingerprints;
    std::string digest = key.digest();

    write_file_atomic(dir_ / (digest + ".json"), template_to_document(tmpl));

    // latest-wins index, keyed by digest
    ordered_json index = ordered_json::object();
    fs::path index_path = dir_ / "index.json";
    if (fs::exists(index_path)) {
        try {
            index = ordered_json::parse(read_file(index_path));
        } catch (...) {
            index = ordered_json::object();
        }
    }
    ordered_json entry;
    entry["query"] = tmpl.user_query;
    entry["fingerprints"] = key.fingerprints;
    index[digest] = std::move(entry);
    write_file_atomic(index_path, index.dump(2) + "\n");
    return key;
}

std::optional<OfflineTemplate> TemplateStore::load_by_digest(const std::string& digest) const {
    fs::path p = dir_ / (digest + ".json");
    if (!fs::exists(p)) return std::nullopt;
    try {
        return template_from_document(read_file(p));
    } catch (const StoreCorruption&) {
        throw StoreCorruption(digest);
    }
}

std::optional<OfflineTemplate> TemplateStore::lookup(const std::string& query,
                                                     const std::vector<TableSchema>& schemas) const {
    return load_by_digest(make_store_key(query, schemas).digest());
}

std::size_t TemplateStore::size() const {
    std::size_t n = 0;
    for (const auto& entry : fs::directory_iterator(dir_)) {
        if (entry.path().extension() == ".json" && entry.path().filename() != "index.json") ++n;
    }
    return n;
}

}  // namespace facts
