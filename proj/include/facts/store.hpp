#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "facts/workflow.hpp"

namespace facts {

struct StoreKey {
    std::string normalized_query;
    std::vector<std::string> fingerprints;

    // content digest used as the on-disk filename
    std::string digest() const;
};

StoreKey make_store_key(const std::string& query, const std::vector<TableSchema>& schemas);

std::string template_to_document(const OfflineTemplate& tmpl);
OfflineTemplate template_from_document(const std::string& document);

// One JSON document per key (digest as filename) plus a human-readable
// index.json. Writes are atomic: temp file then rename.
class TemplateStore {
public:
    explicit TemplateStore(std::filesystem::path directory);

    StoreKey save(const OfflineTemplate& tmpl);
    std::optional<OfflineTemplate> lookup(const std::string& query,
                                          const std::vector<TableSchema>& schemas) const;
    std::optional<OfflineTemplate> load_by_digest(const std::string& digest) const;

    const std::filesystem::path& directory() const { return dir_; }
    std::size_t size() const;

private:
    std::filesystem::path dir_;
};

}  // namespace facts
