#pragma once

#include <stdexcept>
#include <string>

namespace facts {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// schema / ingestion
struct IngestError : Error {
    IngestError(std::size_t position, const std::string& reason)
        : Error("ingest error at " + std::to_string(position) + ": " + reason),
          position(position), reason(reason) {}
    std::size_t position;
    std::string reason;
};

// llm transport
struct TransportError : Error { using Error::Error; };
struct RateLimited : Error { using Error::Error; };
struct ProviderError : Error {
    ProviderError(int status, const std::string& body)
        : Error("provider error " + std::to_string(status) + ": " + body),
          status(status), body(body) {}
    int status;
    std::string body;
};
struct ScriptExhausted : Error { using Error::Error; };

// council
struct MissingContextSlot : Error {
    MissingContextSlot(const std::string& kind, const std::string& slot)
        : Error("missing context slot '" + slot + "' for " + kind), slot(slot) {}
    std::string slot;
};
struct EmptyJudgments : Error { using Error::Error; };

// sqlexec
struct DuplicateTableName : Error { using Error::Error; };

// template engine
struct TemplateSyntaxError : Error {
    TemplateSyntaxError(std::size_t line, const std::string& reason)
        : Error("template syntax error at line " + std::to_string(line) + ": " + reason),
          line(line), reason(reason) {}
    std::size_t line;
    std::string reason;
};
struct UnsupportedConstruct : Error {
    explicit UnsupportedConstruct(const std::string& name)
        : Error("unsupported construct: " + name), name(name) {}
    std::string name;
};
struct UndefinedFieldError : Error {
    explicit UndefinedFieldError(const std::string& field)
        : Error("undefined field: " + field), field(field) {}
    std::string field;
};
struct RenderError : Error { using Error::Error; };

// workflow
struct SpecParseError : Error { using Error::Error; };
struct EmptySpecificationSet : Error { using Error::Error; };
struct SqlPatienceExhausted : Error {
    SqlPatienceExhausted(const std::string& last_feedback, const std::string& last_exec)
        : Error("sql patience exhausted: " + last_feedback),
          last_feedback(last_feedback), last_exec(last_exec) {}
    std::string last_feedback;
    std::string last_exec;
};
struct TemplatePatienceExhausted : Error {
    explicit TemplatePatienceExhausted(const std::string& last_report)
        : Error("template patience exhausted: " + last_report), last_report(last_report) {}
    std::string last_report;
};
struct FingerprintMismatch : Error {
    FingerprintMismatch(const std::string& expected, const std::string& got)
        : Error("schema fingerprint mismatch: expected " + expected + ", got " + got),
          expected(expected), got(got) {}
    std::string expected;
    std::string got;
};
struct ApplicationError : Error { using Error::Error; };

// store
struct IoError : Error { using Error::Error; };
struct StoreCorruption : Error {
    explicit StoreCorruption(const std::string& key)
        : Error("corrupt template document under key " + key), key(key) {}
    std::string key;
};

// eval / cli
struct DatasetError : Error {
    DatasetError(std::size_t line, const std::string& reason)
        : Error("dataset error at line " + std::to_string(line) + ": " + reason),
          line(line), reason(reason) {}
    std::size_t line;
    std::string reason;
};
struct EmptyOutcomes : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };

}  // namespace facts
