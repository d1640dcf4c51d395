#pragma once

#include <memory>
#include <set>
#include <string>
#include <vector>

#include "facts/sqlexec.hpp"

namespace facts {
namespace jinja {

// Runtime value: scalar, list, or row (ordered column -> value).
struct Value;
using ValueList = std::vector<Value>;
using ValueRow = std::vector<std::pair<std::string, Value>>;

struct Value {
    std::variant<std::monostate, bool, std::int64_t, double, std::string,
                 std::shared_ptr<ValueList>, std::shared_ptr<ValueRow>>
        data;

    Value() = default;
    static Value null() { return Value{}; }
    static Value of(bool b) { Value v; v.data = b; return v; }
    static Value of(std::int64_t i) { Value v; v.data = i; return v; }
    static Value of(double d) { Value v; v.data = d; return v; }
    static Value of(std::string s) { Value v; v.data = std::move(s); return v; }
    static Value of(ValueList l) { Value v; v.data = std::make_shared<ValueList>(std::move(l)); return v; }
    static Value of(ValueRow r) { Value v; v.data = std::make_shared<ValueRow>(std::move(r)); return v; }
    static Value from_cell(const Cell& c);
};

struct Node;

}  // namespace jinja

// Parsed template. Immutable and shareable; rendering is pure.
struct Jinja2Template {
    std::string source;
    std::shared_ptr<const jinja::Node> root;
};

// Rows of the executed queries: the first query binds to `values`, further
// queries to `values_2` .. `values_k`.
struct RenderBinding {
    std::vector<jinja::ValueList> query_rows;
};

RenderBinding binding_from(const SqlExecutionResult& exec);

struct AlignmentReport {
    bool aligned = false;
    std::vector<std::string> missing_fields;
    std::vector<std::string> shape_issues;

    std::string to_text() const;
};

// Supported subset: {{ expr }}, {% for x in expr %}, {% if/elif/else %},
// subscript row["Column Name"], attribute access, filters length, join(sep),
// unique, list, map(attribute=name), comparisons and boolean operators.
// Anything else fails at parse time with UnsupportedConstruct.
Jinja2Template parse_template(const std::string& source);

// Strict rendering: referencing an absent field raises UndefinedFieldError.
std::string render(const Jinja2Template& tmpl, const RenderBinding& binding);

// Every column name the template applies to rows drawn (directly or through
// unique/list/map) from `values` bindings.
std::set<std::string> extract_field_refs(const Jinja2Template& tmpl);

AlignmentReport check_alignment(const Jinja2Template& tmpl, const SqlExecutionResult& exec);

}  // namespace facts
