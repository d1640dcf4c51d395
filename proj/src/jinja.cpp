#include "facts/jinja.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <functional>
#include <map>
#include <optional>
#include <regex>

namespace facts {
namespace jinja {

namespace {

// ---------------------------------------------------------------- expressions

enum class ExprKind { Var, StrLit, IntLit, FloatLit, BoolLit, Subscript, Index, Attr, Filter, Compare, And, Or, Not };

struct Expr {
    ExprKind kind;
    std::string text;                         // name / literal / filter name / operator
    std::int64_t int_value = 0;
    double float_value = 0;
    bool bool_value = false;
    std::vector<std::shared_ptr<Expr>> children;       // operands / filter input
    std::vector<std::pair<std::string, std::string>> kwargs;  // filter kwargs (attribute="x")
    std::vector<std::string> args;                     // filter positional string args
};

using ExprPtr = std::shared_ptr<Expr>;

const std::set<std::string> kSupportedFilters = {"length", "join", "unique", "list", "map"};

// ------------------------------------------------------------- expression lexer

struct ExprToken {
    enum Kind { Ident, Str, Int, Float, Op, End } kind = End;
    std::string text;
    std::int64_t int_value = 0;
    double float_value = 0;
};

class ExprLexer {
public:
    ExprLexer(const std::string& src, std::size_t line) : src_(src), line_(line) { advance(); }

    const ExprToken& peek() const { return tok_; }

    ExprToken take() {
        ExprToken t = tok_;
        advance();
        return t;
    }

    [[noreturn]] void fail(const std::string& reason) const { throw TemplateSyntaxError(line_, reason); }

private:
    void advance() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        if (pos_ >= src_.size()) {
            tok_ = ExprToken{};
            return;
        }
        char c = src_[pos_];
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t b = pos_;
            while (pos_ < src_.size() &&
                   (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
                ++pos_;
            tok_ = ExprToken{ExprToken::Ident, src_.substr(b, pos_ - b)};
            return;
        }
        if (std::isdigit(static_cast<unsigned char>(c))) {
            std::size_t b = pos_;
            bool is_float = false;
            while (pos_ < src_.size() &&
                   (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.')) {
                if (src_[pos_] == '.') is_float = true;
                ++pos_;
            }
            std::string num = src_.substr(b, pos_ - b);
            if (is_float)
                tok_ = ExprToken{ExprToken::Float, num, 0, std::strtod(num.c_str(), nullptr)};
            else
                tok_ = ExprToken{ExprToken::Int, num, std::strtoll(num.c_str(), nullptr, 10), 0};
            return;
        }
        if (c == '"' || c == '\'') {
            char q = c;
            ++pos_;
            std::string s;
            while (pos_ < src_.size() && src_[pos_] != q) {
                if (src_[pos_] == '\\' && pos_ + 1 < src_.size()) ++pos_;
                s += src_[pos_++];
            }
            if (pos_ >= src_.size()) fail("unterminated string literal");
            ++pos_;
            tok_ = ExprToken{ExprToken::Str, s};
            return;
        }
        static const char* two_char[] = {"==", "!=", "<=", ">="};
        for (const char* op : two_char) {
            if (src_.compare(pos_, 2, op) == 0) {
                tok_ = ExprToken{ExprToken::Op, op};
                pos_ += 2;
                return;
            }
        }
        if (std::string("|.[](),=<>").find(c) != std::string::npos) {
            tok_ = ExprToken{ExprToken::Op, std::string(1, c)};
            ++pos_;
            return;
        }
        fail(std::string("unexpected character '") + c + "' in expression");
    }

    const std::string& src_;
    std::size_t line_;
    std::size_t pos_ = 0;
    ExprToken tok_;
};

// precedence: or < and < not < comparison < filter < postfix < primary
class ExprParser {
public:
    ExprParser(const std::string& src, std::size_t line) : lex_(src, line) {}

    ExprPtr parse() {
        ExprPtr e = parse_or();
        if (lex_.peek().kind != ExprToken::End) lex_.fail("trailing tokens in expression");
        return e;
    }

private:
    ExprPtr parse_or() {
        ExprPtr left = parse_and();
        while (lex_.peek().kind == ExprToken::Ident && lex_.peek().text == "or") {
            lex_.take();
            auto node = std::make_shared<Expr>(Expr{ExprKind::Or, "or"});
            node->children = {left, parse_and()};
            left = node;
        }
        return left;
    }

    ExprPtr parse_and() {
        ExprPtr left = parse_not();
        while (lex_.peek().kind == ExprToken::Ident && lex_.peek().text == "and") {
            lex_.take();
            auto node = std::make_shared<Expr>(Expr{ExprKind::And, "and"});
            node->children = {left, parse_not()};
            left = node;
        }
        return left;
    }

    ExprPtr parse_not() {
        if (lex_.peek().kind == ExprToken::Ident && lex_.peek().text == "not") {
            lex_.take();
            auto node = std::make_shared<Expr>(Expr{ExprKind::Not, "not"});
            node->children = {parse_not()};
            return node;
        }
        return parse_comparison();
    }

    ExprPtr parse_comparison() {
        ExprPtr left = parse_filtered();
        while (lex_.peek().kind == ExprToken::Op) {
            std::string op = lex_.peek().text;
            if (op != "==" && op != "!=" && op != "<" && op != "<=" && op != ">" && op != ">=") break;
            lex_.take();
            auto node = std::make_shared<Expr>(Expr{ExprKind::Compare, op});
            node->children = {left, parse_filtered()};
            left = node;
        }
        return left;
    }

    ExprPtr parse_filtered() {
        ExprPtr e = parse_postfix();
        while (lex_.peek().kind == ExprToken::Op && lex_.peek().text == "|") {
            lex_.take();
            if (lex_.peek().kind != ExprToken::Ident) lex_.fail("filter name expected after '|'");
            std::string name = lex_.take().text;
            if (!kSupportedFilters.count(name)) throw UnsupportedConstruct(name);
            auto node = std::make_shared<Expr>(Expr{ExprKind::Filter, name});
            node->children = {e};
            if (lex_.peek().kind == ExprToken::Op && lex_.peek().text == "(") {
                lex_.take();
                while (!(lex_.peek().kind == ExprToken::Op && lex_.peek().text == ")")) {
                    if (lex_.peek().kind == ExprToken::Ident) {
                        std::string key = lex_.take().text;
                        if (!(lex_.peek().kind == ExprToken::Op && lex_.peek().text == "="))
                            lex_.fail("filter keyword argument expects '='");
                        lex_.take();
                        if (lex_.peek().kind != ExprToken::Str)
                            lex_.fail("filter keyword argument expects a string literal");
                        node->kwargs.emplace_back(key, lex_.take().text);
                    } else if (lex_.peek().kind == ExprToken::Str) {
                        node->args.push_back(lex_.take().text);
                    } else {
                        lex_.fail("unsupported filter argument");
                    }
                    if (lex_.peek().kind == ExprToken::Op && lex_.peek().text == ",") lex_.take();
                }
                lex_.take();  // ')'
            }
            e = node;
        }
        return e;
    }

    ExprPtr parse_postfix() {
        ExprPtr e = parse_primary();
        for (;;) {
            if (lex_.peek().kind == ExprToken::Op && lex_.peek().text == "[") {
                lex_.take();
                std::shared_ptr<Expr> node;
                if (lex_.peek().kind == ExprToken::Str) {
                    node = std::make_shared<Expr>(Expr{ExprKind::Subscript, lex_.take().text});
                } else if (lex_.peek().kind == ExprToken::Int) {
                    ExprToken tok = lex_.take();
                    node = std::make_shared<Expr>(Expr{ExprKind::Index, tok.text, tok.int_value});
                } else {
                    lex_.fail("subscript expects a string literal key or integer index");
                }
                if (!(lex_.peek().kind == ExprToken::Op && lex_.peek().text == "]"))
                    lex_.fail("expected ']'");
                lex_.take();
                node->children = {e};
                e = node;
            } else if (lex_.peek().kind == ExprToken::Op && lex_.peek().text == ".") {
                lex_.take();
                if (lex_.peek().kind != ExprToken::Ident) lex_.fail("attribute name expected after '.'");
                auto node = std::make_shared<Expr>(Expr{ExprKind::Attr, lex_.take().text});
                node->children = {e};
                e = node;
            } else {
                return e;
            }
        }
    }

    ExprPtr parse_primary() {
        const ExprToken& t = lex_.peek();
        switch (t.kind) {
            case ExprToken::Ident: {
                std::string name = lex_.take().text;
                if (name == "true" || name == "True")
                    return std::make_shared<Expr>(Expr{ExprKind::BoolLit, name, 0, 0, true});
                if (name == "false" || name == "False")
                    return std::make_shared<Expr>(Expr{ExprKind::BoolLit, name, 0, 0, false});
                return std::make_shared<Expr>(Expr{ExprKind::Var, name});
            }
            case ExprToken::Str: {
                auto node = std::make_shared<Expr>(Expr{ExprKind::StrLit, lex_.take().text});
                return node;
            }
            case ExprToken::Int: {
                ExprToken tok = lex_.take();
                auto node = std::make_shared<Expr>(Expr{ExprKind::IntLit, tok.text});
                node->int_value = tok.int_value;
                return node;
            }
            case ExprToken::Float: {
                ExprToken tok = lex_.take();
                auto node = std::make_shared<Expr>(Expr{ExprKind::FloatLit, tok.text});
                node->float_value = tok.float_value;
                return node;
            }
            case ExprToken::Op:
                if (t.text == "(") {
                    lex_.take();
                    ExprPtr e = parse_or();
                    if (!(lex_.peek().kind == ExprToken::Op && lex_.peek().text == ")"))
                        lex_.fail("expected ')'");
                    lex_.take();
                    return e;
                }
                lex_.fail("unexpected operator '" + t.text + "'");
            default:
                lex_.fail("unexpected end of expression");
        }
    }

    ExprLexer lex_;
};

}  // namespace

// ------------------------------------------------------------------- AST nodes

struct Node {
    enum Kind { Text, Output, For, If, Sequence } kind = Text;
    std::string text;          // literal text / loop variable
    ExprPtr expr;              // output / loop iterable
    std::vector<std::shared_ptr<Node>> children;
    // if-node: branch i has condition conditions[i] (null for else) and body children[i]
    std::vector<ExprPtr> conditions;
    std::vector<std::shared_ptr<Node>> bodies;
};

namespace {

// ------------------------------------------------------------- template parser

struct Segment {
    enum Kind { Literal, Output, Tag } kind;
    std::string body;
    std::size_t line;
};

std::vector<Segment> split_segments(const std::string& src) {
    std::vector<Segment> segments;
    std::size_t pos = 0;
    std::size_t line = 1;
    auto count_lines = [&](std::size_t from, std::size_t to) {
        for (std::size_t i = from; i < to; ++i)
            if (src[i] == '\n') ++line;
    };
    while (pos < src.size()) {
        std::size_t open = src.find('{', pos);
        if (open == std::string::npos || open + 1 >= src.size() ||
            (src[open + 1] != '{' && src[open + 1] != '%')) {
            if (open == std::string::npos) {
                segments.push_back({Segment::Literal, src.substr(pos), line});
                break;
            }
            // lone '{'
            segments.push_back({Segment::Literal, src.substr(pos, open - pos + 1), line});
            count_lines(pos, open + 1);
            pos = open + 1;
            continue;
        }
        if (open > pos) {
            segments.push_back({Segment::Literal, src.substr(pos, open - pos), line});
            count_lines(pos, open);
        }
        bool is_output = src[open + 1] == '{';
        std::string close = is_output ? "}}" : "%}";
        std::size_t end = src.find(close, open + 2);
        if (end == std::string::npos)
            throw TemplateSyntaxError(line, is_output ? "unterminated '{{'" : "unterminated '{%'");
        std::string body = src.substr(open + 2, end - open - 2);
        // whitespace-control markers are accepted and treated as plain trims
        bool trim_before = !body.empty() && body.front() == '-';
        bool trim_after = !body.empty() && body.back() == '-';
        if (trim_before) body.erase(body.begin());
        if (trim_after) body.pop_back();
        if (trim_before && !segments.empty() && segments.back().kind == Segment::Literal) {
            auto& lit = segments.back().body;
            while (!lit.empty() && std::isspace(static_cast<unsigned char>(lit.back()))) lit.pop_back();
        }
        segments.push_back({is_output ? Segment::Output : Segment::Tag, body, line});
        count_lines(open, end + 2);
        pos = end + 2;
        if (trim_after) {
            while (pos < src.size() && std::isspace(static_cast<unsigned char>(src[pos]))) {
                if (src[pos] == '\n') ++line;
                ++pos;
            }
        }
    }
    return segments;
}

std::string trim_copy(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

class TemplateParser {
public:
    explicit TemplateParser(std::vector<Segment> segments) : segments_(std::move(segments)) {}

    std::shared_ptr<Node> parse() {
        auto root = parse_sequence({});
        if (pos_ < segments_.size())
            throw TemplateSyntaxError(segments_[pos_].line,
                                      "unexpected '" + first_word(segments_[pos_].body) + "'");
        return root;
    }

private:
    static std::string first_word(const std::string& s) {
        std::string t = trim_copy(s);
        auto sp = t.find_first_of(" \t\r\n");
        return sp == std::string::npos ? t : t.substr(0, sp);
    }

    // parses until one of `stops` (tag keywords) is seen; the stop tag is left unconsumed
    std::shared_ptr<Node> parse_sequence(const std::set<std::string>& stops) {
        auto node = std::make_shared<Node>();
        node->kind = Node::Sequence;
        while (pos_ < segments_.size()) {
            const Segment& seg = segments_[pos_];
            if (seg.kind == Segment::Literal) {
                auto lit = std::make_shared<Node>();
                lit->kind = Node::Text;
                lit->text = seg.body;
                node->children.push_back(lit);
                ++pos_;
            } else if (seg.kind == Segment::Output) {
                auto out = std::make_shared<Node>();
                out->kind = Node::Output;
                out->expr = ExprParser(seg.body, seg.line).parse();
                node->children.push_back(out);
                ++pos_;
            } else {
                std::string word = first_word(seg.body);
                if (stops.count(word)) return node;
                if (word == "for")
                    node->children.push_back(parse_for());
                else if (word == "if")
                    node->children.push_back(parse_if());
                else if (word == "endfor" || word == "endif" || word == "elif" || word == "else")
                    throw TemplateSyntaxError(seg.line, "unexpected '" + word + "'");
                else
                    throw UnsupportedConstruct(word);
            }
        }
        if (!stops.empty())
            throw TemplateSyntaxError(segments_.empty() ? 1 : segments_.back().line,
                                      "unclosed block: expected " + *stops.begin());
        return node;
    }

    std::shared_ptr<Node> parse_for() {
        const Segment& seg = segments_[pos_++];
        static const std::regex re(R"(^\s*for\s+([A-Za-z_][A-Za-z0-9_]*)\s+in\s+(.+)$)");
        std::smatch m;
        if (!std::regex_match(seg.body, m, re))
            throw TemplateSyntaxError(seg.line, "malformed for tag");
        auto node = std::make_shared<Node>();
        node->kind = Node::For;
        node->text = m[1];
        node->expr = ExprParser(m[2], seg.line).parse();
        node->children.push_back(parse_sequence({"endfor"}));
        expect_tag("endfor", seg.line);
        return node;
    }

    std::shared_ptr<Node> parse_if() {
        const Segment& seg = segments_[pos_++];
        auto node = std::make_shared<Node>();
        node->kind = Node::If;
        std::string cond_src = trim_copy(seg.body).substr(2);  // drop "if"
        node->conditions.push_back(ExprParser(cond_src, seg.line).parse());
        node->bodies.push_back(parse_sequence({"elif", "else", "endif"}));
        while (pos_ < segments_.size()) {
            std::string word = first_word(segments_[pos_].body);
            if (word == "elif") {
                const Segment& s = segments_[pos_++];
                std::string body = trim_copy(s.body).substr(4);
                node->conditions.push_back(ExprParser(body, s.line).parse());
                node->bodies.push_back(parse_sequence({"elif", "else", "endif"}));
            } else if (word == "else") {
                ++pos_;
                node->conditions.push_back(nullptr);
                node->bodies.push_back(parse_sequence({"endif"}));
                break;
            } else {
                break;
            }
        }
        expect_tag("endif", seg.line);
        return node;
    }

    void expect_tag(const std::string& word, std::size_t open_line) {
        if (pos_ >= segments_.size() || segments_[pos_].kind != Segment::Tag ||
            first_word(segments_[pos_].body) != word)
            throw TemplateSyntaxError(open_line, "unclosed block: expected " + word);
        ++pos_;
    }

    std::vector<Segment> segments_;
    std::size_t pos_ = 0;
};

// --------------------------------------------------------------------- render

struct Env {
    std::vector<std::pair<std::string, Value>> vars;

    const Value* find(const std::string& name) const {
        for (auto it = vars.rbegin(); it != vars.rend(); ++it)
            if (it->first == name) return &it->second;
        return nullptr;
    }
};

bool truthy(const Value& v) {
    struct Visitor {
        bool operator()(std::monostate) const { return false; }
        bool operator()(bool b) const { return b; }
        bool operator()(std::int64_t i) const { return i != 0; }
        bool operator()(double d) const { return d != 0.0; }
        bool operator()(const std::string& s) const { return !s.empty(); }
        bool operator()(const std::shared_ptr<ValueList>& l) const { return l && !l->empty(); }
        bool operator()(const std::shared_ptr<ValueRow>& r) const { return r && !r->empty(); }
    };
    return std::visit(Visitor{}, v.data);
}

std::string stringify(const Value& v) {
    struct Visitor {
        std::string operator()(std::monostate) const { return ""; }
        std::string operator()(bool b) const { return b ? "true" : "false"; }
        std::string operator()(std::int64_t i) const { return std::to_string(i); }
        std::string operator()(double d) const { return format_double(d); }
        std::string operator()(const std::string& s) const { return s; }
        std::string operator()(const std::shared_ptr<ValueList>&) const {
            throw RenderError("cannot render a list directly; use join");
        }
        std::string operator()(const std::shared_ptr<ValueRow>&) const {
            throw RenderError("cannot render a row directly; access a field");
        }
    };
    return std::visit(Visitor{}, v.data);
}

bool is_numeric(const Value& v) {
    return std::holds_alternative<std::int64_t>(v.data) || std::holds_alternative<double>(v.data);
}

double as_double(const Value& v) {
    if (const auto* i = std::get_if<std::int64_t>(&v.data)) return static_cast<double>(*i);
    return std::get<double>(v.data);
}

bool values_equal(const Value& a, const Value& b) {
    if (is_numeric(a) && is_numeric(b)) return as_double(a) == as_double(b);
    if (a.data.index() != b.data.index()) return false;
    if (std::holds_alternative<std::monostate>(a.data)) return true;
    if (const auto* s = std::get_if<std::string>(&a.data)) return *s == std::get<std::string>(b.data);
    if (const auto* bo = std::get_if<bool>(&a.data)) return *bo == std::get<bool>(b.data);
    if (const auto* l = std::get_if<std::shared_ptr<ValueList>>(&a.data)) {
        const auto& r = std::get<std::shared_ptr<ValueList>>(b.data);
        if ((*l)->size() != r->size()) return false;
        for (std::size_t i = 0; i < r->size(); ++i)
            if (!values_equal((**l)[i], (*r)[i])) return false;
        return true;
    }
    return false;
}

Value field_of(const Value& base, const std::string& name) {
    const auto* row = std::get_if<std::shared_ptr<ValueRow>>(&base.data);
    if (!row) throw RenderError("field access on a non-row value: " + name);
    for (const auto& [k, v] : **row)
        if (k == name) return v;
    throw UndefinedFieldError(name);
}

Value apply_filter(const Expr& e, const Value& input);

Value eval(const Expr& e, const Env& env) {
    switch (e.kind) {
        case ExprKind::Var: {
            const Value* v = env.find(e.text);
            if (!v) throw RenderError("undefined variable: " + e.text);
            return *v;
        }
        case ExprKind::StrLit: return Value::of(e.text);
        case ExprKind::IntLit: return Value::of(e.int_value);
        case ExprKind::FloatLit: return Value::of(e.float_value);
        case ExprKind::BoolLit: return Value::of(e.bool_value);
        case ExprKind::Subscript: return field_of(eval(*e.children[0], env), e.text);
        case ExprKind::Index: {
            Value base = eval(*e.children[0], env);
            const auto* l = std::get_if<std::shared_ptr<ValueList>>(&base.data);
            if (!l) throw RenderError("integer index on a non-list value");
            if (e.int_value < 0 || static_cast<std::size_t>(e.int_value) >= (*l)->size())
                throw RenderError("list index out of range: " + e.text);
            return (**l)[static_cast<std::size_t>(e.int_value)];
        }
        case ExprKind::Attr: return field_of(eval(*e.children[0], env), e.text);
        case ExprKind::Filter: return apply_filter(e, eval(*e.children[0], env));
        case ExprKind::Not: return Value::of(!truthy(eval(*e.children[0], env)));
        case ExprKind::And: {
            Value left = eval(*e.children[0], env);
            if (!truthy(left)) return left;
            return eval(*e.children[1], env);
        }
        case ExprKind::Or: {
            Value left = eval(*e.children[0], env);
            if (truthy(left)) return left;
            return eval(*e.children[1], env);
        }
        case ExprKind::Compare: {
            Value a = eval(*e.children[0], env);
            Value b = eval(*e.children[1], env);
            if (e.text == "==") return Value::of(values_equal(a, b));
            if (e.text == "!=") return Value::of(!values_equal(a, b));
            double cmp;
            if (is_numeric(a) && is_numeric(b)) {
                cmp = as_double(a) - as_double(b);
            } else if (std::holds_alternative<std::string>(a.data) &&
                       std::holds_alternative<std::string>(b.data)) {
                cmp = static_cast<double>(
                    std::get<std::string>(a.data).compare(std::get<std::string>(b.data)));
            } else {
                throw RenderError("cannot order values of mismatched types");
            }
            if (e.text == "<") return Value::of(cmp < 0);
            if (e.text == "<=") return Value::of(cmp <= 0);
            if (e.text == ">") return Value::of(cmp > 0);
            return Value::of(cmp >= 0);
        }
    }
    throw RenderError("unreachable expression kind");
}

Value apply_filter(const Expr& e, const Value& input) {
    const std::string& name = e.text;
    if (name == "length") {
        if (const auto* l = std::get_if<std::shared_ptr<ValueList>>(&input.data))
            return Value::of(static_cast<std::int64_t>((*l)->size()));
        if (const auto* s = std::get_if<std::string>(&input.data))
            return Value::of(static_cast<std::int64_t>(s->size()));
        if (const auto* r = std::get_if<std::shared_ptr<ValueRow>>(&input.data))
            return Value::of(static_cast<std::int64_t>((*r)->size()));
        throw RenderError("length applied to a scalar");
    }
    if (name == "join") {
        std::string sep = e.args.empty() ? "" : e.args[0];
        const auto* l = std::get_if<std::shared_ptr<ValueList>>(&input.data);
        if (!l) throw RenderError("join applied to a non-list");
        std::string out;
        for (std::size_t i = 0; i < (*l)->size(); ++i) {
            if (i) out += sep;
            out += stringify((**l)[i]);
        }
        return Value::of(std::move(out));
    }
    if (name == "unique") {
        const auto* l = std::get_if<std::shared_ptr<ValueList>>(&input.data);
        if (!l) throw RenderError("unique applied to a non-list");
        ValueList out;
        for (const auto& v : **l) {
            bool seen = false;
            for (const auto& u : out)
                if (values_equal(u, v)) { seen = true; break; }
            if (!seen) out.push_back(v);
        }
        return Value::of(std::move(out));
    }
    if (name == "list") {
        if (!std::holds_alternative<std::shared_ptr<ValueList>>(input.data))
            throw RenderError("list applied to a non-list");
        return input;
    }
    if (name == "map") {
        std::string attr;
        for (const auto& [k, v] : e.kwargs)
            if (k == "attribute") attr = v;
        if (attr.empty()) throw RenderError("map requires attribute=\"name\"");
        const auto* l = std::get_if<std::shared_ptr<ValueList>>(&input.data);
        if (!l) throw RenderError("map applied to a non-list");
        ValueList out;
        for (const auto& v : **l) out.push_back(field_of(v, attr));
        return Value::of(std::move(out));
    }
    throw UnsupportedConstruct(name);
}

void render_node(const Node& node, Env& env, std::string& out) {
    switch (node.kind) {
        case Node::Text:
            out += node.text;
            break;
        case Node::Output:
            out += stringify(eval(*node.expr, env));
            break;
        case Node::Sequence:
            for (const auto& child : node.children) render_node(*child, env, out);
            break;
        case Node::For: {
            Value iterable = eval(*node.expr, env);
            const auto* l = std::get_if<std::shared_ptr<ValueList>>(&iterable.data);
            if (!l) throw RenderError("for-loop over a non-list value");
            for (const auto& item : **l) {
                env.vars.emplace_back(node.text, item);
                render_node(*node.children[0], env, out);
                env.vars.pop_back();
            }
            break;
        }
        case Node::If: {
            for (std::size_t i = 0; i < node.conditions.size(); ++i) {
                if (!node.conditions[i] || truthy(eval(*node.conditions[i], env))) {
                    render_node(*node.bodies[i], env, out);
                    break;
                }
            }
            break;
        }
    }
}

// --------------------------------------------------------- static field walk

bool is_values_name(const std::string& name) {
    if (name == "values") return true;
    if (name.rfind("values_", 0) != 0) return false;
    std::string suffix = name.substr(7);
    return !suffix.empty() &&
           std::all_of(suffix.begin(), suffix.end(),
                       [](unsigned char c) { return std::isdigit(c); });
}

enum class Shape { Other, ValuesList, RowLike };

struct StaticWalk {
    std::set<std::string> fields;
    std::map<std::string, Shape> var_shape;  // loop variables
    bool loops_over_values = false;
    bool bare_values_output = false;

    Shape classify(const Expr& e) {
        switch (e.kind) {
            case ExprKind::Var:
                if (is_values_name(e.text)) return Shape::ValuesList;
                if (auto it = var_shape.find(e.text); it != var_shape.end()) return it->second;
                return Shape::Other;
            case ExprKind::Filter: {
                Shape inner = walk_expr(*e.children[0]);
                if (e.text == "unique" || e.text == "list")
                    return inner;
                if (e.text == "map") {
                    if (inner == Shape::ValuesList)
                        for (const auto& [k, v] : e.kwargs)
                            if (k == "attribute") fields.insert(v);
                    return Shape::Other;  // elements are scalars after map
                }
                return Shape::Other;
            }
            case ExprKind::Subscript:
            case ExprKind::Attr: {
                Shape base = walk_expr(*e.children[0]);
                if (base == Shape::RowLike) fields.insert(e.text);
                return Shape::Other;
            }
            case ExprKind::Index: {
                Shape base = walk_expr(*e.children[0]);
                return base == Shape::ValuesList ? Shape::RowLike : Shape::Other;
            }
            default:
                for (const auto& c : e.children) walk_expr(*c);
                return Shape::Other;
        }
    }

    Shape walk_expr(const Expr& e) { return classify(e); }

    void walk(const Node& node) {
        switch (node.kind) {
            case Node::Text:
                break;
            case Node::Output: {
                if (node.expr->kind == ExprKind::Var && is_values_name(node.expr->text))
                    bare_values_output = true;
                walk_expr(*node.expr);
                break;
            }
            case Node::Sequence:
                for (const auto& c : node.children) walk(*c);
                break;
            case Node::For: {
                Shape iter = walk_expr(*node.expr);
                if (iter == Shape::ValuesList) loops_over_values = true;
                Shape var = iter == Shape::ValuesList ? Shape::RowLike : Shape::Other;
                auto prev = var_shape.find(node.text);
                std::optional<Shape> saved;
                if (prev != var_shape.end()) saved = prev->second;
                var_shape[node.text] = var;
                walk(*node.children[0]);
                if (saved)
                    var_shape[node.text] = *saved;
                else
                    var_shape.erase(node.text);
                break;
            }
            case Node::If:
                for (const auto& c : node.conditions)
                    if (c) walk_expr(*c);
                for (const auto& b : node.bodies) walk(*b);
                break;
        }
    }
};

}  // namespace

Value Value::from_cell(const Cell& c) {
    struct Visitor {
        Value operator()(std::monostate) const { return Value::null(); }
        Value operator()(std::int64_t v) const { return Value::of(v); }
        Value operator()(double v) const { return Value::of(v); }
        Value operator()(bool v) const { return Value::of(v); }
        Value operator()(const std::string& v) const { return Value::of(v); }
    };
    return std::visit(Visitor{}, c);
}

}  // namespace jinja

RenderBinding binding_from(const SqlExecutionResult& exec) {
    RenderBinding binding;
    for (const auto& qr : exec.per_query) {
        jinja::ValueList rows;
        for (const auto& row : qr.rows) {
            jinja::ValueRow vr;
            for (std::size_t c = 0; c < qr.columns.size() && c < row.size(); ++c)
                vr.emplace_back(qr.columns[c], jinja::Value::from_cell(row[c]));
            rows.push_back(jinja::Value::of(std::move(vr)));
        }
        binding.query_rows.push_back(std::move(rows));
    }
    return binding;
}

std::string AlignmentReport::to_text() const {
    if (aligned) return "aligned";
    std::string out;
    if (!missing_fields.empty()) {
        out += "missing fields: ";
        for (std::size_t i = 0; i < missing_fields.size(); ++i) {
            if (i) out += ", ";
            out += missing_fields[i];
        }
    }
    for (const auto& issue : shape_issues) {
        if (!out.empty()) out += "; ";
        out += issue;
    }
    return out;
}

Jinja2Template parse_template(const std::string& source) {
    Jinja2Template tmpl;
    tmpl.source = source;
    tmpl.root = jinja::TemplateParser(jinja::split_segments(source)).parse();
    return tmpl;
}

std::string render(const Jinja2Template& tmpl, const RenderBinding& binding) {
    if (!tmpl.root) throw RenderError("template not parsed");
    jinja::Env env;
    for (std::size_t i = 0; i < binding.query_rows.size(); ++i) {
        std::string name = i == 0 ? "values" : "values_" + std::to_string(i + 1);
        env.vars.emplace_back(name, jinja::Value::of(binding.query_rows[i]));
    }
    if (binding.query_rows.empty()) env.vars.emplace_back("values", jinja::Value::of(jinja::ValueList{}));
    std::string out;
    jinja::render_node(*tmpl.root, env, out);
    return out;
}

std::set<std::string> extract_field_refs(const Jinja2Template& tmpl) {
    if (!tmpl.root) return {};
    jinja::StaticWalk walk;
    walk.walk(*tmpl.root);
    return walk.fields;
}

AlignmentReport check_alignment(const Jinja2Template& tmpl, const SqlExecutionResult& exec) {
    AlignmentReport report;
    std::set<std::string> columns;
    for (const auto& qr : exec.per_query)
        for (const auto& c : qr.columns) columns.insert(c);
    for (const auto& field : extract_field_refs(tmpl))
        if (!columns.count(field)) report.missing_fields.push_back(field);

    jinja::StaticWalk walk;
    if (tmpl.root) walk.walk(*tmpl.root);
    bool all_scalar = !exec.per_query.empty();
    bool any_multi_row = false;
    for (const auto& qr : exec.per_query) {
        if (qr.error || qr.rows.size() != 1 || qr.columns.size() != 1) all_scalar = false;
        if (qr.rows.size() > 1) any_multi_row = true;
    }
    if (walk.loops_over_values && all_scalar) report.shape_issues.push_back("loop over scalar result");
    if (walk.bare_values_output && any_multi_row)
        report.shape_issues.push_back("scalar use of multi-row result");

    report.aligned = report.missing_fields.empty() && report.shape_issues.empty();
    return report;
}

}  // namespace facts
