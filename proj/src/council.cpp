#include "facts/council.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace facts {

namespace {

constexpr const char* kGuidedSpecificationPrompt =
    R"(You are evaluating a question or filtering rule for table summarization.

Table Information:
{schema_text}

User Query:
{user_query}

Previously Generated Questions or Filtering Rules:
{prior_specs}

Current Question or Filtering Rule to Evaluate:
{artifact}

Is this a good question or filtering rule that will help guide SQL query generation? Answer with YES or NO only.

If NO, provide a brief reason why this question is not helpful.

Output format:
Decision: [YES/NO]
Feedback: [Brief reason if NO, or 'Question is good' if YES])";

constexpr const char* kSqlQueryPrompt =
    R"(You are evaluating a SQL query execution for table summarization.

Table Information:
{schema_text}

Guidance:
{guidance}

SQL Query:
{artifact}

Execution Result:
{execution_result}

Evaluate whether this SQL query is valid and appropriate:
1. Does it execute without errors?
2. Does it return the non-empty data for summarization?
3. Does it filter and select appropriate columns?

Answer with YES or NO only. If NO, provide a brief reason.

Output format:
Decision: [YES/NO]
Feedback: [Brief reason if NO, or 'SQL query is good' if YES])";

constexpr const char* kAlignmentPrompt =
    R"(You are evaluating whether a SQL query result aligns with a Jinja2 template for table summarization.

Table Information:
{schema_text}

SQL Query:
{sql}

Jinja2 Template:
{artifact}

Evaluate:
1. Does the SQL return all fields that the template tries to access?
2. Is the data structure compatible (e.g., if template expects multiple rows, does SQL return them)?
3. Are field names in the template matching the column names returned by SQL?

Answer with YES or NO only. If NO, provide a brief reason.

Output format:
Decision: [YES/NO]
Feedback: [Brief reason if NO, or 'SQL and template are well-aligned' if YES])";

constexpr const char* kSummaryPrompt =
    R"(You are evaluating a generated summary for table summarization.

Table Information:
{schema_text}

User Query:
{user_query}

Generated Summary:
{artifact}

Evaluate summary quality:
1. Relevance to the query
2. Accuracy of information
3. Clarity and coherence
4. Completeness

Answer with YES or NO only. If NO, provide a brief reason.

Output format:
Decision: [YES/NO]
Feedback: [Brief reason if NO, or 'Summary is good' if YES])";

std::string require_slot(ArtifactKind kind, const EvaluationContext& context,
                         const std::string& slot) {
    auto it = context.slots.find(slot);
    if (it == context.slots.end()) throw MissingContextSlot(to_string(kind), slot);
    return it->second;
}

void substitute(std::string& text, const std::string& placeholder, const std::string& value) {
    std::string needle = "{" + placeholder + "}";
    std::size_t pos = 0;
    while ((pos = text.find(needle, pos)) != std::string::npos) {
        text.replace(pos, needle.size(), value);
        pos += value.size();
    }
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string strip_brackets(std::string s) {
    s = trim(s);
    while (!s.empty() && (s.front() == '[' || s.front() == '(')) s.erase(s.begin());
    while (!s.empty() && (s.back() == ']' || s.back() == ')')) s.pop_back();
    return trim(s);
}

}  // namespace

const char* to_string(ArtifactKind kind) {
    switch (kind) {
        case ArtifactKind::GuidedSpecification: return "guided_specification";
        case ArtifactKind::SqlQuery: return "sql_query";
        case ArtifactKind::SqlTemplateAlignment: return "sql_template_alignment";
        case ArtifactKind::Summary: return "summary";
    }
    return "unknown";
}

std::string build_prompt(ArtifactKind kind, const std::string& artifact,
                         const EvaluationContext& context) {
    std::string text;
    switch (kind) {
        case ArtifactKind::GuidedSpecification:
            text = kGuidedSpecificationPrompt;
            substitute(text, "schema_text", require_slot(kind, context, "schema_text"));
            substitute(text, "user_query", require_slot(kind, context, "user_query"));
            substitute(text, "prior_specs", require_slot(kind, context, "prior_specs"));
            break;
        case ArtifactKind::SqlQuery:
            text = kSqlQueryPrompt;
            substitute(text, "schema_text", require_slot(kind, context, "schema_text"));
            substitute(text, "guidance", require_slot(kind, context, "guidance"));
            substitute(text, "execution_result", require_slot(kind, context, "execution_result"));
            break;
        case ArtifactKind::SqlTemplateAlignment:
            text = kAlignmentPrompt;
            substitute(text, "schema_text", require_slot(kind, context, "schema_text"));
            substitute(text, "sql", require_slot(kind, context, "sql"));
            break;
        case ArtifactKind::Summary:
            text = kSummaryPrompt;
            substitute(text, "schema_text", require_slot(kind, context, "schema_text"));
            substitute(text, "user_query", require_slot(kind, context, "user_query"));
            break;
    }
    substitute(text, "artifact", artifact);
    return text;
}

Judgment parse_judgment(const std::string& response) {
    std::istringstream in(response);
    std::string line;
    bool have_decision = false;
    Decision decision = Decision::No;
    std::string feedback;
    while (std::getline(in, line)) {
        std::string l = trim(line);
        std::string low = lower(l);
        if (!have_decision && low.rfind("decision", 0) == 0) {
            auto colon = l.find(':');
            if (colon == std::string::npos) continue;
            std::string value = lower(strip_brackets(l.substr(colon + 1)));
            if (value == "yes") {
                decision = Decision::Yes;
                have_decision = true;
            } else if (value == "no") {
                decision = Decision::No;
                have_decision = true;
            }
        } else if (feedback.empty() && low.rfind("feedback", 0) == 0) {
            auto colon = l.find(':');
            if (colon != std::string::npos) feedback = trim(l.substr(colon + 1));
        }
    }
    if (!have_decision)
        return Judgment{Decision::No, "unparseable council response: " + trim(response).substr(0, 80)};
    if (feedback.empty()) feedback = "no feedback provided";
    return Judgment{decision, feedback};
}

Decision majority_vote(const std::vector<Judgment>& judgments) {
    if (judgments.empty()) throw EmptyJudgments("majority_vote over zero judgments");
    std::size_t yes = 0;
    for (const auto& j : judgments)
        if (j.decision == Decision::Yes) ++yes;
    // strict majority; even-council ties resolve to NO
    return 2 * yes > judgments.size() ? Decision::Yes : Decision::No;
}

std::string aggregate_feedback(const std::vector<Judgment>& judgments, Decision decision) {
    if (judgments.empty()) throw EmptyJudgments("aggregate_feedback over zero judgments");
    auto join_unique = [](const std::vector<Judgment>& js, Decision want) {
        std::string out;
        std::vector<std::string> seen;
        for (const auto& j : js) {
            if (j.decision != want) continue;
            if (std::find(seen.begin(), seen.end(), j.feedback) != seen.end()) continue;
            seen.push_back(j.feedback);
            if (!out.empty()) out += "; ";
            out += j.feedback;
        }
        return out;
    };
    if (decision == Decision::No) return join_unique(judgments, Decision::No);
    std::string dissent = join_unique(judgments, Decision::No);
    std::string out = "accepted by council majority";
    if (!dissent.empty()) out += "; dissent: " + dissent;
    return out;
}

Council::Council(std::vector<CouncilMember> members) : members_(std::move(members)) {
    if (members_.empty()) throw Error("council requires at least one member");
}

CouncilVerdict Council::judge(ArtifactKind kind, const std::string& artifact,
                              const EvaluationContext& context) const {
    std::string prompt = build_prompt(kind, artifact, context);
    CouncilVerdict verdict;
    std::vector<Judgment> judgments;
    for (const auto& member : members_) {
        Judgment j;
        try {
            ChatRequest req{member.model_id, prompt, 0.0, 2048};
            ChatResponse resp = with_retry(*member.provider, req, 3);
            j = parse_judgment(resp.text);
        } catch (const Error&) {
            j = Judgment{Decision::No, "member unavailable"};
        }
        judgments.push_back(j);
        verdict.judgments.emplace_back(member.member_id, j);
    }
    verdict.decision = majority_vote(judgments);
    verdict.consensus_feedback = aggregate_feedback(judgments, verdict.decision);
    return verdict;
}

}  // namespace facts
