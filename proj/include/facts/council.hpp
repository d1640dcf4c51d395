#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "facts/llm.hpp"

namespace facts {

enum class ArtifactKind { GuidedSpecification, SqlQuery, SqlTemplateAlignment, Summary };

const char* to_string(ArtifactKind kind);

enum class Decision { Yes, No };

struct Judgment {
    Decision decision = Decision::No;
    std::string feedback;
};

struct CouncilVerdict {
    Decision decision = Decision::No;
    std::string consensus_feedback;
    std::vector<std::pair<std::string, Judgment>> judgments;  // (member_id, judgment)
};

struct CouncilMember {
    std::string member_id;
    std::shared_ptr<LlmClient> provider;
    std::string model_id;
};

// Named slot values the evaluation prompts substitute: schema_text, user_query,
// prior_specs, sql, execution_result, template, summary.
struct EvaluationContext {
    std::map<std::string, std::string> slots;

    EvaluationContext& set(const std::string& slot, std::string value) {
        slots[slot] = std::move(value);
        return *this;
    }
};

// Fills the evaluation prompt for the artifact kind. Byte-stable for equal
// inputs; throws MissingContextSlot when a required slot is absent.
std::string build_prompt(ArtifactKind kind, const std::string& artifact,
                         const EvaluationContext& context);

// Extracts "Decision: YES|NO" (case-insensitive, brackets tolerated) and the
// "Feedback:" remainder. Anything unparseable fails closed to NO.
Judgment parse_judgment(const std::string& response);

Decision majority_vote(const std::vector<Judgment>& judgments);

std::string aggregate_feedback(const std::vector<Judgment>& judgments, Decision decision);

class Council {
public:
    explicit Council(std::vector<CouncilMember> members);

    const std::vector<CouncilMember>& members() const { return members_; }

    // One completion per member with identical prompt text; a member whose
    // call ultimately fails contributes Judgment(NO, "member unavailable").
    CouncilVerdict judge(ArtifactKind kind, const std::string& artifact,
                         const EvaluationContext& context) const;

private:
    std::vector<CouncilMember> members_;
};

}  // namespace facts
