#pragma once

#include <array>
#include <string>
#include <vector>

#include "facts/errors.hpp"

namespace facts {

// Shared rule for all three metrics: lowercase, punctuation split into its
// own tokens, whitespace collapsed.
std::vector<std::string> tokenize(const std::string& text);

// Porter stemming, used by METEOR's second matching stage.
std::string porter_stem(const std::string& word);

// Corpus-level BLEU accumulates counts across segments (SacreBLEU
// convention); a single-pair score is a corpus of one.
struct BleuStats {
    std::array<std::size_t, 4> matched{};
    std::array<std::size_t, 4> total{};
    std::size_t candidate_len = 0;
    std::size_t reference_len = 0;  // closest reference length, accumulated

    void add(const std::vector<std::string>& candidate,
             const std::vector<std::vector<std::string>>& references);
    double score() const;  // in [0,100]
};

// BLEU-4 with add-one smoothing on zero counts for n >= 2 and brevity penalty.
double bleu(const std::string& candidate, const std::vector<std::string>& references);

// LCS-based F1 in [0,100].
double rouge_l_f1(const std::string& candidate, const std::string& reference);

// Unigram alignment (exact, then stemmed), F_mean with alpha=0.9 and
// fragmentation penalty 0.5*(chunks/matches)^3; in [0,100].
double meteor(const std::string& candidate, const std::string& reference);

struct PipelineOutcome {
    bool sql_ok = false;
};

double pass_rate(const std::vector<PipelineOutcome>& outcomes);

}  // namespace facts
