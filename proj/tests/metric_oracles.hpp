#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "facts/metrics.hpp"

// ---------------------------------------------------------------------------
// Independent brute-force oracles. Deliberately written with different data
// structures than the library (joined-string n-gram keys, memoized recursive
// LCS, exhaustive alignment search) so shared bugs are unlikely.
// ---------------------------------------------------------------------------
namespace oracle {

using facts::porter_stem;

using Tokens = std::vector<std::string>;

std::map<std::string, int> ngram_table(const Tokens& toks, std::size_t n) {
    std::map<std::string, int> table;
    for (std::size_t i = 0; i + n <= toks.size(); ++i) {
        std::string key;
        for (std::size_t j = 0; j < n; ++j) key += toks[i + j] + "\x1f";
        ++table[key];
    }
    return table;
}

double bleu(const Tokens& cand, const Tokens& ref) {
    if (cand.empty()) return 0.0;
    double log_sum = 0.0;
    for (std::size_t n = 1; n <= 4; ++n) {
        auto c = ngram_table(cand, n);
        auto r = ngram_table(ref, n);
        double matched = 0, total = 0;
        for (const auto& [gram, count] : c) {
            total += count;
            auto it = r.find(gram);
            if (it != r.end()) matched += std::min(count, it->second);
        }
        if (total == 0) return 0.0;
        if (matched == 0) {
            if (n == 1) return 0.0;
            matched += 1;
            total += 1;
        }
        log_sum += std::log(matched / total);
    }
    double bp = cand.size() < ref.size()
                    ? std::exp(1.0 - double(ref.size()) / double(cand.size()))
                    : 1.0;
    return 100.0 * bp * std::exp(log_sum / 4.0);
}

int lcs_rec(const Tokens& a, const Tokens& b, std::size_t i, std::size_t j,
            std::map<std::pair<std::size_t, std::size_t>, int>& memo) {
    if (i == a.size() || j == b.size()) return 0;
    auto key = std::make_pair(i, j);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    int best;
    if (a[i] == b[j])
        best = 1 + lcs_rec(a, b, i + 1, j + 1, memo);
    else
        best = std::max(lcs_rec(a, b, i + 1, j, memo), lcs_rec(a, b, i, j + 1, memo));
    memo[key] = best;
    return best;
}

double rouge_l(const Tokens& cand, const Tokens& ref) {
    if (cand.empty() || ref.empty()) return 0.0;
    std::map<std::pair<std::size_t, std::size_t>, int> memo;
    double lcs = lcs_rec(cand, ref, 0, 0, memo);
    if (lcs == 0) return 0.0;
    double p = lcs / cand.size(), r = lcs / ref.size();
    return 100.0 * 2 * p * r / (p + r);
}

struct MeteorBest {
    int exact = -1;
    int total = -1;
    int chunks = 1 << 20;
};

int count_chunks(const std::vector<int>& cand_to_ref) {
    int chunks = 0, prev_ref = -10;
    for (std::size_t i = 0; i < cand_to_ref.size(); ++i) {
        if (cand_to_ref[i] < 0) continue;
        bool adjacent = false;
        if (i > 0 && cand_to_ref[i - 1] >= 0 && cand_to_ref[i - 1] == cand_to_ref[i] - 1)
            adjacent = true;
        if (!adjacent) ++chunks;
        prev_ref = cand_to_ref[i];
    }
    (void)prev_ref;
    return chunks;
}

// exhaustive search over every alignment; prefers more exact matches, then
// more total matches, then fewer chunks
void search(const Tokens& cand, const Tokens& ref, const Tokens& cand_stem,
            const Tokens& ref_stem, std::size_t i, std::vector<int>& cand_to_ref,
            std::vector<bool>& ref_used, int exact, int total, MeteorBest& best) {
    if (i == cand.size()) {
        int chunks = count_chunks(cand_to_ref);
        if (exact > best.exact ||
            (exact == best.exact &&
             (total > best.total || (total == best.total && chunks < best.chunks)))) {
            best = {exact, total, chunks};
        }
        return;
    }
    for (std::size_t j = 0; j < ref.size(); ++j) {
        if (ref_used[j]) continue;
        bool ex = cand[i] == ref[j];
        bool st = !ex && cand_stem[i] == ref_stem[j];
        if (!ex && !st) continue;
        ref_used[j] = true;
        cand_to_ref[i] = int(j);
        search(cand, ref, cand_stem, ref_stem, i + 1, cand_to_ref, ref_used, exact + (ex ? 1 : 0),
               total + 1, best);
        ref_used[j] = false;
        cand_to_ref[i] = -1;
    }
    search(cand, ref, cand_stem, ref_stem, i + 1, cand_to_ref, ref_used, exact, total, best);
}

double meteor(const Tokens& cand, const Tokens& ref) {
    if (cand.empty() || ref.empty()) return 0.0;
    Tokens cand_stem, ref_stem;
    for (const auto& t : cand) cand_stem.push_back(porter_stem(t));
    for (const auto& t : ref) ref_stem.push_back(porter_stem(t));
    MeteorBest best;
    std::vector<int> cand_to_ref(cand.size(), -1);
    std::vector<bool> ref_used(ref.size(), false);
    search(cand, ref, cand_stem, ref_stem, 0, cand_to_ref, ref_used, 0, 0, best);
    if (best.total <= 0) return 0.0;
    double m = best.total;
    double p = m / cand.size(), r = m / ref.size();
    double f_mean = p * r / (0.9 * p + 0.1 * r);
    double penalty = 0.5 * std::pow(best.chunks / m, 3.0);
    return 100.0 * f_mean * (1.0 - penalty);
}

}  // namespace oracle
