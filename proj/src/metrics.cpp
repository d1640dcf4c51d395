#include "facts/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>

namespace facts {

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string current;
    auto flush = [&] {
        if (!current.empty()) {
            tokens.push_back(current);
            current.clear();
        }
    };
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            current += static_cast<char>(std::tolower(c));
        } else if (std::isspace(c)) {
            flush();
        } else {
            flush();
            tokens.push_back(std::string(1, static_cast<char>(c)));
        }
    }
    flush();
    return tokens;
}

// ------------------------------------------------------------- Porter stemmer

namespace {

bool is_consonant(const std::string& w, std::size_t i) {
    char c = w[i];
    if (c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u') return false;
    if (c == 'y') return i == 0 ? true : !is_consonant(w, i - 1);
    return true;
}

// number of VC sequences in w[0..end)
int measure(const std::string& w, std::size_t end) {
    int m = 0;
    std::size_t i = 0;
    while (i < end && is_consonant(w, i)) ++i;
    while (i < end) {
        while (i < end && !is_consonant(w, i)) ++i;
        if (i >= end) break;
        ++m;
        while (i < end && is_consonant(w, i)) ++i;
    }
    return m;
}

bool has_vowel(const std::string& w, std::size_t end) {
    for (std::size_t i = 0; i < end; ++i)
        if (!is_consonant(w, i)) return true;
    return false;
}

bool double_consonant(const std::string& w) {
    auto n = w.size();
    return n >= 2 && w[n - 1] == w[n - 2] && is_consonant(w, n - 1);
}

// consonant-vowel-consonant where the final consonant is not w, x or y
bool cvc(const std::string& w) {
    auto n = w.size();
    if (n < 3) return false;
    if (!is_consonant(w, n - 3) || is_consonant(w, n - 2) || !is_consonant(w, n - 1)) return false;
    char c = w[n - 1];
    return c != 'w' && c != 'x' && c != 'y';
}

bool ends_with(const std::string& w, const std::string& suffix) {
    return w.size() >= suffix.size() && w.compare(w.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// replace `suffix` with `repl` when the stem measure condition holds
bool replace_if(std::string& w, const std::string& suffix, const std::string& repl, int min_m) {
    if (!ends_with(w, suffix)) return false;
    std::size_t stem_len = w.size() - suffix.size();
    if (measure(w, stem_len) > min_m) {
        w = w.substr(0, stem_len) + repl;
        return true;
    }
    return true;  // suffix matched; rule consumed even if condition failed
}

}  // namespace

std::string porter_stem(const std::string& word) {
    std::string w;
    for (unsigned char c : word) w += static_cast<char>(std::tolower(c));
    if (w.size() <= 2) return w;
    for (char c : w)
        if (!std::islower(static_cast<unsigned char>(c))) return w;  // stem alphabetic words only

    // step 1a
    if (ends_with(w, "sses")) w = w.substr(0, w.size() - 2);
    else if (ends_with(w, "ies")) w = w.substr(0, w.size() - 2);
    else if (!ends_with(w, "ss") && ends_with(w, "s")) w.pop_back();

    // step 1b
    bool step1b_extra = false;
    if (ends_with(w, "eed")) {
        if (measure(w, w.size() - 3) > 0) w.pop_back();
    } else if (ends_with(w, "ed") && has_vowel(w, w.size() - 2)) {
        w = w.substr(0, w.size() - 2);
        step1b_extra = true;
    } else if (ends_with(w, "ing") && has_vowel(w, w.size() - 3)) {
        w = w.substr(0, w.size() - 3);
        step1b_extra = true;
    }
    if (step1b_extra) {
        if (ends_with(w, "at") || ends_with(w, "bl") || ends_with(w, "iz")) {
            w += 'e';
        } else if (double_consonant(w) && !ends_with(w, "l") && !ends_with(w, "s") &&
                   !ends_with(w, "z")) {
            w.pop_back();
        } else if (measure(w, w.size()) == 1 && cvc(w)) {
            w += 'e';
        }
    }

    // step 1c
    if (ends_with(w, "y") && has_vowel(w, w.size() - 1)) w.back() = 'i';

    // step 2
    static const std::vector<std::pair<std::string, std::string>> step2 = {
        {"ational", "ate"}, {"tional", "tion"}, {"enci", "ence"}, {"anci", "ance"},
        {"izer", "ize"},    {"abli", "able"},   {"alli", "al"},   {"entli", "ent"},
        {"eli", "e"},       {"ousli", "ous"},   {"ization", "ize"}, {"ation", "ate"},
        {"ator", "ate"},    {"alism", "al"},    {"iveness", "ive"}, {"fulness", "ful"},
        {"ousness", "ous"}, {"aliti", "al"},    {"iviti", "ive"},   {"biliti", "ble"}};
    for (const auto& [suf, repl] : step2) {
        if (ends_with(w, suf)) {
            replace_if(w, suf, repl, 0);
            break;
        }
    }

    // step 3
    static const std::vector<std::pair<std::string, std::string>> step3 = {
        {"icate", "ic"}, {"ative", ""}, {"alize", "al"}, {"iciti", "ic"},
        {"ical", "ic"},  {"ful", ""},   {"ness", ""}};
    for (const auto& [suf, repl] : step3) {
        if (ends_with(w, suf)) {
            replace_if(w, suf, repl, 0);
            break;
        }
    }

    // step 4
    static const std::vector<std::string> step4 = {
        "al", "ance", "ence", "er", "ic", "able", "ible", "ant", "ement", "ment",
        "ent", "ou", "ism", "ate", "iti", "ous", "ive", "ize"};
    for (const auto& suf : step4) {
        if (ends_with(w, suf)) {
            std::size_t stem_len = w.size() - suf.size();
            if (measure(w, stem_len) > 1) w = w.substr(0, stem_len);
            break;
        }
    }
    if (ends_with(w, "ion") && w.size() >= 4) {
        char prev = w[w.size() - 4];
        if ((prev == 's' || prev == 't') && measure(w, w.size() - 3) > 1)
            w = w.substr(0, w.size() - 3);
    }

    // step 5a
    if (ends_with(w, "e")) {
        int m = measure(w, w.size() - 1);
        if (m > 1 || (m == 1 && !cvc(w.substr(0, w.size() - 1)))) w.pop_back();
    }
    // step 5b
    if (double_consonant(w) && ends_with(w, "l") && measure(w, w.size()) > 1) w.pop_back();

    return w;
}

// ----------------------------------------------------------------------- BLEU

void BleuStats::add(const std::vector<std::string>& candidate,
                    const std::vector<std::vector<std::string>>& references) {
    if (references.empty()) throw Error("bleu requires at least one reference");
    candidate_len += candidate.size();
    // closest reference length (ties resolved toward the shorter)
    std::size_t best = references[0].size();
    for (const auto& r : references) {
        auto diff = [&](std::size_t len) {
            return len > candidate.size() ? len - candidate.size() : candidate.size() - len;
        };
        if (diff(r.size()) < diff(best) || (diff(r.size()) == diff(best) && r.size() < best))
            best = r.size();
    }
    reference_len += best;

    for (std::size_t n = 1; n <= 4; ++n) {
        if (candidate.size() < n) continue;
        std::map<std::vector<std::string>, std::size_t> cand_counts;
        for (std::size_t i = 0; i + n <= candidate.size(); ++i)
            ++cand_counts[std::vector<std::string>(candidate.begin() + i, candidate.begin() + i + n)];
        std::map<std::vector<std::string>, std::size_t> ref_max;
        for (const auto& r : references) {
            std::map<std::vector<std::string>, std::size_t> counts;
            for (std::size_t i = 0; i + n <= r.size(); ++i)
                ++counts[std::vector<std::string>(r.begin() + i, r.begin() + i + n)];
            for (const auto& [gram, c] : counts) ref_max[gram] = std::max(ref_max[gram], c);
        }
        for (const auto& [gram, c] : cand_counts) {
            auto it = ref_max.find(gram);
            matched[n - 1] += std::min(c, it == ref_max.end() ? 0 : it->second);
            total[n - 1] += c;
        }
    }
}

double BleuStats::score() const {
    if (candidate_len == 0) return 0.0;
    double log_sum = 0.0;
    for (std::size_t n = 0; n < 4; ++n) {
        double m = static_cast<double>(matched[n]);
        double t = static_cast<double>(total[n]);
        if (t == 0) return 0.0;  // candidate shorter than n everywhere
        if (m == 0) {
            if (n == 0) return 0.0;  // no unigram overlap at all
            m += 1.0;                // add-one smoothing for n >= 2
            t += 1.0;
        }
        log_sum += std::log(m / t);
    }
    double bp = candidate_len < reference_len
                    ? std::exp(1.0 - static_cast<double>(reference_len) / candidate_len)
                    : 1.0;
    return 100.0 * bp * std::exp(log_sum / 4.0);
}

double bleu(const std::string& candidate, const std::vector<std::string>& references) {
    std::vector<std::string> cand = tokenize(candidate);
    if (cand.empty()) return 0.0;
    std::vector<std::vector<std::string>> refs;
    for (const auto& r : references) refs.push_back(tokenize(r));
    BleuStats stats;
    stats.add(cand, refs);
    return stats.score();
}

// -------------------------------------------------------------------- ROUGE-L

double rouge_l_f1(const std::string& candidate, const std::string& reference) {
    std::vector<std::string> a = tokenize(candidate);
    std::vector<std::string> b = tokenize(reference);
    if (a.empty() || b.empty()) return 0.0;
    std::vector<std::vector<std::size_t>> dp(a.size() + 1, std::vector<std::size_t>(b.size() + 1, 0));
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j)
            dp[i + 1][j + 1] = a[i] == b[j] ? dp[i][j] + 1 : std::max(dp[i][j + 1], dp[i + 1][j]);
    double lcs = static_cast<double>(dp[a.size()][b.size()]);
    if (lcs == 0) return 0.0;
    double p = lcs / a.size();
    double r = lcs / b.size();
    return 100.0 * 2 * p * r / (p + r);
}

// --------------------------------------------------------------------- METEOR

namespace {

// two-stage greedy leftmost alignment: exact matches first, then stemmed
// matches over the leftovers
std::vector<std::pair<std::size_t, std::size_t>> align_unigrams(
    const std::vector<std::string>& cand, const std::vector<std::string>& ref) {
    std::vector<std::pair<std::size_t, std::size_t>> matches;
    std::vector<bool> cand_used(cand.size(), false), ref_used(ref.size(), false);
    for (std::size_t i = 0; i < cand.size(); ++i) {
        for (std::size_t j = 0; j < ref.size(); ++j) {
            if (!ref_used[j] && cand[i] == ref[j]) {
                matches.emplace_back(i, j);
                cand_used[i] = ref_used[j] = true;
                break;
            }
        }
    }
    for (std::size_t i = 0; i < cand.size(); ++i) {
        if (cand_used[i]) continue;
        std::string stem = porter_stem(cand[i]);
        for (std::size_t j = 0; j < ref.size(); ++j) {
            if (!ref_used[j] && porter_stem(ref[j]) == stem) {
                matches.emplace_back(i, j);
                cand_used[i] = ref_used[j] = true;
                break;
            }
        }
    }
    std::sort(matches.begin(), matches.end());
    return matches;
}

}  // namespace

double meteor(const std::string& candidate, const std::string& reference) {
    std::vector<std::string> cand = tokenize(candidate);
    std::vector<std::string> ref = tokenize(reference);
    if (cand.empty() || ref.empty()) return 0.0;
    auto matches = align_unigrams(cand, ref);
    if (matches.empty()) return 0.0;

    double m = static_cast<double>(matches.size());
    double p = m / cand.size();
    double r = m / ref.size();
    double f_mean = p * r / (0.9 * p + 0.1 * r);

    std::size_t chunks = 1;
    for (std::size_t k = 1; k < matches.size(); ++k)
        if (matches[k].first != matches[k - 1].first + 1 ||
            matches[k].second != matches[k - 1].second + 1)
            ++chunks;
    double penalty = 0.5 * std::pow(static_cast<double>(chunks) / m, 3.0);
    return 100.0 * f_mean * (1.0 - penalty);
}

double pass_rate(const std::vector<PipelineOutcome>& outcomes) {
    if (outcomes.empty()) throw EmptyOutcomes("pass_rate over zero outcomes");
    std::size_t ok = 0;
    for (const auto& o : outcomes)
        if (o.sql_ok) ++ok;
    return static_cast<double>(ok) / outcomes.size();
}

}  // namespace facts
