#pragma once

// Corpus BLEU-n (clipped n-gram precisions, geometric mean, brevity penalty,
// no smoothing) and ROUGE-L (per-sentence LCS F1, averaged). Whitespace
// tokenization, same as the data model.

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace mmslt::metrics {

inline std::vector<std::string> tokenize(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

namespace detail {

using NgramCounts = std::map<std::vector<std::string>, long>;

inline NgramCounts ngram_counts(const std::vector<std::string>& toks, int n) {
    NgramCounts counts;
    if (static_cast<int>(toks.size()) < n) return counts;
    for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= toks.size(); ++i) {
        counts[std::vector<std::string>(toks.begin() + static_cast<std::ptrdiff_t>(i),
                                        toks.begin() + static_cast<std::ptrdiff_t>(i) + n)]++;
    }
    return counts;
}

inline long lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::vector<std::vector<long>> dp(a.size() + 1, std::vector<long>(b.size() + 1, 0));
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            dp[i][j] = a[i - 1] == b[j - 1] ? dp[i - 1][j - 1] + 1
                                            : std::max(dp[i - 1][j], dp[i][j - 1]);
        }
    }
    return dp[a.size()][b.size()];
}

}  // namespace detail

// corpus BLEU-n in [0, 100]
inline double bleu(const std::vector<std::string>& hypotheses,
                   const std::vector<std::string>& references, int n) {
    if (n < 1 || n > 4) throw std::invalid_argument("bleu: order must be 1..4");
    if (hypotheses.size() != references.size()) {
        throw std::invalid_argument("bleu: hypothesis/reference count mismatch");
    }
    if (hypotheses.empty()) throw std::invalid_argument("bleu: empty corpus");
    std::vector<long> matched(static_cast<std::size_t>(n), 0);
    std::vector<long> total(static_cast<std::size_t>(n), 0);
    long hyp_len = 0;
    long ref_len = 0;
    for (std::size_t i = 0; i < hypotheses.size(); ++i) {
        const auto hyp = tokenize(hypotheses[i]);
        const auto ref = tokenize(references[i]);
        hyp_len += static_cast<long>(hyp.size());
        ref_len += static_cast<long>(ref.size());
        for (int k = 1; k <= n; ++k) {
            const auto hc = detail::ngram_counts(hyp, k);
            const auto rc = detail::ngram_counts(ref, k);
            for (const auto& [gram, count] : hc) {
                total[static_cast<std::size_t>(k - 1)] += count;
                auto it = rc.find(gram);
                if (it != rc.end()) {
                    matched[static_cast<std::size_t>(k - 1)] += std::min(count, it->second);
                }
            }
        }
    }
    if (hyp_len == 0) return 0.0;
    double log_precision = 0.0;
    for (int k = 0; k < n; ++k) {
        if (total[static_cast<std::size_t>(k)] == 0 || matched[static_cast<std::size_t>(k)] == 0) {
            return 0.0;
        }
        log_precision += std::log(static_cast<double>(matched[static_cast<std::size_t>(k)]) /
                                  static_cast<double>(total[static_cast<std::size_t>(k)]));
    }
    log_precision /= n;
    const double bp =
        std::min(1.0, std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len)));
    return 100.0 * bp * std::exp(log_precision);
}

// per-sentence LCS F1, 0 when LCS = 0, averaged over the corpus, x100
inline double rouge_l(const std::vector<std::string>& hypotheses,
                      const std::vector<std::string>& references) {
    if (hypotheses.size() != references.size()) {
        throw std::invalid_argument("rouge_l: hypothesis/reference count mismatch");
    }
    if (hypotheses.empty()) throw std::invalid_argument("rouge_l: empty corpus");
    double total = 0.0;
    for (std::size_t i = 0; i < hypotheses.size(); ++i) {
        const auto hyp = tokenize(hypotheses[i]);
        const auto ref = tokenize(references[i]);
        if (hyp.empty() || ref.empty()) continue;
        const long l = detail::lcs_length(hyp, ref);
        if (l == 0) continue;
        const double p = static_cast<double>(l) / static_cast<double>(hyp.size());
        const double r = static_cast<double>(l) / static_cast<double>(ref.size());
        total += 2.0 * p * r / (p + r);
    }
    return 100.0 * total / static_cast<double>(hypotheses.size());
}

struct SentenceScore {
    std::string id;
    double rouge_l{0.0};
    long hyp_len{0};
    long ref_len{0};
};

struct EvalReport {
    double bleu1{0}, bleu2{0}, bleu3{0}, bleu4{0};
    double rouge{0};
    std::vector<SentenceScore> sentences;
    std::string tokenizer{"whitespace"};
};

inline EvalReport evaluate_corpus(const std::vector<std::string>& ids,
                                  const std::vector<std::string>& hypotheses,
                                  const std::vector<std::string>& references) {
    EvalReport rep;
    rep.bleu1 = bleu(hypotheses, references, 1);
    rep.bleu2 = bleu(hypotheses, references, 2);
    rep.bleu3 = bleu(hypotheses, references, 3);
    rep.bleu4 = bleu(hypotheses, references, 4);
    rep.rouge = rouge_l(hypotheses, references);
    for (std::size_t i = 0; i < hypotheses.size(); ++i) {
        SentenceScore s;
        s.id = i < ids.size() ? ids[i] : std::to_string(i);
        s.rouge_l = rouge_l({hypotheses[i]}, {references[i]});
        s.hyp_len = static_cast<long>(tokenize(hypotheses[i]).size());
        s.ref_len = static_cast<long>(tokenize(references[i]).size());
        rep.sentences.push_back(std::move(s));
    }
    return rep;
}

inline nlohmann::json report_to_json(const EvalReport& rep) {
    nlohmann::json j;
    j["bleu1"] = rep.bleu1;
    j["bleu2"] = rep.bleu2;
    j["bleu3"] = rep.bleu3;
    j["bleu4"] = rep.bleu4;
    j["rouge_l"] = rep.rouge;
    j["tokenizer"] = rep.tokenizer;
    j["sentences"] = nlohmann::json::array();
    for (const auto& s : rep.sentences) {
        j["sentences"].push_back({{"id", s.id},
                                  {"rouge_l", s.rouge_l},
                                  {"hyp_len", s.hyp_len},
                                  {"ref_len", s.ref_len}});
    }
    return j;
}

}  // namespace mmslt::metrics
