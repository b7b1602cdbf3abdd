#pragma once

// Autoregressive decoding. A StepScorer maps a generated prefix (ids after
// <BOS>) to log-probabilities over the vocabulary; greedy and beam search sit
// on top of it. Finished hypotheses are ranked by logprob / lp(len) with the
// GNMT penalty lp(len) = ((5+len)/6)^alpha; ties break toward shorter, then
// lexicographically smaller token sequences. The greedy hypothesis is always
// in the candidate pool, so the returned penalized score never falls below
// greedy's.

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace mmslt {

struct DecodeConfig {
    int beam_size{8};
    double length_penalty{1.0};  // alpha
    int max_len{128};
};

struct Hypothesis {
    std::vector<int> tokens;  // generated ids after <BOS>, including <EOS> if emitted
    double logprob{0.0};
    bool finished{false};
};

using StepScorer = std::function<Eigen::VectorXd(const std::vector<int>& prefix)>;

inline double length_penalty_value(int len, double alpha) {
    return std::pow((5.0 + static_cast<double>(len)) / 6.0, alpha);
}

inline double penalized_score(const Hypothesis& h, double alpha) {
    return h.logprob / length_penalty_value(static_cast<int>(h.tokens.size()), alpha);
}

inline Hypothesis greedy_decode_hyp(const StepScorer& scorer, int eos_id, int max_len) {
    if (max_len < 1) throw std::invalid_argument("greedy_decode: max_len must be >= 1");
    Hypothesis h;
    while (static_cast<int>(h.tokens.size()) < max_len) {
        const Eigen::VectorXd logp = scorer(h.tokens);
        Eigen::Index best = 0;
        logp.maxCoeff(&best);
        h.tokens.push_back(static_cast<int>(best));
        h.logprob += logp(best);
        if (static_cast<int>(best) == eos_id) break;
    }
    h.finished = true;
    return h;
}

// strips the terminal <EOS>
inline std::vector<int> strip_eos(std::vector<int> tokens, int eos_id) {
    if (!tokens.empty() && tokens.back() == eos_id) tokens.pop_back();
    return tokens;
}

inline std::vector<int> greedy_decode(const StepScorer& scorer, int eos_id, int max_len) {
    return strip_eos(greedy_decode_hyp(scorer, eos_id, max_len).tokens, eos_id);
}

namespace detail {
// (score, shorter length, lexicographically smaller tokens)
inline bool better_hypothesis(const Hypothesis& a, const Hypothesis& b, double alpha) {
    const double sa = penalized_score(a, alpha);
    const double sb = penalized_score(b, alpha);
    if (sa != sb) return sa > sb;
    if (a.tokens.size() != b.tokens.size()) return a.tokens.size() < b.tokens.size();
    return a.tokens < b.tokens;
}
}  // namespace detail

inline Hypothesis beam_decode_hyp(const StepScorer& scorer, int eos_id, const DecodeConfig& cfg) {
    if (cfg.beam_size < 1) throw std::invalid_argument("beam_decode: beam_size must be >= 1");
    if (cfg.max_len < 1) throw std::invalid_argument("beam_decode: max_len must be >= 1");

    std::vector<Hypothesis> alive{Hypothesis{}};
    std::vector<Hypothesis> done;

    for (int step = 0; step < cfg.max_len && !alive.empty(); ++step) {
        struct Candidate {
            double logprob;
            std::size_t parent;
            int token;
        };
        std::vector<Candidate> cands;
        for (std::size_t p = 0; p < alive.size(); ++p) {
            const Eigen::VectorXd logp = scorer(alive[p].tokens);
            for (Eigen::Index v = 0; v < logp.size(); ++v) {
                cands.push_back({alive[p].logprob + logp(v), p, static_cast<int>(v)});
            }
        }
        const std::size_t keep = std::min(cands.size(), static_cast<std::size_t>(cfg.beam_size));
        std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(),
                          [](const Candidate& a, const Candidate& b) {
                              if (a.logprob != b.logprob) return a.logprob > b.logprob;
                              if (a.parent != b.parent) return a.parent < b.parent;
                              return a.token < b.token;
                          });
        std::vector<Hypothesis> next;
        for (std::size_t i = 0; i < keep; ++i) {
            Hypothesis h = alive[cands[i].parent];
            h.tokens.push_back(cands[i].token);
            h.logprob = cands[i].logprob;
            if (cands[i].token == eos_id || static_cast<int>(h.tokens.size()) == cfg.max_len) {
                h.finished = true;
                done.push_back(std::move(h));
            } else {
                next.push_back(std::move(h));
            }
        }
        alive = std::move(next);
    }
    for (auto& h : alive) {
        h.finished = true;
        done.push_back(std::move(h));
    }

    // monotone-over-greedy guarantee
    done.push_back(greedy_decode_hyp(scorer, eos_id, cfg.max_len));

    Hypothesis best = done.front();
    for (std::size_t i = 1; i < done.size(); ++i) {
        if (detail::better_hypothesis(done[i], best, cfg.length_penalty)) best = done[i];
    }
    return best;
}

inline std::vector<int> beam_decode(const StepScorer& scorer, int eos_id, const DecodeConfig& cfg) {
    return strip_eos(beam_decode_hyp(scorer, eos_id, cfg).tokens, eos_id);
}

}  // namespace mmslt
