#include "capenrich/decode.hpp"

#include <algorithm>
#include <limits>

#include "capenrich/corpus.hpp"
#include "capenrich/error.hpp"

namespace capenrich {

bool is_suppressed_token(int id) {
  return id == Vocab::kPad || id == Vocab::kBos || id == Vocab::kSep || id == Vocab::kMask;
}

Eigen::RowVectorXd next_token_log_probs(const TinyLMParams& params, const PromptTable* prompts, const Vec& visual,
                                        std::span<const int> generic, std::span<const int> prefix) {
  LMSample s{visual, std::vector<int>(generic.begin(), generic.end()), std::vector<int>(prefix.begin(), prefix.end())};
  ForwardResult fwd = forward(params, prompts, std::span<const LMSample>(&s, 1));
  const SampleCache& sc = fwd.samples[0];
  Eigen::RowVectorXd row = sc.logits.row(sc.layout.length - 1);
  double mx = row.maxCoeff();
  double lse = mx + std::log((row.array() - mx).exp().sum());
  return row.array() - lse;
}

Hypothesis greedy_decode(const TinyLMParams& params, const PromptTable* prompts, const Vec& visual,
                         std::span<const int> generic, int max_new) {
  if (max_new < 1) throw ValidationError("decode: max_new must be >= 1");
  Hypothesis h;
  for (int step = 0; step < max_new; ++step) {
    Eigen::RowVectorXd lp = next_token_log_probs(params, prompts, visual, generic, h.tokens);
    int best = -1;
    for (int id = 0; id < lp.size(); ++id) {
      if (is_suppressed_token(id)) continue;
      if (best < 0 || lp(id) > lp(best)) best = id;
    }
    h.log_prob += lp(best);
    ++h.length;
    if (best == Vocab::kEos) {
      h.finished = true;
      return h;
    }
    h.tokens.push_back(best);
  }
  return h;
}

std::vector<Hypothesis> decode(const TinyLMParams& params, const PromptTable* prompts, const Vec& visual,
                               std::span<const int> generic, int beam, int max_new) {
  if (beam < 1) throw ValidationError("decode: beam must be >= 1");
  if (max_new < 1) throw ValidationError("decode: max_new must be >= 1");

  struct Expansion {
    std::size_t parent;
    int token;
    double log_prob;
    double step_log_prob;
    double score;
  };

  std::vector<Hypothesis> live(1);
  std::vector<Hypothesis> done;
  for (int step = 0; step < max_new && !live.empty(); ++step) {
    std::vector<Expansion> cand;
    for (std::size_t p = 0; p < live.size(); ++p) {
      Eigen::RowVectorXd lp = next_token_log_probs(params, prompts, visual, generic, live[p].tokens);
      for (int id = 0; id < lp.size(); ++id) {
        if (is_suppressed_token(id)) continue;
        double total = live[p].log_prob + lp(id);
        cand.push_back({p, id, total, lp(id), total / (live[p].length + 1)});
      }
    }
    std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(beam), cand.size());
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(keep), cand.end(),
                      [](const Expansion& a, const Expansion& b) {
                        if (a.score != b.score) return a.score > b.score;
                        if (a.step_log_prob != b.step_log_prob) return a.step_log_prob > b.step_log_prob;
                        if (a.token != b.token) return a.token < b.token;
                        return a.parent < b.parent;
                      });
    std::vector<Hypothesis> next;
    for (std::size_t i = 0; i < keep; ++i) {
      const Expansion& e = cand[i];
      Hypothesis h = live[e.parent];
      h.log_prob = e.log_prob;
      h.length += 1;
      if (e.token == Vocab::kEos) {
        h.finished = true;
        done.push_back(std::move(h));
      } else {
        h.tokens.push_back(e.token);
        next.push_back(std::move(h));
      }
    }
    live = std::move(next);
  }
  for (auto& h : live) done.push_back(std::move(h));
  std::stable_sort(done.begin(), done.end(),
                   [](const Hypothesis& a, const Hypothesis& b) { return a.normalized() > b.normalized(); });
  return done;
}

}  // namespace capenrich
