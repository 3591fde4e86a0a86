#pragma once

#include <span>
#include <vector>

#include "capenrich/tinylm.hpp"

namespace capenrich {

struct Hypothesis {
  std::vector<int> tokens;  // generated detail ids, EOS excluded
  double log_prob = 0.0;    // raw sum over generated tokens, EOS included when emitted
  int length = 0;           // scored tokens: tokens.size() + (finished ? 1 : 0)
  bool finished = false;

  double normalized() const { return length == 0 ? 0.0 : log_prob / length; }
};

/// Log-probabilities of the next detail token after `prefix`. Special ids
/// other than EOS are excluded by the decoders but still take softmax mass.
Eigen::RowVectorXd next_token_log_probs(const TinyLMParams& params, const PromptTable* prompts, const Vec& visual,
                                        std::span<const int> generic, std::span<const int> prefix);

/// Length-normalized beam search. Each step expands every live hypothesis,
/// keeps the best `beam` expansions (ties broken by the step log-probability,
/// then the lower token id), and retires those ending in EOS. Unfinished hypotheses at
/// max_new are retired as they are. Returns all retired hypotheses ranked by
/// normalized score. beam == 1 is exact greedy decoding.
std::vector<Hypothesis> decode(const TinyLMParams& params, const PromptTable* prompts, const Vec& visual,
                               std::span<const int> generic, int beam = 5, int max_new = 20);

/// Argmax at each step with the same token restrictions as `decode`.
Hypothesis greedy_decode(const TinyLMParams& params, const PromptTable* prompts, const Vec& visual,
                         std::span<const int> generic, int max_new = 20);

/// True for PAD, BOS, SEP and MASK.
bool is_suppressed_token(int id);

}  // namespace capenrich
