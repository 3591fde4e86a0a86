#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "capenrich/tinylm.hpp"

namespace capenrich {

enum class TrainMode { full, prompt_only };

struct TrainHyper {
  double lr = 3e-4;
  int batch_size = 48;
  int epochs = 30;
  std::uint64_t seed = 0;  // batch shuffling
  int max_steps = 0;       // 0: no cap
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct EpochLog {
  int epoch = 0;
  int steps = 0;  // cumulative optimizer steps
  double mean_loss = 0.0;
  std::optional<double> val_r1;
};

struct TrainState {
  TinyLMParams params;
  std::optional<PromptTable> prompts;
};

struct TrainResult {
  TrainState best;   // highest validation R@1 (earliest epoch on ties); the final state without validation
  TrainState final;
  int best_epoch = 0;
  std::vector<EpochLog> log;
};

/// Scores a candidate state on held-out data; higher is better.
using Validator = std::function<double(const TinyLMParams&, const PromptTable*)>;

/// Adam over shuffled mini-batches. In prompt_only mode the backbone is
/// never written; in full mode the prompt table (if any) is updated too.
/// Throws NumericError naming the epoch when the loss becomes non-finite.
TrainResult train(const TinyLMParams& params, std::optional<PromptTable> prompts, std::span<const LMSample> samples,
                  TrainMode mode, const TrainHyper& hyper, const Validator& validate = {},
                  const std::function<void(const EpochLog&)>& on_epoch = {});

/// Teacher-forced argmax accuracy over detail tokens (EOS excluded).
double detail_token_accuracy(const TinyLMParams& params, const PromptTable* prompts,
                             std::span<const LMSample> samples);

}  // namespace capenrich
