#include "capenrich/train.hpp"

#include <cmath>
#include <numeric>

#include "capenrich/error.hpp"
#include "capenrich/random.hpp"

namespace capenrich {

namespace {

struct AdamSlot {
  Mat m, v;
};

class Adam {
 public:
  explicit Adam(const TrainHyper& h) : h_(h) {}

  void step(Mat& param, const Mat& grad, AdamSlot& slot) const {
    if (slot.m.size() == 0) {
      slot.m = Mat::Zero(param.rows(), param.cols());
      slot.v = Mat::Zero(param.rows(), param.cols());
    }
    slot.m = h_.beta1 * slot.m + (1.0 - h_.beta1) * grad;
    slot.v = h_.beta2 * slot.v + (1.0 - h_.beta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(h_.beta1, t_);
    const double c2 = 1.0 - std::pow(h_.beta2, t_);
    param.array() -= h_.lr * (slot.m.array() / c1) / ((slot.v.array() / c2).sqrt() + h_.eps);
  }

  void tick() { ++t_; }

 private:
  TrainHyper h_;
  int t_ = 0;
};

}  // namespace

TrainResult train(const TinyLMParams& params, std::optional<PromptTable> prompts, std::span<const LMSample> samples,
                  TrainMode mode, const TrainHyper& hyper, const Validator& validate,
                  const std::function<void(const EpochLog&)>& on_epoch) {
  if (samples.empty()) throw ValidationError("train: no samples");
  if (mode == TrainMode::prompt_only && !prompts) throw ValidationError("train: prompt_only mode needs a prompt table");
  if (hyper.batch_size < 1) throw ValidationError("train: batch_size must be >= 1");
  if (hyper.epochs < 0) throw ValidationError("train: epochs must be >= 0");
  if (!(hyper.lr > 0.0)) throw ValidationError("train: lr must be > 0");

  TrainResult result;
  TrainState state{params, std::move(prompts)};
  result.best = state;
  if (hyper.epochs == 0) {
    result.final = state;
    return result;
  }

  Adam adam(hyper);
  std::vector<AdamSlot> param_slots;
  state.params.for_each([&](const std::string&, const Mat&) { param_slots.emplace_back(); });
  AdamSlot prompt_slot;

  Rng rng(hyper.seed);
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::optional<double> best_val;
  int steps = 0;
  bool done = false;

  for (int epoch = 1; epoch <= hyper.epochs && !done; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(hyper.batch_size)) {
      std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(hyper.batch_size));
      TrainBatch batch;
      for (std::size_t i = start; i < stop; ++i) batch.push_back(samples[order[i]]);
      const PromptTable* pt = state.prompts ? &*state.prompts : nullptr;
      Gradients g = loss_and_gradients(state.params, pt, batch);
      if (!std::isfinite(g.loss)) throw NumericError("train: non-finite loss in epoch " + std::to_string(epoch));

      adam.tick();
      if (mode == TrainMode::full) {
        std::vector<Mat*> grads;
        g.params.for_each([&](const std::string&, Mat& m) { grads.push_back(&m); });
        std::size_t k = 0;
        state.params.for_each([&](const std::string&, Mat& m) {
          adam.step(m, *grads[k], param_slots[k]);
          ++k;
        });
      }
      if (state.prompts) adam.step(state.prompts->vectors, g.prompts, prompt_slot);

      loss_sum += g.loss;
      ++batches;
      ++steps;
      if (hyper.max_steps > 0 && steps >= hyper.max_steps) {
        done = true;
        break;
      }
    }

    EpochLog log{epoch, steps, loss_sum / batches, std::nullopt};
    if (validate) {
      log.val_r1 = validate(state.params, state.prompts ? &*state.prompts : nullptr);
      if (!best_val || *log.val_r1 > *best_val) {
        best_val = log.val_r1;
        result.best = state;
        result.best_epoch = epoch;
      }
    }
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);
  }

  result.final = std::move(state);
  if (!validate) {
    result.best = result.final;
    result.best_epoch = static_cast<int>(result.log.size());
  }
  return result;
}

double detail_token_accuracy(const TinyLMParams& params, const PromptTable* prompts,
                             std::span<const LMSample> samples) {
  ForwardResult fwd = forward(params, prompts, samples);
  std::size_t hits = 0, total = 0;
  for (std::size_t b = 0; b < samples.size(); ++b) {
    ScoredTargets st = scored_targets(fwd.samples[b].layout, samples[b]);
    for (std::size_t k = 0; k + 1 < st.positions.size(); ++k) {
      Eigen::Index arg;
      fwd.samples[b].logits.row(st.positions[k]).maxCoeff(&arg);
      hits += static_cast<int>(arg) == st.targets[k];
      ++total;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace capenrich
