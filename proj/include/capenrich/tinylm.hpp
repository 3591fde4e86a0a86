#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace capenrich {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

struct TinyLMConfig {
  int d_model = 64;
  int n_heads = 4;
  int n_layers = 2;
  int d_ffn = 128;
  int max_seq = 64;
  int n_visual = 4;
  int embed_dim = 64;  // width of the image embedding fed to the visual prefix
  int vocab_size = 0;
  std::uint64_t seed = 0;

  /// Throws ValidationError on inconsistent sizes.
  void validate() const;
  bool operator==(const TinyLMConfig&) const = default;
};

struct LayerParams {
  Mat ln1_g, ln1_b;
  Mat wq, bq, wk, bk, wv, bv, wo, bo;
  Mat ln2_g, ln2_b;
  Mat w1, b1, w2, b2;
};

/// Decoder weights. Row vectors (biases, layer-norm parameters) are 1 x n.
///
/// The visual projection maps one image embedding to all prefix slots at
/// once: [embed_dim x (n_visual * d_model)], row-split into n_visual slots.
struct TinyLMParams {
  TinyLMConfig config;
  Mat tok_emb;   // vocab_size x d_model
  Mat pos_emb;   // max_seq x d_model
  Mat vis_proj;  // embed_dim x (n_visual * d_model)
  Mat vis_bias;  // 1 x (n_visual * d_model)
  std::vector<LayerParams> layers;
  Mat lnf_g, lnf_b;
  Mat out_proj;  // d_model x vocab_size

  /// Calls f(name, tensor) for every tensor in serialization order.
  template <class F>
  void for_each(F&& f) {
    visit(*this, f);
  }
  template <class F>
  void for_each(F&& f) const {
    visit(*this, f);
  }

  /// Same shapes, all zeros.
  TinyLMParams zeros_like() const;
  std::size_t parameter_count() const;

 private:
  template <class Self, class F>
  static void visit(Self& self, F& f) {
    f("tok_emb", self.tok_emb);
    f("pos_emb", self.pos_emb);
    f("vis_proj", self.vis_proj);
    f("vis_bias", self.vis_bias);
    for (std::size_t i = 0; i < self.layers.size(); ++i) {
      auto& l = self.layers[i];
      const std::string p = "layers." + std::to_string(i) + ".";
      f(p + "ln1_g", l.ln1_g);
      f(p + "ln1_b", l.ln1_b);
      f(p + "wq", l.wq);
      f(p + "bq", l.bq);
      f(p + "wk", l.wk);
      f(p + "bk", l.bk);
      f(p + "wv", l.wv);
      f(p + "bv", l.bv);
      f(p + "wo", l.wo);
      f(p + "bo", l.bo);
      f(p + "ln2_g", l.ln2_g);
      f(p + "ln2_b", l.ln2_b);
      f(p + "w1", l.w1);
      f(p + "b1", l.b1);
      f(p + "w2", l.w2);
      f(p + "b2", l.b2);
    }
    f("lnf_g", self.lnf_g);
    f("lnf_b", self.lnf_b);
    f("out_proj", self.out_proj);
  }
};

/// Learnable continuous prompt vectors appended after the generic caption.
struct PromptTable {
  std::string name;
  Mat vectors;  // L x d_model

  int length() const { return static_cast<int>(vectors.rows()); }
};

enum class PromptInit { random, word };

/// Seeded Gaussian init (std 0.02), zero biases, unit layer-norm scales.
TinyLMParams init_params(const TinyLMConfig& config);

/// Random (std 0.02, seeded) or copies of the token embedding rows in `word_ids`.
PromptTable init_prompts(const TinyLMParams& params, int length, PromptInit mode,
                         std::span<const int> word_ids = {}, std::uint64_t seed = 0,
                         std::string name = "lp-0");

/// One decoder input. `detail` holds the detail token ids without EOS; the
/// model is scored on predicting every detail token and a final EOS.
struct LMSample {
  Vec visual;
  std::vector<int> generic;
  std::vector<int> detail;
};

using TrainBatch = std::vector<LMSample>;

/// Positions in the packed sequence
///   [visual prefix] [BOS] generic [SEP] prompts detail
struct SequenceLayout {
  int n_visual = 0;
  int bos = 0;
  int generic_begin = 0;
  int sep = 0;
  int prompt_begin = 0;
  int prompt_len = 0;
  int detail_begin = 0;
  int detail_len = 0;
  int length = 0;

  /// Position whose output predicts the first detail token.
  int context_end() const { return detail_begin - 1; }
};

/// Throws ValidationError if the packed sequence exceeds max_seq.
SequenceLayout make_layout(const TinyLMConfig& config, int generic_len, int prompt_len, int detail_len);

/// Positions that are scored and the token each must predict.
struct ScoredTargets {
  std::vector<int> positions;
  std::vector<int> targets;
};

/// Scores detail tokens and the final EOS only: the context end predicts d1,
/// each d_t predicts d_{t+1}, and d_M predicts EOS.
ScoredTargets scored_targets(const SequenceLayout& layout, const LMSample& sample);

/// Per-position target mask: true where the token at that position is a
/// detail token whose prediction is scored.
std::vector<bool> detail_target_mask(const SequenceLayout& layout);

/// Whether position i may attend to position j.
bool attention_visible(const SequenceLayout& layout, int i, int j);

struct LayerCache {
  Mat x_in, xhat1, h1, q, k, v, attn_cat, x_mid, xhat2, h2, z, r;
  Vec rstd1, rstd2;
  std::vector<Mat> probs;  // per head, length x length
};

struct SampleCache {
  SequenceLayout layout;
  Mat x0;
  std::vector<LayerCache> layers;
  Mat x_final, xhat_f, h_f;
  Vec rstd_f;
  Mat logits;  // length x vocab_size
};

struct ForwardResult {
  std::vector<SampleCache> samples;

  const Mat& logits(std::size_t i) const { return samples[i].logits; }
};

/// Runs the decoder over every sample. Over-length samples raise
/// ValidationError naming the sample index.
ForwardResult forward(const TinyLMParams& params, const PromptTable* prompts, std::span<const LMSample> batch);

/// Mean cross-entropy over every scored position of every sample.
double masked_cross_entropy(std::span<const Mat> logits, std::span<const ScoredTargets> targets);

double loss(const ForwardResult& fwd, std::span<const LMSample> batch);

struct Gradients {
  TinyLMParams params;
  Mat prompts;  // empty when no prompt table was used
  double loss = 0.0;
};

/// Exact reverse-mode gradients of `loss` using the activations in `fwd`.
Gradients backward(const TinyLMParams& params, const PromptTable* prompts, std::span<const LMSample> batch,
                   const ForwardResult& fwd);

Gradients loss_and_gradients(const TinyLMParams& params, const PromptTable* prompts,
                             std::span<const LMSample> batch);

}  // namespace capenrich
