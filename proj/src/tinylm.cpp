#include "capenrich/tinylm.hpp"

#include <cmath>
#include <limits>

#include "capenrich/corpus.hpp"
#include "capenrich/error.hpp"
#include "capenrich/random.hpp"

namespace capenrich {

namespace {

constexpr double kInitStd = 0.02;
constexpr double kLayerNormEps = 1e-5;

Mat gaussian(Rng& rng, int rows, int cols, double stddev) {
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = stddev * rng.normal();
  return m;
}

void layer_norm(const Mat& x, const Mat& g, const Mat& b, Mat& xhat, Vec& rstd, Mat& y) {
  const Eigen::Index n = x.rows();
  const double d = static_cast<double>(x.cols());
  xhat.resize(x.rows(), x.cols());
  rstd.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double mu = x.row(i).sum() / d;
    double var = (x.row(i).array() - mu).square().sum() / d;
    rstd(i) = 1.0 / std::sqrt(var + kLayerNormEps);
    xhat.row(i) = (x.row(i).array() - mu) * rstd(i);
  }
  y = (xhat.array().rowwise() * g.row(0).array()).rowwise() + b.row(0).array();
}

// Accumulates dg/db and returns dx.
Mat layer_norm_backward(const Mat& dy, const Mat& xhat, const Vec& rstd, const Mat& g, Mat& dg, Mat& db) {
  dg.row(0) += (dy.array() * xhat.array()).colwise().sum().matrix();
  db.row(0) += dy.colwise().sum();
  Mat dxhat = dy.array().rowwise() * g.row(0).array();
  const double d = static_cast<double>(dy.cols());
  Mat dx(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    double mean_dxhat = dxhat.row(i).sum() / d;
    double mean_dxhat_xhat = (dxhat.row(i).array() * xhat.row(i).array()).sum() / d;
    dx.row(i) = rstd(i) * (dxhat.row(i).array() - mean_dxhat - xhat.row(i).array() * mean_dxhat_xhat);
  }
  return dx;
}

Mat add_bias(const Mat& x, const Mat& bias) { return x.rowwise() + bias.row(0); }

Mat input_embedding(const TinyLMParams& p, const PromptTable* prompts, const LMSample& s,
                    const SequenceLayout& lay) {
  const auto& c = p.config;
  Mat x0(lay.length, c.d_model);
  Mat vis = s.visual.transpose() * p.vis_proj + p.vis_bias;
  for (int k = 0; k < c.n_visual; ++k) x0.row(k) = vis.block(0, k * c.d_model, 1, c.d_model);
  x0.row(lay.bos) = p.tok_emb.row(Vocab::kBos);
  for (std::size_t t = 0; t < s.generic.size(); ++t) x0.row(lay.generic_begin + t) = p.tok_emb.row(s.generic[t]);
  x0.row(lay.sep) = p.tok_emb.row(Vocab::kSep);
  for (int l = 0; l < lay.prompt_len; ++l) x0.row(lay.prompt_begin + l) = prompts->vectors.row(l);
  for (std::size_t t = 0; t < s.detail.size(); ++t) x0.row(lay.detail_begin + t) = p.tok_emb.row(s.detail[t]);
  x0 += p.pos_emb.topRows(lay.length);
  return x0;
}

void check_sample(const TinyLMParams& p, const PromptTable* prompts, const LMSample& s, std::size_t index) {
  const auto& c = p.config;
  if (s.visual.size() != c.embed_dim)
    throw ValidationError("sample " + std::to_string(index) + ": visual embedding has dim " +
                          std::to_string(s.visual.size()) + ", expected " + std::to_string(c.embed_dim));
  auto check_ids = [&](const std::vector<int>& ids) {
    for (int id : ids)
      if (id < 0 || id >= c.vocab_size)
        throw ValidationError("sample " + std::to_string(index) + ": token id " + std::to_string(id) +
                              " out of range");
  };
  check_ids(s.generic);
  check_ids(s.detail);
  if (prompts && prompts->vectors.cols() != c.d_model)
    throw ValidationError("prompt table '" + prompts->name + "' width does not match d_model");
}

}  // namespace

void TinyLMConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ValidationError("TinyLMConfig: " + msg); };
  if (d_model < 1 || n_heads < 1 || n_layers < 0 || d_ffn < 1 || n_visual < 1 || embed_dim < 1)
    fail("sizes must be positive");
  if (d_model % n_heads != 0)
    fail("d_model (" + std::to_string(d_model) + ") not divisible by n_heads (" + std::to_string(n_heads) + ")");
  if (max_seq < n_visual + 2) fail("max_seq must be >= n_visual + 2");
  if (vocab_size <= Vocab::kNumSpecials) fail("vocab_size must exceed the special tokens");
}

TinyLMParams TinyLMParams::zeros_like() const {
  TinyLMParams z = *this;
  z.for_each([](const std::string&, Mat& m) { m.setZero(); });
  return z;
}

std::size_t TinyLMParams::parameter_count() const {
  std::size_t n = 0;
  for_each([&](const std::string&, const Mat& m) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

TinyLMParams init_params(const TinyLMConfig& config) {
  config.validate();
  Rng rng(config.seed);
  const int d = config.d_model;
  TinyLMParams p;
  p.config = config;
  p.tok_emb = gaussian(rng, config.vocab_size, d, kInitStd);
  p.pos_emb = gaussian(rng, config.max_seq, d, kInitStd);
  p.vis_proj = gaussian(rng, config.embed_dim, config.n_visual * d, kInitStd);
  p.vis_bias = Mat::Zero(1, config.n_visual * d);
  for (int i = 0; i < config.n_layers; ++i) {
    LayerParams l;
    l.ln1_g = Mat::Ones(1, d);
    l.ln1_b = Mat::Zero(1, d);
    l.wq = gaussian(rng, d, d, kInitStd);
    l.bq = Mat::Zero(1, d);
    l.wk = gaussian(rng, d, d, kInitStd);
    l.bk = Mat::Zero(1, d);
    l.wv = gaussian(rng, d, d, kInitStd);
    l.bv = Mat::Zero(1, d);
    l.wo = gaussian(rng, d, d, kInitStd);
    l.bo = Mat::Zero(1, d);
    l.ln2_g = Mat::Ones(1, d);
    l.ln2_b = Mat::Zero(1, d);
    l.w1 = gaussian(rng, d, config.d_ffn, kInitStd);
    l.b1 = Mat::Zero(1, config.d_ffn);
    l.w2 = gaussian(rng, config.d_ffn, d, kInitStd);
    l.b2 = Mat::Zero(1, d);
    p.layers.push_back(std::move(l));
  }
  p.lnf_g = Mat::Ones(1, d);
  p.lnf_b = Mat::Zero(1, d);
  p.out_proj = gaussian(rng, d, config.vocab_size, kInitStd);
  return p;
}

PromptTable init_prompts(const TinyLMParams& params, int length, PromptInit mode, std::span<const int> word_ids,
                         std::uint64_t seed, std::string name) {
  if (length < 1) throw ValidationError("init_prompts: length must be >= 1");
  PromptTable t;
  t.name = std::move(name);
  const int d = params.config.d_model;
  if (mode == PromptInit::random) {
    Rng rng(seed);
    t.vectors = gaussian(rng, length, d, kInitStd);
    return t;
  }
  if (static_cast<int>(word_ids.size()) != length)
    throw ValidationError("init_prompts: word init needs exactly " + std::to_string(length) + " words");
  t.vectors.resize(length, d);
  for (int i = 0; i < length; ++i) {
    int id = word_ids[i];
    if (id < Vocab::kNumSpecials || id >= params.config.vocab_size)
      throw ValidationError("init_prompts: word id " + std::to_string(id) + " is not a vocabulary word");
    t.vectors.row(i) = params.tok_emb.row(id);
  }
  return t;
}

SequenceLayout make_layout(const TinyLMConfig& config, int generic_len, int prompt_len, int detail_len) {
  SequenceLayout l;
  l.n_visual = config.n_visual;
  l.bos = config.n_visual;
  l.generic_begin = l.bos + 1;
  l.sep = l.generic_begin + generic_len;
  l.prompt_begin = l.sep + 1;
  l.prompt_len = prompt_len;
  l.detail_begin = l.prompt_begin + prompt_len;
  l.detail_len = detail_len;
  l.length = l.detail_begin + detail_len;
  if (l.length > config.max_seq)
    throw ValidationError("sequence length " + std::to_string(l.length) + " exceeds max_seq " +
                          std::to_string(config.max_seq));
  return l;
}

ScoredTargets scored_targets(const SequenceLayout& layout, const LMSample& sample) {
  ScoredTargets st;
  st.positions.push_back(layout.context_end());
  for (int t = 0; t < layout.detail_len; ++t) {
    st.targets.push_back(sample.detail[t]);
    st.positions.push_back(layout.detail_begin + t);
  }
  st.targets.push_back(Vocab::kEos);
  return st;
}

std::vector<bool> detail_target_mask(const SequenceLayout& layout) {
  std::vector<bool> mask(layout.length, false);
  for (int t = 0; t < layout.detail_len; ++t) mask[layout.detail_begin + t] = true;
  return mask;
}

bool attention_visible(const SequenceLayout& layout, int i, int j) {
  if (j < layout.n_visual) return true;
  if (i < layout.n_visual) return false;
  return j <= i;
}

ForwardResult forward(const TinyLMParams& p, const PromptTable* prompts, std::span<const LMSample> batch) {
  const auto& c = p.config;
  const int hd = c.d_model / c.n_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  const int prompt_len = prompts ? prompts->length() : 0;

  ForwardResult out;
  out.samples.reserve(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const LMSample& s = batch[b];
    check_sample(p, prompts, s, b);
    SampleCache sc;
    try {
      sc.layout = make_layout(c, static_cast<int>(s.generic.size()), prompt_len, static_cast<int>(s.detail.size()));
    } catch (const ValidationError& e) {
      throw ValidationError("sample " + std::to_string(b) + ": " + e.what());
    }
    const SequenceLayout& lay = sc.layout;
    const int T = lay.length;
    sc.x0 = input_embedding(p, prompts, s, lay);

    Mat x = sc.x0;
    sc.layers.resize(c.n_layers);
    for (int li = 0; li < c.n_layers; ++li) {
      const LayerParams& L = p.layers[li];
      LayerCache& lc = sc.layers[li];
      lc.x_in = x;
      layer_norm(x, L.ln1_g, L.ln1_b, lc.xhat1, lc.rstd1, lc.h1);
      lc.q = add_bias(lc.h1 * L.wq, L.bq);
      lc.k = add_bias(lc.h1 * L.wk, L.bk);
      lc.v = add_bias(lc.h1 * L.wv, L.bv);
      lc.attn_cat.resize(T, c.d_model);
      lc.probs.resize(c.n_heads);
      for (int h = 0; h < c.n_heads; ++h) {
        Mat scores = lc.q.middleCols(h * hd, hd) * lc.k.middleCols(h * hd, hd).transpose() * scale;
        Mat& P = lc.probs[h];
        P.setZero(T, T);
        for (int i = 0; i < T; ++i) {
          double mx = -std::numeric_limits<double>::infinity();
          for (int j = 0; j < T; ++j)
            if (attention_visible(lay, i, j)) mx = std::max(mx, scores(i, j));
          double sum = 0.0;
          for (int j = 0; j < T; ++j) {
            if (!attention_visible(lay, i, j)) continue;
            P(i, j) = std::exp(scores(i, j) - mx);
            sum += P(i, j);
          }
          P.row(i) /= sum;
        }
        lc.attn_cat.middleCols(h * hd, hd) = P * lc.v.middleCols(h * hd, hd);
      }
      lc.x_mid = x + add_bias(lc.attn_cat * L.wo, L.bo);
      layer_norm(lc.x_mid, L.ln2_g, L.ln2_b, lc.xhat2, lc.rstd2, lc.h2);
      lc.z = add_bias(lc.h2 * L.w1, L.b1);
      lc.r = lc.z.cwiseMax(0.0);
      x = lc.x_mid + add_bias(lc.r * L.w2, L.b2);
    }
    sc.x_final = x;
    layer_norm(x, p.lnf_g, p.lnf_b, sc.xhat_f, sc.rstd_f, sc.h_f);
    sc.logits = sc.h_f * p.out_proj;
    out.samples.push_back(std::move(sc));
  }
  return out;
}

double masked_cross_entropy(std::span<const Mat> logits, std::span<const ScoredTargets> targets) {
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t b = 0; b < logits.size(); ++b) {
    const auto& st = targets[b];
    for (std::size_t k = 0; k < st.positions.size(); ++k) {
      auto row = logits[b].row(st.positions[k]);
      double mx = row.maxCoeff();
      double lse = mx + std::log((row.array() - mx).exp().sum());
      total += lse - row(st.targets[k]);
      ++count;
    }
  }
  if (count == 0) throw ValidationError("loss: no scored positions in batch");
  return total / static_cast<double>(count);
}

double loss(const ForwardResult& fwd, std::span<const LMSample> batch) {
  std::vector<Mat> logits;
  std::vector<ScoredTargets> targets;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    logits.push_back(fwd.samples[b].logits);
    targets.push_back(scored_targets(fwd.samples[b].layout, batch[b]));
  }
  return masked_cross_entropy(logits, targets);
}

Gradients backward(const TinyLMParams& p, const PromptTable* prompts, std::span<const LMSample> batch,
                   const ForwardResult& fwd) {
  const auto& c = p.config;
  const int hd = c.d_model / c.n_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

  Gradients g;
  g.params = p.zeros_like();
  if (prompts) g.prompts = Mat::Zero(prompts->length(), c.d_model);

  std::size_t count = 0;
  std::vector<ScoredTargets> all_targets;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    all_targets.push_back(scored_targets(fwd.samples[b].layout, batch[b]));
    count += all_targets.back().positions.size();
  }
  if (count == 0) throw ValidationError("backward: no scored positions in batch");
  const double inv_n = 1.0 / static_cast<double>(count);

  double total_loss = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const SampleCache& sc = fwd.samples[b];
    const SequenceLayout& lay = sc.layout;
    const ScoredTargets& st = all_targets[b];
    const int T = lay.length;

    Mat dlogits = Mat::Zero(T, c.vocab_size);
    for (std::size_t k = 0; k < st.positions.size(); ++k) {
      const int pos = st.positions[k];
      auto row = sc.logits.row(pos);
      double mx = row.maxCoeff();
      Eigen::RowVectorXd e = (row.array() - mx).exp();
      double sum = e.sum();
      total_loss += mx + std::log(sum) - row(st.targets[k]);
      dlogits.row(pos) += e / sum * inv_n;
      dlogits(pos, st.targets[k]) -= inv_n;
    }

    g.params.out_proj += sc.h_f.transpose() * dlogits;
    Mat dh = dlogits * p.out_proj.transpose();
    Mat dx = layer_norm_backward(dh, sc.xhat_f, sc.rstd_f, p.lnf_g, g.params.lnf_g, g.params.lnf_b);

    for (int li = c.n_layers - 1; li >= 0; --li) {
      const LayerParams& L = p.layers[li];
      LayerParams& G = g.params.layers[li];
      const LayerCache& lc = sc.layers[li];

      // Feed-forward block.
      G.w2 += lc.r.transpose() * dx;
      G.b2.row(0) += dx.colwise().sum();
      Mat dr = dx * L.w2.transpose();
      Mat dz = (lc.z.array() > 0.0).select(dr.array(), 0.0).matrix();
      G.w1 += lc.h2.transpose() * dz;
      G.b1.row(0) += dz.colwise().sum();
      Mat dh2 = dz * L.w1.transpose();
      Mat dx_mid = dx + layer_norm_backward(dh2, lc.xhat2, lc.rstd2, L.ln2_g, G.ln2_g, G.ln2_b);

      // Attention block.
      G.wo += lc.attn_cat.transpose() * dx_mid;
      G.bo.row(0) += dx_mid.colwise().sum();
      Mat dcat = dx_mid * L.wo.transpose();
      Mat dq(T, c.d_model), dk(T, c.d_model), dv(T, c.d_model);
      for (int h = 0; h < c.n_heads; ++h) {
        const Mat& P = lc.probs[h];
        Mat dout = dcat.middleCols(h * hd, hd);
        Mat dP = dout * lc.v.middleCols(h * hd, hd).transpose();
        dv.middleCols(h * hd, hd) = P.transpose() * dout;
        Mat dS(T, T);
        for (int i = 0; i < T; ++i) {
          double dot = (dP.row(i).array() * P.row(i).array()).sum();
          dS.row(i) = P.row(i).array() * (dP.row(i).array() - dot);
        }
        dS *= scale;
        dq.middleCols(h * hd, hd) = dS * lc.k.middleCols(h * hd, hd);
        dk.middleCols(h * hd, hd) = dS.transpose() * lc.q.middleCols(h * hd, hd);
      }
      G.wq += lc.h1.transpose() * dq;
      G.bq.row(0) += dq.colwise().sum();
      G.wk += lc.h1.transpose() * dk;
      G.bk.row(0) += dk.colwise().sum();
      G.wv += lc.h1.transpose() * dv;
      G.bv.row(0) += dv.colwise().sum();
      Mat dh1 = dq * L.wq.transpose() + dk * L.wk.transpose() + dv * L.wv.transpose();
      dx = dx_mid + layer_norm_backward(dh1, lc.xhat1, lc.rstd1, L.ln1_g, G.ln1_g, G.ln1_b);
    }

    // Input embedding.
    const LMSample& s = batch[b];
    g.params.pos_emb.topRows(T) += dx;
    Mat dvis(1, c.n_visual * c.d_model);
    for (int k = 0; k < c.n_visual; ++k) dvis.block(0, k * c.d_model, 1, c.d_model) = dx.row(k);
    g.params.vis_proj += s.visual * dvis;
    g.params.vis_bias += dvis;
    g.params.tok_emb.row(Vocab::kBos) += dx.row(lay.bos);
    for (std::size_t t = 0; t < s.generic.size(); ++t)
      g.params.tok_emb.row(s.generic[t]) += dx.row(lay.generic_begin + t);
    g.params.tok_emb.row(Vocab::kSep) += dx.row(lay.sep);
    for (int l = 0; l < lay.prompt_len; ++l) g.prompts.row(l) += dx.row(lay.prompt_begin + l);
    for (std::size_t t = 0; t < s.detail.size(); ++t)
      g.params.tok_emb.row(s.detail[t]) += dx.row(lay.detail_begin + t);
  }
  g.loss = total_loss * inv_n;
  return g;
}

Gradients loss_and_gradients(const TinyLMParams& params, const PromptTable* prompts,
                             std::span<const LMSample> batch) {
  ForwardResult fwd = forward(params, prompts, batch);
  return backward(params, prompts, batch, fwd);
}

}  // namespace capenrich
