#include "capenrich/metrics.hpp"

#include <algorithm>
#include <array>
#include <set>
#include <cmath>
#include <map>

#include <Eigen/Eigenvalues>

#include "capenrich/databuild.hpp"
#include "capenrich/error.hpp"
#include "capenrich/sgparse.hpp"

namespace capenrich {

namespace {

constexpr int kCiderN = 4;
constexpr double kCiderSigma = 6.0;
constexpr double kBleuEps = 1e-9;

using NgramCounts = std::map<std::string, int>;

NgramCounts ngrams(std::span<const std::string> toks, int n) {
  NgramCounts out;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) {
    std::string key = toks[i];
    for (int k = 1; k < n; ++k) key += ' ' + toks[i + k];
    ++out[key];
  }
  return out;
}

struct CiderVec {
  std::array<std::map<std::string, double>, kCiderN> vec;
  std::array<double, kCiderN> norm{};
  int length = 0;
};

CiderVec cider_vec(std::span<const std::string> toks, const CiderStats& stats) {
  CiderVec v;
  for (int n = 1; n <= kCiderN; ++n) {
    for (const auto& [gram, tf] : ngrams(toks, n)) {
      double idf = 1.0;
      if (!stats.uniform) {
        auto it = stats.document_frequency.find(gram);
        double df = it == stats.document_frequency.end() ? 0.0 : it->second;
        idf = stats.log_ref_len - std::log(std::max(1.0, df));
      }
      double w = tf * idf;
      v.vec[n - 1][gram] = w;
      v.norm[n - 1] += w * w;
      if (n == 2) v.length += tf;
    }
  }
  for (auto& x : v.norm) x = std::sqrt(x);
  return v;
}

std::array<double, kCiderN> cider_sim(const CiderVec& hyp, const CiderVec& ref) {
  std::array<double, kCiderN> val{};
  const double delta = static_cast<double>(hyp.length - ref.length);
  for (int n = 0; n < kCiderN; ++n) {
    for (const auto& [gram, w] : hyp.vec[n]) {
      auto it = ref.vec[n].find(gram);
      double r = it == ref.vec[n].end() ? 0.0 : it->second;
      val[n] += std::min(w, r) * r;
    }
    if (hyp.norm[n] != 0.0 && ref.norm[n] != 0.0) val[n] /= hyp.norm[n] * ref.norm[n];
    val[n] *= std::exp(-(delta * delta) / (2.0 * kCiderSigma * kCiderSigma));
  }
  return val;
}

std::string join_lemmas(std::span<const std::string> toks) {
  std::string out;
  for (const auto& t : toks) {
    if (!out.empty()) out += ' ';
    out += lemma(t);
  }
  return out;
}

}  // namespace

double bleu(std::span<const std::string> candidate, std::span<const TokenSeq> refs, int max_n) {
  if (refs.empty()) throw ValidationError("bleu: no references");
  if (max_n < 1) throw ValidationError("bleu: max_n must be >= 1");
  const std::size_t c = candidate.size();
  if (c == 0) return 0.0;

  double log_sum = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    NgramCounts cand = ngrams(candidate, n);
    NgramCounts max_ref;
    for (const auto& r : refs)
      for (const auto& [g, k] : ngrams(r, n)) max_ref[g] = std::max(max_ref[g], k);
    int clipped = 0, total = 0;
    for (const auto& [g, k] : cand) {
      total += k;
      auto it = max_ref.find(g);
      if (it != max_ref.end()) clipped += std::min(k, it->second);
    }
    double p = clipped > 0 ? static_cast<double>(clipped) / total : kBleuEps;
    log_sum += std::log(p);
  }

  std::size_t r = refs[0].size();
  for (const auto& ref : refs) {
    auto d_new = std::llabs(static_cast<long long>(ref.size()) - static_cast<long long>(c));
    auto d_old = std::llabs(static_cast<long long>(r) - static_cast<long long>(c));
    if (d_new < d_old || (d_new == d_old && ref.size() < r)) r = ref.size();
  }
  double bp = c > r ? 1.0 : std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c));
  return bp * std::exp(log_sum / max_n);
}

CiderStats CiderStats::from_references(std::span<const std::vector<TokenSeq>> refs_per_image) {
  CiderStats s;
  for (const auto& refs : refs_per_image) {
    std::set<std::string> seen;
    for (const auto& r : refs)
      for (int n = 1; n <= kCiderN; ++n)
        for (const auto& [g, k] : ngrams(r, n)) seen.insert(g);
    for (const auto& g : seen) s.document_frequency[g] += 1.0;
  }
  s.log_ref_len = refs_per_image.empty() ? 0.0 : std::log(static_cast<double>(refs_per_image.size()));
  return s;
}

CiderStats CiderStats::uniform_weights() {
  CiderStats s;
  s.uniform = true;
  return s;
}

double cider(std::span<const std::string> candidate, std::span<const TokenSeq> refs, const CiderStats& stats) {
  if (refs.empty()) throw ValidationError("cider: no references");
  CiderVec hyp = cider_vec(candidate, stats);
  std::array<double, kCiderN> score{};
  for (const auto& r : refs) {
    auto val = cider_sim(hyp, cider_vec(r, stats));
    for (int n = 0; n < kCiderN; ++n) score[n] += val[n];
  }
  double mean = 0.0;
  for (double x : score) mean += x;
  mean /= kCiderN;
  return mean / static_cast<double>(refs.size()) * 10.0;
}

std::set<std::string> spice_tuples(std::span<const std::string> caption) {
  SceneGraph g = parse(caption);
  std::set<std::string> out;
  for (const auto& e : g.entities) {
    out.insert("obj:" + lemma(e.head));
    for (const auto& m : e.modifiers) out.insert("attr:" + lemma(e.head) + "|" + lemma(m));
  }
  for (const auto& r : g.relations)
    out.insert("rel:" + lemma(r.subject) + "|" + join_lemmas(tokenize(r.predicate)) + "|" + lemma(r.object));
  return out;
}

double spice_lite(std::span<const std::string> candidate, std::span<const TokenSeq> refs) {
  std::set<std::string> cand = spice_tuples(candidate);
  std::set<std::string> ref;
  for (const auto& r : refs) ref.merge(spice_tuples(r));
  if (cand.empty() || ref.empty()) return 0.0;
  std::size_t match = 0;
  for (const auto& t : cand) match += ref.count(t);
  if (match == 0) return 0.0;
  double p = static_cast<double>(match) / cand.size();
  double r = static_cast<double>(match) / ref.size();
  return 2.0 * p * r / (p + r);
}

double div_n(std::span<const TokenSeq> captions, int n, int* skipped) {
  if (captions.empty()) throw ValidationError("div_n: no captions");
  if (n < 1) throw ValidationError("div_n: n must be >= 1");
  std::set<std::string> distinct;
  std::size_t total = 0;
  int skip = 0;
  for (const auto& c : captions) {
    if (c.size() < static_cast<std::size_t>(n)) {
      ++skip;
      continue;
    }
    for (const auto& [g, k] : ngrams(c, n)) {
      distinct.insert(g);
      total += k;
    }
  }
  if (skipped) *skipped = skip;
  if (total == 0) throw ValidationError("div_n: every caption is shorter than n");
  return static_cast<double>(distinct.size()) / static_cast<double>(total);
}

double mbleu4(std::span<const TokenSeq> captions) {
  if (captions.size() < 2) throw ValidationError("mbleu4: needs at least two captions");
  double sum = 0.0;
  for (std::size_t i = 0; i < captions.size(); ++i) {
    std::vector<TokenSeq> others;
    for (std::size_t j = 0; j < captions.size(); ++j)
      if (j != i) others.push_back(captions[j]);
    sum += bleu(captions[i], others, 4);
  }
  return sum / static_cast<double>(captions.size());
}

std::vector<std::vector<double>> self_cider_kernel(std::span<const TokenSeq> captions, const CiderStats& stats) {
  const std::size_t k = captions.size();
  std::vector<std::vector<double>> K(k, std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) K[i][j] = cider(captions[i], captions.subspan(j, 1), stats);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j) K[i][j] = K[j][i] = 0.5 * (K[i][j] + K[j][i]);
  return K;
}

double self_cider(std::span<const TokenSeq> captions, const CiderStats& stats) {
  const std::size_t k = captions.size();
  if (k < 2) throw ValidationError("self_cider: needs at least two captions");
  auto K = self_cider_kernel(captions, stats);
  Eigen::MatrixXd M(k, k);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      if (!std::isfinite(K[i][j])) throw NumericError("self_cider: non-finite kernel entry");
      M(i, j) = K[i][j];
    }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(M, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericError("self_cider: eigendecomposition failed");
  double sum = 0.0, mx = 0.0;
  for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) {
    double s = std::sqrt(std::max(solver.eigenvalues()(i), 0.0));
    sum += s;
    mx = std::max(mx, s);
  }
  if (!(sum > 0.0)) throw NumericError("self_cider: kernel has no positive eigenvalue");
  double r = mx / sum;
  return std::clamp(-std::log(r) / std::log(static_cast<double>(k)), 0.0, 1.0);
}

}  // namespace capenrich
