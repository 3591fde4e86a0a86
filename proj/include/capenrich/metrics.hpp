#pragma once

#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "capenrich/corpus.hpp"

namespace capenrich {

/// Sentence BLEU: clipped n-gram precisions for 1..max_n, geometric mean,
/// brevity penalty against the closest reference length (shorter on ties).
/// Zero precisions are replaced by 1e-9.
double bleu(std::span<const std::string> candidate, std::span<const TokenSeq> refs, int max_n = 4);

/// Document frequencies for CIDEr-D. `uniform` disables IDF weighting
/// (every n-gram weighs 1), which is what the Self-CIDEr kernel uses when no
/// reference corpus is supplied.
struct CiderStats {
  std::unordered_map<std::string, double> document_frequency;
  double log_ref_len = 0.0;
  bool uniform = false;

  /// One document per image: the union of n-grams over its references.
  static CiderStats from_references(std::span<const std::vector<TokenSeq>> refs_per_image);
  static CiderStats uniform_weights();
};

/// CIDEr-D: TF-IDF n-gram vectors (n = 1..4), clipped cosine per n,
/// Gaussian length penalty (sigma 6) on bigram-count difference, averaged
/// over n and references, times 10.
double cider(std::span<const std::string> candidate, std::span<const TokenSeq> refs, const CiderStats& stats);

/// Tuples used by SPICE-lite: "obj:<head>", "attr:<head>|<mod>",
/// "rel:<subj>|<pred>|<obj>", all lemmatized.
std::set<std::string> spice_tuples(std::span<const std::string> caption);

/// F1 between the candidate's tuples and the union of the references' tuples.
double spice_lite(std::span<const std::string> candidate, std::span<const TokenSeq> refs);

/// Distinct n-grams over total n-grams across the set. Captions shorter than
/// n are skipped (counted in `skipped`); throws if every caption is skipped.
double div_n(std::span<const TokenSeq> captions, int n, int* skipped = nullptr);

/// Mean over i of bleu(c_i, {c_j : j != i}, 4). Needs at least two captions.
double mbleu4(std::span<const TokenSeq> captions);

/// Pairwise CIDEr kernel over the set (self-pairs included, symmetrized),
/// r = sqrt(lambda_max) / sum_i sqrt(max(lambda_i, 0)), score = -log(r) / log(k).
double self_cider(std::span<const TokenSeq> captions, const CiderStats& stats = CiderStats::uniform_weights());

/// The symmetrized kernel self_cider decomposes.
std::vector<std::vector<double>> self_cider_kernel(std::span<const TokenSeq> captions, const CiderStats& stats);

}  // namespace capenrich
