#pragma once

#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "capenrich/corpus.hpp"
#include "capenrich/embed.hpp"

namespace capenrich {

enum class PoolKind { naive, hard };

std::string_view to_string(PoolKind kind);

/// Candidate images for self-retrieval.
class RetrievalPool {
 public:
  RetrievalPool() = default;
  explicit RetrievalPool(PoolKind kind) : kind_(kind) {}

  PoolKind kind() const { return kind_; }
  std::size_t size() const { return ids_.size(); }
  const std::vector<std::string>& ids() const { return ids_; }
  const Eigen::VectorXd& vector(std::size_t i) const { return vectors_[i]; }
  bool contains(std::string_view id) const { return index_.count(std::string(id)) > 0; }

  /// Throws ValidationError on a duplicate id.
  void add(const std::string& id, const Eigen::VectorXd& unit_vector);

  /// The pool as an embedding table (pool order preserved).
  EmbeddingTable to_table() const;
  static RetrievalPool from_table(const EmbeddingTable& table, PoolKind kind);

 private:
  PoolKind kind_ = PoolKind::naive;
  std::vector<std::string> ids_;
  std::vector<Eigen::VectorXd> vectors_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Exactly the test images. Missing embeddings raise one error listing every missing id.
RetrievalPool build_naive_pool(std::span<const CaptionSet> test, const EmbeddingTable& embeddings);

/// For each target: the top_k reservoir images by image-image cosine and the
/// top_k by cosine to each of its caption text vectors. The pool is the
/// targets (given order) followed by the retrieved reservoir ids, sorted.
RetrievalPool build_hard_pool(std::span<const CaptionSet> targets, const EmbeddingTable& target_embeddings,
                              const EmbeddingTable& reservoir, const TextEmbedder& embed, int top_k);

/// 1-based rank of `target_id` when the pool is sorted by cosine to `query`
/// (descending, ties by id). Throws ValidationError if the target is not in the pool.
std::size_t retrieval_rank(const Eigen::VectorXd& query, std::string_view target_id, const RetrievalPool& pool);

std::vector<bool> recall_at_k(const Eigen::VectorXd& query, std::string_view target_id, const RetrievalPool& pool,
                              std::span<const int> ks);

}  // namespace capenrich
