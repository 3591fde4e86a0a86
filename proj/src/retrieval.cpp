#include "capenrich/retrieval.hpp"

#include <algorithm>
#include <set>

#include "capenrich/error.hpp"

namespace capenrich {

namespace {

// Reservoir ids ranked by cosine to `query`, best first, ties by id.
std::vector<std::string> top_k(const Eigen::VectorXd& query, const EmbeddingTable& reservoir, int k) {
  std::vector<std::pair<double, const std::string*>> scored;
  scored.reserve(reservoir.size());
  for (const auto& id : reservoir.ids()) scored.emplace_back(sim(query, reservoir.at(id)), &id);
  std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(k), scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end(),
                    [](const auto& a, const auto& b) {
                      if (a.first != b.first) return a.first > b.first;
                      return *a.second < *b.second;
                    });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < keep; ++i) out.push_back(*scored[i].second);
  return out;
}

}  // namespace

std::string_view to_string(PoolKind kind) { return kind == PoolKind::naive ? "naive" : "hard"; }

void RetrievalPool::add(const std::string& id, const Eigen::VectorXd& unit_vector) {
  if (!index_.emplace(id, ids_.size()).second) throw ValidationError("retrieval pool: duplicate id '" + id + "'");
  ids_.push_back(id);
  vectors_.push_back(unit_vector);
}

EmbeddingTable RetrievalPool::to_table() const {
  EmbeddingTable t(vectors_.empty() ? 0 : static_cast<int>(vectors_[0].size()));
  for (std::size_t i = 0; i < ids_.size(); ++i) t.insert(ids_[i], vectors_[i]);
  return t;
}

RetrievalPool RetrievalPool::from_table(const EmbeddingTable& table, PoolKind kind) {
  RetrievalPool p(kind);
  for (const auto& id : table.ids()) p.add(id, table.at(id));
  return p;
}

RetrievalPool build_naive_pool(std::span<const CaptionSet> test, const EmbeddingTable& embeddings) {
  std::vector<std::string> missing;
  for (const auto& s : test)
    if (!embeddings.contains(s.image_id)) missing.push_back(s.image_id);
  if (!missing.empty()) {
    std::string msg = "naive pool: missing embeddings for";
    for (const auto& id : missing) msg += " " + id;
    throw ValidationError(msg);
  }
  RetrievalPool pool(PoolKind::naive);
  for (const auto& s : test) pool.add(s.image_id, embeddings.at(s.image_id));
  return pool;
}

RetrievalPool build_hard_pool(std::span<const CaptionSet> targets, const EmbeddingTable& target_embeddings,
                              const EmbeddingTable& reservoir, const TextEmbedder& embed, int top_k_count) {
  if (top_k_count < 1) throw ValidationError("hard pool: top_k must be >= 1");
  for (const auto& t : targets)
    if (reservoir.contains(t.image_id))
      throw ValidationError("hard pool: reservoir overlaps the targets at id '" + t.image_id + "'");

  RetrievalPool pool(PoolKind::hard);
  std::set<std::string> retrieved;
  for (const auto& t : targets) {
    const Eigen::VectorXd& image = target_embeddings.at(t.image_id);
    pool.add(t.image_id, image);
    for (auto& id : top_k(image, reservoir, top_k_count)) retrieved.insert(std::move(id));
    for (const auto& caption : t.captions)
      for (auto& id : top_k(embed(caption), reservoir, top_k_count)) retrieved.insert(std::move(id));
  }
  for (const auto& id : retrieved) pool.add(id, reservoir.at(id));
  return pool;
}

std::size_t retrieval_rank(const Eigen::VectorXd& query, std::string_view target_id, const RetrievalPool& pool) {
  if (!pool.contains(target_id))
    throw ValidationError("retrieval: target '" + std::string(target_id) + "' is not in the pool");
  double target_score = 0.0;
  for (std::size_t i = 0; i < pool.size(); ++i)
    if (pool.ids()[i] == target_id) target_score = sim(query, pool.vector(i));
  std::size_t rank = 1;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (pool.ids()[i] == target_id) continue;
    double s = sim(query, pool.vector(i));
    if (s > target_score || (s == target_score && pool.ids()[i] < target_id)) ++rank;
  }
  return rank;
}

std::vector<bool> recall_at_k(const Eigen::VectorXd& query, std::string_view target_id, const RetrievalPool& pool,
                              std::span<const int> ks) {
  std::size_t rank = retrieval_rank(query, target_id, pool);
  std::vector<bool> out;
  for (int k : ks) out.push_back(k >= 1 && rank <= static_cast<std::size_t>(k));
  return out;
}

}  // namespace capenrich
