#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "capenrich/corpus.hpp"

namespace capenrich {

/// Unit-norm image or text vectors keyed by id, in insertion order.
///
/// Vectors are stored as the float32 values that go to disk plus their
/// float64 normalization, so an in-memory table and its saved copy score
/// identically.
class EmbeddingTable {
 public:
  explicit EmbeddingTable(int dim = 0) : dim_(dim) {}

  int dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }
  bool contains(std::string_view id) const { return index_.count(std::string(id)) > 0; }
  const std::vector<std::string>& ids() const { return ids_; }

  /// Returns true when an existing id was overwritten. Throws ValidationError
  /// on a dimension mismatch or a vector that normalizes to zero.
  bool insert(const std::string& id, const Eigen::VectorXd& vector);

  /// The unit vector for `id`; throws ValidationError if absent.
  const Eigen::VectorXd& at(std::string_view id) const;
  const std::vector<float>& raw(std::string_view id) const;

 private:
  int dim_;
  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::vector<float>> raw_;
  std::vector<Eigen::VectorXd> unit_;
};

struct LoadedEmbeddings {
  EmbeddingTable table;
  int duplicates = 0;  // records that overwrote an earlier id
};

/// EMB1: magic "EMB1", u32 count, u32 dim, then per record u16 id length,
/// id bytes, dim x float32, all little-endian.
LoadedEmbeddings parse_embeddings(std::string_view bytes);
LoadedEmbeddings load_embeddings(const std::filesystem::path& path);
std::string serialize_embeddings(const EmbeddingTable& table);
void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path);

/// Sum of per-token pseudo-Gaussian vectors (seeded by token hash and
/// `seed`), L2-normalized. Punctuation tokens are ignored. An empty sequence
/// maps to the first basis vector.
Eigen::VectorXd toy_text_embed(std::span<const std::string> seq, int dim, std::uint64_t seed);

/// Normalized mean of the reference captions' text embeddings.
Eigen::VectorXd toy_image_embed(const CaptionSet& caption_set, int dim, std::uint64_t seed);

/// Hermetic text encoder bound to one (dim, seed) pair.
struct TextEmbedder {
  int dim = 64;
  std::uint64_t seed = 0;

  Eigen::VectorXd operator()(std::string_view text) const;
  Eigen::VectorXd operator()(std::span<const std::string> tokens) const;
};

/// Cosine similarity; throws ValidationError on a dimension mismatch.
double sim(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

inline constexpr double kClipScoreWeight = 2.5;

/// w * max(cos, 0).
double clip_score(const Eigen::VectorXd& image, const Eigen::VectorXd& text, double w = kClipScoreWeight);

/// Harmonic mean of clip_score(image, candidate) and max(0, max_r cos(candidate, r)).
double ref_clip_score(const Eigen::VectorXd& image, const Eigen::VectorXd& candidate,
                      std::span<const Eigen::VectorXd> references, double w = kClipScoreWeight);

}  // namespace capenrich
