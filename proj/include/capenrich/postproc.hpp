#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "capenrich/embed.hpp"

namespace capenrich {

struct ScoredCandidate {
  std::string detail;    // the appended clause(s)
  std::string enriched;  // "{generic}, {detail}"
  std::string source;    // e.g. "prompt:ATTR" or "template:weather"
  double sim = 0.0;      // sim(enriched, image)
  double sim_gain = 0.0; // sim(enriched, image) - sim(generic, image)
};

struct CandidateDetail {
  std::string detail;
  std::string source;
};

/// Drops structurally incomplete details, then keeps those whose enriched
/// caption is strictly closer to the image than the generic caption.
std::vector<ScoredCandidate> filter_candidates(const Eigen::VectorXd& image, std::string_view generic,
                                               std::span<const CandidateDetail> candidates,
                                               const TextEmbedder& embed);

/// Highest sim; ties go to the shorter enriched caption (in tokens), then the
/// lexicographically smaller one. Result is independent of input order.
std::optional<std::size_t> select_best(std::span<const ScoredCandidate> survivors);

struct EnrichedRecord {
  std::string image_id;
  std::string generic;
  std::string enriched;
  std::string source;  // "template:<name>", "prompt:<name>" or "fallback"
  double sim_gain = 0.0;
};

/// The best survivor, or the generic caption unchanged (source "fallback").
EnrichedRecord choose_enriched(std::string image_id, std::string_view generic,
                               std::span<const ScoredCandidate> survivors);

void write_enriched_jsonl(std::ostream& out, std::span<const EnrichedRecord> records);
std::vector<EnrichedRecord> read_enriched_jsonl(std::istream& in);

}  // namespace capenrich
