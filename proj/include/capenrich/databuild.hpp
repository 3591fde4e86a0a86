#pragma once

#include <filesystem>
#include <iosfwd>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "capenrich/corpus.hpp"
#include "capenrich/sgparse.hpp"

namespace capenrich {

enum class DetailKind { ATTR, REL, MIXED };

std::string_view to_string(DetailKind kind);
DetailKind parse_detail_kind(std::string_view text);

struct DetailCandidate {
  DetailKind kind = DetailKind::ATTR;
  std::string text;
  std::set<std::string> content_lemmas;
  int source_index = 0;
};

/// One `{generic, details}` training record.
struct EnrichSample {
  std::string image_id;
  std::string generic;               // normalized form of one reference caption
  std::vector<std::string> details;  // rendered clauses, non-empty
  DetailKind kind = DetailKind::ATTR;

  bool operator==(const EnrichSample&) const = default;
};

/// Fewest tokens wins; ties go to the lexicographically smallest string.
const std::string& select_generic(std::span<const std::string> captions);

/// Crude suffix lemmatizer: plural -s/-es (length > 3) and gerund -ing (length > 5).
std::string lemma(std::string_view token);

std::set<std::string> lemma_set(std::span<const std::string> tokens);

/// ATTR candidates ("the {head} is {modifier}") for every entity modifier,
/// then REL candidates ("the {subj} {pred} the {obj}") for every relation.
std::vector<DetailCandidate> extract_candidates(const SceneGraph& graph, int source_index = 0);

/// Builds zero, one (ATTR or REL) or two samples for one image.
std::vector<EnrichSample> build_samples(const CaptionSet& caption_set, int max_details = 3);

/// "{G}, {d1}, {d2}, ..."; throws ValidationError on an empty detail list.
std::string render_target(const EnrichSample& sample);
std::string render_target(std::string_view generic, std::span<const std::string> details);

/// One JSON object per line: {"image_id","generic","details","kind"}.
void write_samples_jsonl(std::ostream& out, std::span<const EnrichSample> samples);
std::vector<EnrichSample> read_samples_jsonl(std::istream& in);
std::vector<EnrichSample> load_samples(const std::filesystem::path& path);

}  // namespace capenrich
