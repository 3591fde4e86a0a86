#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "capenrich/checkpoint.hpp"
#include "capenrich/corpus.hpp"
#include "capenrich/databuild.hpp"
#include "capenrich/embed.hpp"
#include "capenrich/postproc.hpp"
#include "capenrich/prompts.hpp"
#include "capenrich/report.hpp"
#include "capenrich/retrieval.hpp"

namespace capenrich {

/// Tokens of the joined detail clauses ("d1, d2").
TokenSeq detail_tokens(const EnrichSample& sample);

/// Decoder inputs for samples whose image has a visual embedding; the others
/// are skipped and counted in `skipped`.
std::vector<LMSample> encode_samples(std::span<const EnrichSample> samples, const Vocab& vocab,
                                     const EmbeddingTable& visual, int* skipped = nullptr);

/// A fixed prompt table made of the token embeddings of `text` (a hard prompt).
PromptTable text_prompt_table(const TinyLMParams& params, const Vocab& vocab, const std::string& text,
                              std::string name);

/// One image with its generic caption, for decoding.
struct GenericItem {
  std::string image_id;
  std::string generic;
};

/// JSON lines {"image_id","generic"}.
void write_generic_jsonl(std::ostream& out, std::span<const GenericItem> items);
std::vector<GenericItem> read_generic_jsonl(std::istream& in);

struct EnrichOptions {
  std::vector<std::string> prompt_names;  // learnable tables in the checkpoint
  bool use_templates = false;
  TemplateSet templates = TemplateSet::diverse;
  int beam = 5;
  int max_new = 20;
};

/// Decoded detail per prompt source: the top beam hypothesis for every named
/// table, and for every filled template its text followed by the decoded
/// continuation.
std::vector<CandidateDetail> decode_candidates(const TinyLMCheckpoint& ckpt, const EnrichOptions& options,
                                               const Vec& visual, const std::string& generic);

/// Decoding plus post-processing for one image.
EnrichedRecord enrich_image(const TinyLMCheckpoint& ckpt, const EnrichOptions& options, const GenericItem& item,
                            const Vec& image, const TextEmbedder& embed);

/// Percentage of items whose enriched caption (greedy detail appended to the
/// generic caption) retrieves its own image at rank 1 in the pool of the
/// items' images.
double validation_r1(const TinyLMParams& params, const PromptTable* prompts, const Vocab& vocab,
                     std::span<const GenericItem> items, const EmbeddingTable& images, const TextEmbedder& embed);

struct EvalInputs {
  std::map<std::string, std::vector<std::string>> refs;  // image id -> reference captions
  const EmbeddingTable* images = nullptr;                // naive pool and CLIP-S image side
  const EmbeddingTable* hard_pool = nullptr;
  TextEmbedder embed;
  std::vector<std::string> metrics;  // empty: all available
};

/// Every metric name evaluate_method can produce, in report order.
const std::vector<std::string>& all_metric_names();

/// Expands family names ("accuracy", "retrieval", "diversity", "all") and
/// validates individual names.
std::vector<std::string> resolve_metrics(const std::vector<std::string>& requested);

/// Per-image rows (records of the same image are averaged) plus diversity:
/// per image when images carry several records, otherwise over the whole set.
MethodReport evaluate_method(const std::string& method, std::span<const EnrichedRecord> records,
                             const EvalInputs& inputs);

}  // namespace capenrich
