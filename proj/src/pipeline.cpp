#include "capenrich/pipeline.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <set>

#include "capenrich/decode.hpp"
#include "capenrich/error.hpp"
#include "capenrich/metrics.hpp"
#include "json.hpp"

namespace capenrich {

TokenSeq detail_tokens(const EnrichSample& sample) {
  std::string joined;
  for (std::size_t i = 0; i < sample.details.size(); ++i) {
    if (i) joined += ", ";
    joined += sample.details[i];
  }
  return tokenize(joined);
}

std::vector<LMSample> encode_samples(std::span<const EnrichSample> samples, const Vocab& vocab,
                                     const EmbeddingTable& visual, int* skipped) {
  std::vector<LMSample> out;
  int missing = 0;
  for (const auto& s : samples) {
    if (!visual.contains(s.image_id)) {
      ++missing;
      continue;
    }
    TokenSeq g = tokenize(s.generic);
    TokenSeq d = detail_tokens(s);
    out.push_back(LMSample{visual.at(s.image_id), vocab.encode(g), vocab.encode(d)});
  }
  if (skipped) *skipped = missing;
  return out;
}

PromptTable text_prompt_table(const TinyLMParams& params, const Vocab& vocab, const std::string& text,
                              std::string name) {
  TokenSeq toks = tokenize(text);
  if (toks.empty()) throw ValidationError("text prompt '" + name + "' is empty");
  PromptTable t{std::move(name), Mat(static_cast<Eigen::Index>(toks.size()), params.config.d_model)};
  for (std::size_t i = 0; i < toks.size(); ++i) t.vectors.row(static_cast<Eigen::Index>(i)) = params.tok_emb.row(vocab.id_of(toks[i]));
  return t;
}

void write_generic_jsonl(std::ostream& out, std::span<const GenericItem> items) {
  for (const auto& it : items) {
    nlohmann::ordered_json j;
    j["image_id"] = it.image_id;
    j["generic"] = it.generic;
    out << j.dump() << '\n';
  }
}

std::vector<GenericItem> read_generic_jsonl(std::istream& in) {
  std::vector<GenericItem> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError("generic captions line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("image_id") || !j.contains("generic") || !j["generic"].is_string())
      throw ParseError("generic captions line " + std::to_string(lineno) + ": needs 'image_id' and 'generic'");
    const auto& id = j["image_id"];
    out.push_back(GenericItem{id.is_string() ? id.get<std::string>() : id.dump(), j["generic"].get<std::string>()});
  }
  return out;
}

std::vector<CandidateDetail> decode_candidates(const TinyLMCheckpoint& ckpt, const EnrichOptions& options,
                                               const Vec& visual, const std::string& generic) {
  std::vector<int> g = ckpt.vocab.encode(tokenize(generic));
  std::vector<CandidateDetail> out;
  for (const auto& name : options.prompt_names) {
    const PromptTable* table = ckpt.find_prompt(name);
    if (!table) throw ValidationError("checkpoint has no prompt table '" + name + "'");
    auto hyps = decode(ckpt.params, table, visual, g, options.beam, options.max_new);
    if (hyps.empty() || hyps.front().tokens.empty()) continue;
    out.push_back(CandidateDetail{detokenize(ckpt.vocab.decode(hyps.front().tokens)), "prompt:" + name});
  }
  if (options.use_templates) {
    for (const auto& tmpl : builtin_templates(options.templates)) {
      for (const auto& filled : fill_template(tmpl, generic)) {
        PromptTable hard = text_prompt_table(ckpt.params, ckpt.vocab, filled, "template:" + tmpl.name);
        auto hyps = decode(ckpt.params, &hard, visual, g, options.beam, options.max_new);
        std::string detail = filled;
        if (!hyps.empty() && !hyps.front().tokens.empty())
          detail += " " + detokenize(ckpt.vocab.decode(hyps.front().tokens));
        out.push_back(CandidateDetail{detail, "template:" + tmpl.name});
      }
    }
  }
  return out;
}

EnrichedRecord enrich_image(const TinyLMCheckpoint& ckpt, const EnrichOptions& options, const GenericItem& item,
                            const Vec& image, const TextEmbedder& embed) {
  auto candidates = decode_candidates(ckpt, options, image, item.generic);
  auto survivors = filter_candidates(image, item.generic, candidates, embed);
  return choose_enriched(item.image_id, item.generic, survivors);
}

double validation_r1(const TinyLMParams& params, const PromptTable* prompts, const Vocab& vocab,
                     std::span<const GenericItem> items, const EmbeddingTable& images, const TextEmbedder& embed) {
  if (items.empty()) return 0.0;
  RetrievalPool pool(PoolKind::naive);
  for (const auto& it : items)
    if (!pool.contains(it.image_id)) pool.add(it.image_id, images.at(it.image_id));
  int hits = 0;
  for (const auto& it : items) {
    const Vec& visual = images.at(it.image_id);
    Hypothesis h = greedy_decode(params, prompts, visual, vocab.encode(tokenize(it.generic)));
    std::string caption = it.generic;
    if (!h.tokens.empty()) caption += ", " + detokenize(vocab.decode(h.tokens));
    hits += retrieval_rank(embed(caption), it.image_id, pool) == 1;
  }
  return 100.0 * hits / static_cast<double>(items.size());
}

namespace {

const std::vector<std::string> kAccuracy = {"bleu4", "cider", "spice", "clip_score", "ref_clip_score"};
const std::vector<std::string> kRetrieval = {"naive_r@1", "naive_r@5", "naive_r@10",
                                             "hard_r@1",  "hard_r@5",  "hard_r@10"};
const std::vector<std::string> kDiversity = {"div1", "div2", "mbleu4", "self_cider"};
const std::vector<int> kKs = {1, 5, 10};

bool wants(const std::vector<std::string>& metrics, const std::string& name) {
  return std::find(metrics.begin(), metrics.end(), name) != metrics.end();
}

bool wants_prefix(const std::vector<std::string>& metrics, const std::string& prefix) {
  return std::any_of(metrics.begin(), metrics.end(), [&](const std::string& m) { return m.rfind(prefix, 0) == 0; });
}

void add_diversity(std::map<std::string, double>& into, std::span<const TokenSeq> caps,
                   const std::vector<std::string>& metrics) {
  if (wants(metrics, "div1")) into["div1"] = div_n(caps, 1);
  if (wants(metrics, "div2")) {
    int skipped = 0;
    bool any = std::any_of(caps.begin(), caps.end(), [](const TokenSeq& t) { return t.size() >= 2; });
    if (any) into["div2"] = div_n(caps, 2, &skipped);
  }
  if (caps.size() >= 2) {
    if (wants(metrics, "mbleu4")) into["mbleu4"] = mbleu4(caps);
    if (wants(metrics, "self_cider")) into["self_cider"] = self_cider(caps);
  }
}

}  // namespace

const std::vector<std::string>& all_metric_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v = kAccuracy;
    v.insert(v.end(), kRetrieval.begin(), kRetrieval.end());
    v.insert(v.end(), kDiversity.begin(), kDiversity.end());
    return v;
  }();
  return names;
}

std::vector<std::string> resolve_metrics(const std::vector<std::string>& requested) {
  std::set<std::string> chosen;
  auto add = [&](const std::vector<std::string>& v) { chosen.insert(v.begin(), v.end()); };
  if (requested.empty()) add(all_metric_names());
  for (const auto& r : requested) {
    if (r == "all") add(all_metric_names());
    else if (r == "accuracy") add(kAccuracy);
    else if (r == "retrieval") add(kRetrieval);
    else if (r == "diversity") add(kDiversity);
    else if (wants(all_metric_names(), r)) chosen.insert(r);
    else throw ValidationError("unknown metric '" + r + "'");
  }
  std::vector<std::string> out;
  for (const auto& n : all_metric_names())
    if (chosen.count(n)) out.push_back(n);
  return out;
}

MethodReport evaluate_method(const std::string& method, std::span<const EnrichedRecord> records,
                             const EvalInputs& inputs) {
  std::vector<std::string> metrics = inputs.metrics.empty() ? all_metric_names() : inputs.metrics;
  const bool need_images = wants(metrics, "clip_score") || wants(metrics, "ref_clip_score") ||
                           wants_prefix(metrics, "naive_r@");
  if (need_images && !inputs.images) throw ValidationError("image embeddings are required for " + method);
  if (wants_prefix(metrics, "hard_r@") && !inputs.hard_pool)
    throw ValidationError("a hard pool is required for hard_r@K");

  // Group records by image, first-appearance order.
  std::vector<std::string> order;
  std::map<std::string, std::vector<const EnrichedRecord*>> by_image;
  for (const auto& r : records) {
    if (!inputs.refs.count(r.image_id)) throw ValidationError("no references for image '" + r.image_id + "'");
    auto& slot = by_image[r.image_id];
    if (slot.empty()) order.push_back(r.image_id);
    slot.push_back(&r);
  }

  std::vector<std::vector<TokenSeq>> all_refs;
  for (const auto& [id, caps] : inputs.refs) {
    std::vector<TokenSeq> t;
    for (const auto& c : caps) t.push_back(tokenize(c));
    all_refs.push_back(std::move(t));
  }
  const CiderStats stats = CiderStats::from_references(all_refs);

  std::optional<RetrievalPool> naive, hard;
  if (wants_prefix(metrics, "naive_r@")) {
    naive.emplace(PoolKind::naive);
    for (const auto& id : order) naive->add(id, inputs.images->at(id));
  }
  if (wants_prefix(metrics, "hard_r@")) hard = RetrievalPool::from_table(*inputs.hard_pool, PoolKind::hard);

  MethodReport rep;
  rep.method = method;
  rep.metric_order = metrics;
  const bool per_image_diversity =
      std::any_of(by_image.begin(), by_image.end(), [](const auto& kv) { return kv.second.size() >= 2; });
  std::vector<TokenSeq> every_caption;

  for (const auto& id : order) {
    const auto& recs = by_image.at(id);
    std::vector<TokenSeq> refs;
    std::vector<Vec> ref_vecs;
    for (const auto& c : inputs.refs.at(id)) {
      refs.push_back(tokenize(c));
      ref_vecs.push_back(inputs.embed(refs.back()));
    }
    std::map<std::string, double> sum;
    std::vector<TokenSeq> caps;
    for (const EnrichedRecord* r : recs) {
      TokenSeq cand = tokenize(r->enriched);
      caps.push_back(cand);
      every_caption.push_back(cand);
      Vec q = inputs.embed(cand);
      if (wants(metrics, "bleu4")) sum["bleu4"] += bleu(cand, refs, 4);
      if (wants(metrics, "cider")) sum["cider"] += cider(cand, refs, stats);
      if (wants(metrics, "spice")) sum["spice"] += spice_lite(cand, refs);
      if (wants(metrics, "clip_score")) sum["clip_score"] += clip_score(inputs.images->at(id), q);
      if (wants(metrics, "ref_clip_score")) sum["ref_clip_score"] += ref_clip_score(inputs.images->at(id), q, ref_vecs);
      for (auto [pool, prefix] : {std::pair{&naive, "naive_r@"}, std::pair{&hard, "hard_r@"}}) {
        if (!*pool) continue;
        auto hits = recall_at_k(q, id, **pool, kKs);
        for (std::size_t k = 0; k < kKs.size(); ++k) {
          std::string name = prefix + std::to_string(kKs[k]);
          if (wants(metrics, name)) sum[name] += hits[k] ? 100.0 : 0.0;
        }
      }
    }
    ImageMetrics row{id, {}};
    for (const auto& [k, v] : sum) row.values[k] = v / static_cast<double>(recs.size());
    if (per_image_diversity && caps.size() >= 2) add_diversity(row.values, caps, metrics);
    rep.per_image.push_back(std::move(row));
  }
  if (!per_image_diversity && !every_caption.empty()) add_diversity(rep.set_level, every_caption, metrics);
  return rep;
}

}  // namespace capenrich
