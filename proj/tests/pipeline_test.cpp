#include <gtest/gtest.h>

#include <sstream>

#include "capenrich/checkpoint.hpp"
#include "capenrich/databuild.hpp"
#include "capenrich/error.hpp"
#include "capenrich/pipeline.hpp"

using namespace capenrich;

namespace {

struct Fixture {
  std::vector<CaptionSet> corpus = load_corpus(std::string(FIXTURE_DIR) + "/pipeline_captions.json",
                                               std::string(FIXTURE_DIR) + "/pipeline_split.json");
  EmbeddingTable images{32};
  TextEmbedder embed{32, 0};
  TinyLMCheckpoint ckpt;

  Fixture() {
    for (const auto& s : corpus) images.insert(s.image_id, toy_image_embed(s, 32, 0));
    ckpt.vocab = build_vocab(corpus);
    TinyLMConfig c;
    c.d_model = 16;
    c.n_heads = 2;
    c.n_layers = 1;
    c.d_ffn = 32;
    c.max_seq = 48;
    c.n_visual = 2;
    c.embed_dim = 32;
    c.vocab_size = ckpt.vocab.size();
    c.seed = 4;
    ckpt.params = init_params(c);
    ckpt.put_prompt(init_prompts(ckpt.params, 2, PromptInit::random, {}, 1, "ATTR"));
    ckpt.put_prompt(init_prompts(ckpt.params, 2, PromptInit::random, {}, 2, "REL"));
  }

  std::string generic(const CaptionSet& s) const { return normalize_caption(select_generic(s.captions)); }
};

const Fixture& fx() {
  static const Fixture f;
  return f;
}

}  // namespace

TEST(Pipeline, DetailTokensJoinClauses) {
  EnrichSample s{"1", "a cat", {"the cat is grey", "the cat on the mat"}, DetailKind::ATTR};
  EXPECT_EQ(detail_tokens(s), tokenize("the cat is grey, the cat on the mat"));
}

TEST(Pipeline, EncodeSamplesSkipsImagesWithoutEmbedding) {
  std::vector<EnrichSample> samples = {{fx().corpus[0].image_id, "a cat", {"the cat is grey"}, DetailKind::ATTR},
                                       {"unknown", "a cat", {"the cat is grey"}, DetailKind::ATTR}};
  int skipped = 0;
  auto out = encode_samples(samples, fx().ckpt.vocab, fx().images, &skipped);
  EXPECT_EQ(out.size(), 1u);
  EXPECT_EQ(skipped, 1);
  EXPECT_EQ(out[0].generic, fx().ckpt.vocab.encode(tokenize("a cat")));
}

TEST(Pipeline, TextPromptTableCopiesEmbeddings) {
  auto t = text_prompt_table(fx().ckpt.params, fx().ckpt.vocab, "the", "h");
  ASSERT_EQ(t.length(), 1);
  EXPECT_EQ(Mat(t.vectors.row(0)), Mat(fx().ckpt.params.tok_emb.row(fx().ckpt.vocab.id_of("the"))));
}

TEST(Pipeline, GenericJsonlRoundTrip) {
  std::vector<GenericItem> items = {{"1", "a cat"}, {"2", "a dog"}};
  std::ostringstream out;
  write_generic_jsonl(out, items);
  std::istringstream in(out.str());
  auto back = read_generic_jsonl(in);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].generic, "a dog");
}

TEST(Pipeline, ResolveMetrics) {
  EXPECT_EQ(resolve_metrics({"all"}), all_metric_names());
  EXPECT_EQ(resolve_metrics({"retrieval"}).size(), 6u);
  EXPECT_EQ(resolve_metrics({"diversity"}), (std::vector<std::string>{"div1", "div2", "mbleu4", "self_cider"}));
  EXPECT_EQ(resolve_metrics({"cider", "cider"}), std::vector<std::string>{"cider"});
  EXPECT_THROW(resolve_metrics({"meteor"}), ValidationError);
}

TEST(Pipeline, CandidateSources) {
  const auto& s = fx().corpus[0];
  EnrichOptions o;
  o.prompt_names = {"ATTR", "REL"};
  o.use_templates = true;
  o.max_new = 4;
  auto cands = decode_candidates(fx().ckpt, o, fx().images.at(s.image_id), fx().generic(s));
  ASSERT_GE(cands.size(), 2u);
  EXPECT_EQ(cands[0].source, "prompt:ATTR");
  EXPECT_EQ(cands[1].source, "prompt:REL");
  for (std::size_t i = 2; i < cands.size(); ++i) EXPECT_EQ(cands[i].source.rfind("template:", 0), 0u);
  o.prompt_names = {"missing"};
  EXPECT_THROW(decode_candidates(fx().ckpt, o, fx().images.at(s.image_id), fx().generic(s)), ValidationError);
}

TEST(Pipeline, EnrichNeverDegrades) {
  EnrichOptions o;
  o.prompt_names = {"ATTR", "REL"};
  o.use_templates = true;
  o.max_new = 4;
  for (const auto& s : fx().corpus) {
    if (s.split != Split::test) continue;
    const Vec& img = fx().images.at(s.image_id);
    auto r = enrich_image(fx().ckpt, o, {s.image_id, fx().generic(s)}, img, fx().embed);
    double sy = sim(fx().embed(r.enriched), img), sg = sim(fx().embed(r.generic), img);
    if (r.source == "fallback") {
      EXPECT_EQ(r.enriched, r.generic);
    } else {
      EXPECT_GT(sy, sg);
      EXPECT_NEAR(r.sim_gain, sy - sg, 1e-12);
    }
  }
}

TEST(Pipeline, ValidationR1IsAPercentage) {
  std::vector<GenericItem> items;
  for (const auto& s : fx().corpus)
    if (s.split == Split::val) items.push_back({s.image_id, fx().generic(s)});
  double r = validation_r1(fx().ckpt.params, fx().ckpt.find_prompt("ATTR"), fx().ckpt.vocab, items, fx().images,
                           fx().embed);
  EXPECT_GE(r, 0.0);
  EXPECT_LE(r, 100.0);
  EXPECT_EQ(r, validation_r1(fx().ckpt.params, fx().ckpt.find_prompt("ATTR"), fx().ckpt.vocab, items, fx().images,
                             fx().embed));
}

TEST(Pipeline, EvaluateAggregatesEqualRecomputedMeans) {
  EvalInputs in;
  in.images = &fx().images;
  in.embed = fx().embed;
  in.metrics = resolve_metrics({"accuracy", "naive_r@1", "naive_r@5", "naive_r@10", "diversity"});
  std::vector<EnrichedRecord> recs;
  for (const auto& s : fx().corpus) {
    if (s.split != Split::test) continue;
    in.refs[s.image_id] = s.captions;
    recs.push_back({s.image_id, fx().generic(s), normalize_caption(s.captions.back()), "x", 0.0});
  }
  auto rep = evaluate_method("m", recs, in);
  EXPECT_EQ(rep.per_image.size(), recs.size());
  auto corpus = rep.corpus();
  for (const auto& name : {"bleu4", "cider", "naive_r@1", "clip_score"}) {
    double sum = 0.0;
    for (const auto& row : rep.per_image) sum += row.values.at(name);
    EXPECT_NEAR(corpus.at(name), sum / rep.per_image.size(), 1e-12) << name;
  }
  EXPECT_LE(corpus.at("naive_r@1"), corpus.at("naive_r@5"));
  EXPECT_LE(corpus.at("naive_r@5"), corpus.at("naive_r@10"));
  EXPECT_TRUE(rep.set_level.count("div1"));
  EXPECT_FALSE(corpus.count("hard_r@1"));
  recs.push_back({"nope", "a", "a", "x", 0.0});
  EXPECT_THROW(evaluate_method("m", recs, in), ValidationError);
}
