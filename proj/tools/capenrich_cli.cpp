// capenrich command-line driver: build-data, gen-prompts, toy-embed, train,
// enrich, build-hard-pool, eval.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "capenrich/checkpoint.hpp"
#include "capenrich/corpus.hpp"
#include "capenrich/databuild.hpp"
#include "capenrich/embed.hpp"
#include "capenrich/error.hpp"
#include "capenrich/pipeline.hpp"
#include "capenrich/prompts.hpp"
#include "capenrich/report.hpp"
#include "capenrich/retrieval.hpp"
#include "capenrich/train.hpp"
#include "json.hpp"

using namespace capenrich;
namespace fs = std::filesystem;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitNumeric = 3;

std::uint64_t env_seed() {
  const char* s = std::getenv("CAPENRICH_SEED");
  if (!s || !*s) return 0;
  try {
    return std::stoull(s);
  } catch (const std::exception&) {
    throw ValidationError("CAPENRICH_SEED must be a non-negative integer, got '" + std::string(s) + "'");
  }
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  return in;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<CaptionSet> load_refs(const std::string& captions, const std::string& split) {
  return load_corpus(captions, split.empty() ? std::nullopt : std::optional<fs::path>(split));
}

// ---------------------------------------------------------------- build-data

struct BuildDataArgs {
  std::string captions, split, out, generic_out;
  int max_details = 3;
};

void cmd_build_data(const BuildDataArgs& a) {
  auto corpus = load_refs(a.captions, a.split);
  std::vector<EnrichSample> samples;
  std::vector<GenericItem> generics;
  for (const auto& set : corpus) {
    if (set.split == Split::test) {
      generics.push_back(GenericItem{set.image_id, normalize_caption(select_generic(set.captions))});
      continue;
    }
    auto s = build_samples(set, a.max_details);
    samples.insert(samples.end(), s.begin(), s.end());
  }
  auto out = open_out(a.out);
  write_samples_jsonl(out, samples);
  if (!a.generic_out.empty()) {
    auto g = open_out(a.generic_out);
    write_generic_jsonl(g, generics);
  }
  std::map<std::string, int> counts;
  for (const auto& s : samples) ++counts[std::string(to_string(s.kind))];
  std::cout << "samples " << samples.size() << " (ATTR " << counts["ATTR"] << ", REL " << counts["REL"] << ", MIXED "
            << counts["MIXED"] << ") from " << corpus.size() << " images\n";
  if (!a.generic_out.empty()) std::cout << "generic captions " << generics.size() << " (test split)\n";
}

// --------------------------------------------------------------- gen-prompts

struct GenPromptsArgs {
  std::string generic_file, templates = "diverse", out;
};

void cmd_gen_prompts(const GenPromptsArgs& a) {
  auto in = open_in(a.generic_file);
  auto items = read_generic_jsonl(in);
  auto templates = builtin_templates(parse_template_set(a.templates));
  auto out = open_out(a.out);
  std::size_t lines = 0;
  for (const auto& it : items)
    for (const auto& t : templates)
      for (const auto& text : instantiate(t, it.generic)) {
        nlohmann::ordered_json j;
        j["image_id"] = it.image_id;
        j["template"] = t.name;
        j["category"] = std::string(to_string(t.category));
        j["text"] = text;
        out << j.dump() << '\n';
        ++lines;
      }
  std::cout << "prompt strings " << lines << " for " << items.size() << " captions\n";
}

// ----------------------------------------------------------------- toy-embed

struct ToyEmbedArgs {
  std::string captions, split, out, only;
  int dim = 64;
  std::uint64_t embed_seed = 0;
};

void cmd_toy_embed(const ToyEmbedArgs& a) {
  auto corpus = load_refs(a.captions, a.split);
  std::set<Split> keep;
  for (const auto& s : split_list(a.only)) keep.insert(parse_split(s));
  EmbeddingTable table(a.dim);
  for (const auto& set : corpus)
    if (keep.empty() || keep.count(set.split)) table.insert(set.image_id, toy_image_embed(set, a.dim, a.embed_seed));
  save_embeddings(table, a.out);
  std::cout << "embeddings " << table.size() << " dim " << a.dim << "\n";
}

// --------------------------------------------------------------------- train

struct TrainArgs {
  std::string samples, embeddings, mode = "prompt", prompt_init = "random", prompt_words, prompt_name = "lp-0", kind;
  std::string ckpt_in, ckpt_out, final_out, val_embeddings;
  int num_prompts = 2, batch = 48, epochs = 30, max_steps = 0;
  std::optional<double> lr;
  std::uint64_t seed = 0, embed_seed = 0;
  int d_model = 64, n_heads = 4, n_layers = 2, d_ffn = 128, max_seq = 64, n_visual = 4;
};

nlohmann::ordered_json log_json(const std::vector<EpochLog>& log) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& e : log) {
    nlohmann::ordered_json j;
    j["epoch"] = e.epoch;
    j["steps"] = e.steps;
    j["loss"] = e.mean_loss;
    if (e.val_r1) j["val_r1"] = *e.val_r1;
    arr.push_back(j);
  }
  return arr;
}

void cmd_train(const TrainArgs& a) {
  const TrainMode mode = a.mode == "full" ? TrainMode::full : TrainMode::prompt_only;
  std::vector<EnrichSample> samples = load_samples(a.samples);
  if (!a.kind.empty()) {
    DetailKind k = parse_detail_kind(a.kind);
    std::erase_if(samples, [&](const EnrichSample& s) { return s.kind != k; });
  }
  EmbeddingTable visual = load_embeddings(a.embeddings).table;

  std::optional<EmbeddingTable> val_table;
  std::vector<EnrichSample> train_samples;
  std::vector<GenericItem> val_items;
  if (!a.val_embeddings.empty()) val_table = load_embeddings(a.val_embeddings).table;
  std::set<std::string> val_seen;
  for (const auto& s : samples) {
    if (val_table && val_table->contains(s.image_id)) {
      if (val_seen.insert(s.image_id).second) val_items.push_back(GenericItem{s.image_id, s.generic});
    } else {
      train_samples.push_back(s);
    }
  }
  if (train_samples.empty()) throw ValidationError("no training samples");

  TinyLMCheckpoint ckpt;
  if (!a.ckpt_in.empty()) {
    ckpt = load_checkpoint(a.ckpt_in);
  } else if (mode == TrainMode::prompt_only) {
    throw ValidationError("--mode=prompt needs --ckpt-in (a trained backbone)");
  } else {
    std::vector<TokenSeq> seqs;
    for (const auto& s : train_samples) {
      seqs.push_back(tokenize(s.generic));
      seqs.push_back(detail_tokens(s));
    }
    ckpt.vocab = build_vocab_from_sequences(seqs);
    TinyLMConfig cfg;
    cfg.d_model = a.d_model;
    cfg.n_heads = a.n_heads;
    cfg.n_layers = a.n_layers;
    cfg.d_ffn = a.d_ffn;
    cfg.max_seq = a.max_seq;
    cfg.n_visual = a.n_visual;
    cfg.embed_dim = visual.dim();
    cfg.vocab_size = ckpt.vocab.size();
    cfg.seed = a.seed;
    ckpt.params = init_params(cfg);
  }
  if (ckpt.params.config.embed_dim != visual.dim())
    throw ValidationError("embedding dim " + std::to_string(visual.dim()) + " does not match the checkpoint (" +
                          std::to_string(ckpt.params.config.embed_dim) + ")");

  int skipped = 0;
  std::vector<LMSample> lm = encode_samples(train_samples, ckpt.vocab, visual, &skipped);
  if (lm.empty()) throw ValidationError("no training sample has an image embedding");
  if (skipped) std::cerr << "warning: " << skipped << " samples without an image embedding were skipped\n";

  std::optional<PromptTable> prompts;
  if (mode == TrainMode::prompt_only) {
    if (a.num_prompts < 1) throw ValidationError("--num-prompts must be >= 1");
    PromptInit init = a.prompt_init == "word" ? PromptInit::word : PromptInit::random;
    std::vector<int> words;
    if (init == PromptInit::word) {
      auto names = split_list(a.prompt_words);
      if (names.empty())
        for (int i = 0; i < a.num_prompts && Vocab::kNumSpecials + i < ckpt.vocab.size(); ++i)
          names.push_back(ckpt.vocab.token_of(Vocab::kNumSpecials + i));
      for (const auto& w : names) {
        if (!ckpt.vocab.contains(w)) throw ValidationError("prompt word '" + w + "' is not in the vocabulary");
        words.push_back(ckpt.vocab.id_of(w));
      }
    }
    prompts = init_prompts(ckpt.params, a.num_prompts, init, words, a.seed, a.prompt_name);
  }

  TrainHyper hyper;
  hyper.lr = a.lr ? *a.lr : (mode == TrainMode::full ? 3e-6 : 3e-4);
  hyper.batch_size = a.batch;
  hyper.epochs = a.epochs;
  hyper.seed = a.seed;
  hyper.max_steps = a.max_steps;

  Validator validator;
  if (val_table && !val_items.empty()) {
    TextEmbedder embed{val_table->dim(), a.embed_seed};
    validator = [&](const TinyLMParams& p, const PromptTable* pt) {
      return validation_r1(p, pt, ckpt.vocab, val_items, *val_table, embed);
    };
  }
  std::cout << "training " << lm.size() << " samples, " << val_items.size() << " validation images, mode "
            << a.mode << "\n";
  TrainResult result = train(ckpt.params, prompts, lm, mode, hyper, validator, [](const EpochLog& e) {
    std::cout << "epoch " << e.epoch << " steps " << e.steps << " loss " << e.mean_loss;
    if (e.val_r1) std::cout << " val_r1 " << *e.val_r1;
    std::cout << "\n";
  });

  nlohmann::ordered_json info;
  info["mode"] = a.mode;
  info["lr"] = hyper.lr;
  info["batch"] = hyper.batch_size;
  info["epochs"] = hyper.epochs;
  info["seed"] = hyper.seed;
  info["samples"] = lm.size();
  info["best_epoch"] = result.best_epoch;
  info["log"] = log_json(result.log);
  const std::string key = mode == TrainMode::full ? "backbone" : a.prompt_name;

  auto emit = [&](const TrainState& state, const std::string& path) {
    TinyLMCheckpoint out = ckpt;
    if (mode == TrainMode::full) out.params = state.params;
    if (state.prompts) out.put_prompt(*state.prompts);
    out.train_info[key] = info;
    save_checkpoint(out, path);
  };
  emit(result.best, a.ckpt_out);
  if (!a.final_out.empty()) emit(result.final, a.final_out);
  std::cout << "best epoch " << result.best_epoch << ", checkpoint " << a.ckpt_out << "\n";
}

// -------------------------------------------------------------------- enrich

struct EnrichArgs {
  std::string ckpt, prompts, templates = "diverse", embeddings, generic_file, out;
  int beam = 5, max_new = 20;
  std::uint64_t embed_seed = 0;
};

void cmd_enrich(const EnrichArgs& a) {
  TinyLMCheckpoint ckpt = load_checkpoint(a.ckpt);
  EnrichOptions opt;
  for (const auto& name : split_list(a.prompts)) {
    if (name == "templates") opt.use_templates = true;
    else opt.prompt_names.push_back(name);
  }
  if (opt.prompt_names.empty() && !opt.use_templates) throw ValidationError("--prompts names no prompt source");
  opt.templates = parse_template_set(a.templates);
  if (a.beam < 1) throw ValidationError("--beam must be >= 1");
  if (a.max_new < 1) throw ValidationError("--max-new must be >= 1");
  opt.beam = a.beam;
  opt.max_new = a.max_new;

  EmbeddingTable images = load_embeddings(a.embeddings).table;
  auto in = open_in(a.generic_file);
  auto items = read_generic_jsonl(in);
  TextEmbedder embed{images.dim(), a.embed_seed};
  std::vector<EnrichedRecord> records;
  int fallbacks = 0;
  for (const auto& it : items) {
    records.push_back(enrich_image(ckpt, opt, it, images.at(it.image_id), embed));
    fallbacks += records.back().source == "fallback";
  }
  auto out = open_out(a.out);
  write_enriched_jsonl(out, records);
  std::cout << "enriched " << records.size() << " captions, " << fallbacks << " kept generic\n";
}

// ----------------------------------------------------------- build-hard-pool

struct HardPoolArgs {
  std::string targets, reservoir, captions, split, out;
  int topk = 10;
  std::uint64_t embed_seed = 0;
};

void cmd_build_hard_pool(const HardPoolArgs& a) {
  EmbeddingTable targets = load_embeddings(a.targets).table;
  EmbeddingTable reservoir = load_embeddings(a.reservoir).table;
  auto corpus = load_refs(a.captions, a.split);
  std::map<std::string, const CaptionSet*> by_id;
  for (const auto& s : corpus) by_id[s.image_id] = &s;
  std::vector<CaptionSet> target_sets;
  for (const auto& id : targets.ids()) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw ValidationError("target image '" + id + "' has no captions");
    target_sets.push_back(*it->second);
  }
  RetrievalPool pool = build_hard_pool(target_sets, targets, reservoir, TextEmbedder{targets.dim(), a.embed_seed}, a.topk);
  // Copy the stored float32 records so the pool scores exactly like its sources.
  EmbeddingTable out(targets.dim());
  for (const auto& id : pool.ids()) {
    const auto& raw = targets.contains(id) ? targets.raw(id) : reservoir.raw(id);
    Eigen::VectorXd v(static_cast<Eigen::Index>(raw.size()));
    for (std::size_t i = 0; i < raw.size(); ++i) v(static_cast<Eigen::Index>(i)) = raw[i];
    out.insert(id, v);
  }
  if (fs::path(a.out).has_parent_path()) fs::create_directories(fs::path(a.out).parent_path());
  save_embeddings(out, a.out);
  std::cout << "hard pool " << pool.size() << " images (" << targets.size() << " targets, "
            << pool.size() - targets.size() << " distractors)\n";
}

// ---------------------------------------------------------------------- eval

struct EvalArgs {
  std::vector<std::string> enriched;
  std::string refs, split, embeddings, pool, metrics = "all", report, csv, svg_dir;
  bool baseline = false;
  std::uint64_t embed_seed = 0;
};

void cmd_eval(const EvalArgs& a) {
  std::vector<std::pair<std::string, std::vector<EnrichedRecord>>> methods;
  for (const auto& spec : a.enriched) {
    auto eq = spec.find('=');
    std::string label = eq == std::string::npos ? fs::path(spec).stem().string() : spec.substr(0, eq);
    std::string path = eq == std::string::npos ? spec : spec.substr(eq + 1);
    auto in = open_in(path);
    methods.emplace_back(label, read_enriched_jsonl(in));
  }
  if (a.baseline && !methods.empty()) {
    std::vector<EnrichedRecord> generic;
    for (auto r : methods.front().second) {
      r.enriched = r.generic;
      r.source = "generic";
      r.sim_gain = 0.0;
      generic.push_back(std::move(r));
    }
    methods.insert(methods.begin(), {"generic", std::move(generic)});
  }

  EvalInputs inputs;
  for (const auto& set : load_refs(a.refs, a.split)) inputs.refs[set.image_id] = set.captions;
  inputs.metrics = resolve_metrics(split_list(a.metrics));
  std::optional<EmbeddingTable> images, hard;
  if (!a.embeddings.empty()) {
    images = load_embeddings(a.embeddings).table;
    inputs.images = &*images;
  }
  if (!a.pool.empty()) {
    hard = load_embeddings(a.pool).table;
    inputs.hard_pool = &*hard;
  }
  int dim = images ? images->dim() : hard ? hard->dim() : 64;
  inputs.embed = TextEmbedder{dim, a.embed_seed};
  // Metrics whose inputs are absent are dropped unless named explicitly.
  const bool explicit_names = a.metrics != "all" && !a.metrics.empty();
  if (!explicit_names) {
    std::erase_if(inputs.metrics, [&](const std::string& m) {
      bool needs_images = m == "clip_score" || m == "ref_clip_score" || m.rfind("naive_r@", 0) == 0;
      return (needs_images && !images) || (m.rfind("hard_r@", 0) == 0 && !hard);
    });
  }

  std::vector<MethodReport> reports;
  for (const auto& [label, records] : methods) reports.push_back(evaluate_method(label, records, inputs));

  auto doc = report_json(reports);
  auto out = open_out(a.report);
  out << doc.dump(2) << '\n';
  std::string csv_path = a.csv.empty() ? fs::path(a.report).replace_extension(".csv").string() : a.csv;
  auto csv = open_out(csv_path);
  write_report_csv(csv, reports);
  if (!a.svg_dir.empty()) write_metric_charts(a.svg_dir, reports);

  for (const auto& r : reports) {
    std::cout << r.method;
    auto c = r.corpus();
    for (const auto& m : r.metric_order)
      if (c.count(m)) std::cout << "  " << m << "=" << c[m];
    std::cout << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Caption enrichment toolkit: data building, prompt tuning, enrichment and evaluation"};
  app.require_subcommand(1);
  std::uint64_t default_seed = 0;
  try {
    default_seed = env_seed();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }

  BuildDataArgs bd;
  auto* c_bd = app.add_subcommand("build-data", "Build {generic, details} training samples from a caption corpus");
  c_bd->add_option("--captions", bd.captions, "COCO-style caption JSON")->required();
  c_bd->add_option("--split", bd.split, "Split JSON {image_id: train|val|test}; default: everything is train");
  c_bd->add_option("--out", bd.out, "Output samples JSONL")->required();
  c_bd->add_option("--max-details", bd.max_details, "Maximum clauses per sample")->capture_default_str()->check(CLI::PositiveNumber);
  c_bd->add_option("--generic-out", bd.generic_out, "Also write test-split generic captions (JSONL)");

  GenPromptsArgs gp;
  auto* c_gp = app.add_subcommand("gen-prompts", "Append template prompts to generic captions");
  c_gp->add_option("--generic-file", gp.generic_file, "Generic captions JSONL {image_id, generic}")->required();
  c_gp->add_option("--templates", gp.templates, "Template set")->capture_default_str()->check(CLI::IsMember({"base", "diverse"}));
  c_gp->add_option("--out", gp.out, "Output JSONL")->required();

  ToyEmbedArgs te;
  te.embed_seed = default_seed;
  auto* c_te = app.add_subcommand("toy-embed", "Write hashed toy image embeddings (EMB1) for a corpus");
  c_te->add_option("--captions", te.captions, "COCO-style caption JSON")->required();
  c_te->add_option("--split", te.split, "Split JSON");
  c_te->add_option("--only", te.only, "Comma-separated splits to include; default all");
  c_te->add_option("--dim", te.dim, "Embedding dimension")->capture_default_str()->check(CLI::Range(8, 65535));
  c_te->add_option("--embed-seed", te.embed_seed, "Toy embedder seed (default: $CAPENRICH_SEED or 0)")->capture_default_str();
  c_te->add_option("--out", te.out, "Output EMB1 file")->required();

  TrainArgs tr;
  tr.seed = tr.embed_seed = default_seed;
  double lr_value = 0.0;
  auto* c_tr = app.add_subcommand("train", "Prompt tuning (frozen backbone) or full fine-tuning");
  c_tr->add_option("--samples", tr.samples, "Samples JSONL from build-data")->required();
  c_tr->add_option("--embeddings", tr.embeddings, "Image embeddings (EMB1) used as visual input")->required();
  c_tr->add_option("--mode", tr.mode, "prompt: tune prompt vectors only; full: update every backbone weight")
      ->capture_default_str()->check(CLI::IsMember({"prompt", "full"}));
  c_tr->add_option("--num-prompts", tr.num_prompts, "Prompt length L")->capture_default_str();
  c_tr->add_option("--prompt-init", tr.prompt_init, "Prompt initialization")->capture_default_str()->check(CLI::IsMember({"random", "word"}));
  c_tr->add_option("--prompt-words", tr.prompt_words, "Comma-separated words for --prompt-init=word; default: most frequent tokens");
  c_tr->add_option("--prompt-name", tr.prompt_name, "Name of the trained prompt table")->capture_default_str();
  c_tr->add_option("--kind", tr.kind, "Train only on ATTR, REL or MIXED samples")->check(CLI::IsMember({"ATTR", "REL", "MIXED"}));
  auto* lr_opt = c_tr->add_option("--lr", lr_value, "Learning rate (default 3e-4 for prompt, 3e-6 for full)");
  c_tr->add_option("--batch", tr.batch, "Batch size")->capture_default_str()->check(CLI::PositiveNumber);
  c_tr->add_option("--epochs", tr.epochs, "Epochs")->capture_default_str()->check(CLI::NonNegativeNumber);
  c_tr->add_option("--max-steps", tr.max_steps, "Stop after this many optimizer steps (0: no cap)")->capture_default_str();
  c_tr->add_option("--seed", tr.seed, "Seed for init and shuffling (default: $CAPENRICH_SEED or 0)")->capture_default_str();
  c_tr->add_option("--embed-seed", tr.embed_seed, "Toy text embedder seed for validation (default: $CAPENRICH_SEED or 0)")->capture_default_str();
  c_tr->add_option("--ckpt-in", tr.ckpt_in, "Input checkpoint (required for --mode=prompt)");
  c_tr->add_option("--ckpt-out", tr.ckpt_out, "Checkpoint with the best validation R@1")->required();
  c_tr->add_option("--final-out", tr.final_out, "Also write the final-epoch checkpoint");
  c_tr->add_option("--val-embeddings", tr.val_embeddings, "Validation image embeddings; their samples are held out for R@1");
  c_tr->add_option("--d-model", tr.d_model, "Model width (new backbones)")->capture_default_str();
  c_tr->add_option("--heads", tr.n_heads, "Attention heads (new backbones)")->capture_default_str();
  c_tr->add_option("--layers", tr.n_layers, "Decoder layers (new backbones)")->capture_default_str();
  c_tr->add_option("--ffn", tr.d_ffn, "Feed-forward width (new backbones)")->capture_default_str();
  c_tr->add_option("--max-seq", tr.max_seq, "Maximum sequence length (new backbones)")->capture_default_str();
  c_tr->add_option("--visual-slots", tr.n_visual, "Visual prefix slots (new backbones)")->capture_default_str();

  EnrichArgs en;
  en.embed_seed = default_seed;
  auto* c_en = app.add_subcommand("enrich", "Decode details, filter them and write enriched captions");
  c_en->add_option("--ckpt", en.ckpt, "Checkpoint")->required();
  c_en->add_option("--prompts", en.prompts, "NAME[,NAME...] prompt tables and/or 'templates'")->required();
  c_en->add_option("--templates", en.templates, "Template set used by 'templates'")->capture_default_str()->check(CLI::IsMember({"base", "diverse"}));
  c_en->add_option("--beam", en.beam, "Beam size")->capture_default_str();
  c_en->add_option("--max-new", en.max_new, "Maximum generated tokens")->capture_default_str();
  c_en->add_option("--embeddings", en.embeddings, "Image embeddings (EMB1)")->required();
  c_en->add_option("--generic-file", en.generic_file, "Generic captions JSONL {image_id, generic}")->required();
  c_en->add_option("--embed-seed", en.embed_seed, "Toy text embedder seed (default: $CAPENRICH_SEED or 0)")->capture_default_str();
  c_en->add_option("--out", en.out, "Output enriched JSONL")->required();

  HardPoolArgs hp;
  hp.embed_seed = default_seed;
  auto* c_hp = app.add_subcommand("build-hard-pool", "Add the most similar reservoir images to the target images");
  c_hp->add_option("--targets", hp.targets, "Target image embeddings (EMB1)")->required();
  c_hp->add_option("--reservoir", hp.reservoir, "Reservoir image embeddings (EMB1), disjoint from the targets")->required();
  c_hp->add_option("--captions", hp.captions, "Caption JSON holding the targets' captions (text queries)")->required();
  c_hp->add_option("--split", hp.split, "Split JSON");
  c_hp->add_option("--topk", hp.topk, "Images retrieved per query")->capture_default_str();
  c_hp->add_option("--embed-seed", hp.embed_seed, "Toy text embedder seed (default: $CAPENRICH_SEED or 0)")->capture_default_str();
  c_hp->add_option("--out", hp.out, "Output pool (EMB1)")->required();

  EvalArgs ev;
  ev.embed_seed = default_seed;
  auto* c_ev = app.add_subcommand("eval", "Accuracy, retrieval and diversity metrics with JSON/CSV/SVG output");
  c_ev->add_option("--enriched", ev.enriched, "LABEL=PATH enriched JSONL; repeatable")->required();
  c_ev->add_option("--refs", ev.refs, "Reference caption JSON")->required();
  c_ev->add_option("--split", ev.split, "Split JSON");
  c_ev->add_option("--embeddings", ev.embeddings, "Image embeddings (naive pool, CLIP-S)");
  c_ev->add_option("--pool", ev.pool, "Hard pool (EMB1) from build-hard-pool");
  c_ev->add_option("--metrics", ev.metrics, "Comma-separated metric names or families (accuracy, retrieval, diversity, all)")->capture_default_str();
  c_ev->add_option("--report", ev.report, "Report JSON path")->required();
  c_ev->add_option("--csv", ev.csv, "CSV path (default: report path with .csv)");
  c_ev->add_option("--svg-dir", ev.svg_dir, "Directory for SVG bar charts");
  c_ev->add_flag("--baseline", ev.baseline, "Also score the generic captions as method 'generic'");
  c_ev->add_option("--embed-seed", ev.embed_seed, "Toy text embedder seed (default: $CAPENRICH_SEED or 0)")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  try {
    if (*c_bd) cmd_build_data(bd);
    else if (*c_gp) cmd_gen_prompts(gp);
    else if (*c_te) cmd_toy_embed(te);
    else if (*c_tr) {
      if (*lr_opt) tr.lr = lr_value;
      cmd_train(tr);
    } else if (*c_en) cmd_enrich(en);
    else if (*c_hp) cmd_build_hard_pool(hp);
    else if (*c_ev) cmd_eval(ev);
  } catch (const NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return 0;
}
