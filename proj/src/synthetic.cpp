#include "capenrich/synthetic.hpp"

#include <algorithm>

#include "capenrich/error.hpp"
#include "capenrich/random.hpp"
#include "json.hpp"

namespace capenrich {

namespace {

const std::vector<std::string> kTaskObjects = {"cup", "dog", "car", "ball", "hat", "box", "bike", "kite"};
const std::vector<std::string> kTaskColors = {"red", "blue", "green", "yellow", "orange", "purple", "pink", "brown"};
const std::vector<std::string> kTaskPlaces = {"kitchen", "park", "street", "field", "garden", "beach", "room", "yard"};

LMSample task_sample(const DetailTask& task, const DetailTask::Image& img, const TokenSeq& detail) {
  TokenSeq generic = {"a", img.object};
  return LMSample{img.visual, task.vocab.encode(generic), task.vocab.encode(detail)};
}

template <class T>
const T& pick(Rng& rng, const std::vector<T>& v) {
  return v[rng.below(v.size())];
}

}  // namespace

DetailTask make_detail_task(int n_images) {
  if (n_images < 1) throw ValidationError("make_detail_task: need at least one image");
  DetailTask task;
  task.colors = kTaskColors;
  task.places = kTaskPlaces;
  Rng rng(0x5eed);
  std::vector<TokenSeq> texts;
  for (int i = 0; i < n_images; ++i) {
    DetailTask::Image img;
    img.id = "syn" + std::to_string(i);
    img.object = pick(rng, kTaskObjects);
    int c = i % 8, p = (i / 8) % 8;
    img.color = kTaskColors[c];
    img.place = kTaskPlaces[p];
    img.visual = Vec::Zero(16);
    img.visual(c) = 1.0;
    img.visual(8 + p) = 1.0;
    texts.push_back({"a", img.object});
    texts.push_back({"the", img.object, "is", img.color});
    texts.push_back({"the", img.object, "in", "the", img.place});
    task.images.push_back(std::move(img));
  }
  task.vocab = build_vocab_from_sequences(texts);
  return task;
}

std::vector<LMSample> DetailTask::pretrain_samples() const {
  std::vector<LMSample> out;
  for (const auto& img : images) {
    out.push_back(task_sample(*this, img, {"the", img.object, "is", img.color}));
    out.push_back(task_sample(*this, img, {"the", img.object, "in", "the", img.place}));
  }
  return out;
}

std::vector<LMSample> DetailTask::attr_samples() const {
  std::vector<LMSample> out;
  for (const auto& img : images) out.push_back(task_sample(*this, img, {img.color}));
  return out;
}

std::vector<LMSample> DetailTask::rel_samples() const {
  std::vector<LMSample> out;
  for (const auto& img : images) out.push_back(task_sample(*this, img, {img.place}));
  return out;
}

TinyLMConfig detail_task_config(const DetailTask& task, std::uint64_t seed) {
  TinyLMConfig c;
  c.d_model = 32;
  c.n_heads = 4;
  c.n_layers = 2;
  c.d_ffn = 64;
  c.max_seq = 24;
  c.n_visual = 4;
  c.embed_dim = task.embed_dim();
  c.vocab_size = task.vocab.size();
  c.seed = seed;
  return c;
}

TinyLMParams pretrain_detail_backbone(const DetailTask& task, std::uint64_t seed, int steps) {
  TinyLMParams params = init_params(detail_task_config(task, seed));
  auto samples = task.pretrain_samples();
  TrainHyper hyper;
  hyper.lr = 3e-3;
  hyper.batch_size = 32;
  hyper.seed = seed;
  hyper.max_steps = steps;
  hyper.epochs = steps;  // max_steps stops it first
  return train(params, std::nullopt, samples, TrainMode::full, hyper).final.params;
}

std::vector<CaptionSet> random_caption_sets(int n, std::uint64_t seed) {
  static const std::vector<std::string> objects = {"man",  "woman", "dog",   "cat",   "car",  "bus",  "table",
                                                   "chair", "horse", "bird", "plate", "truck", "girl", "boy"};
  static const std::vector<std::string> adjectives = {"red",  "blue",  "white", "black", "small",
                                                      "large", "young", "old",   "green", "wooden"};
  static const std::vector<std::string> verbs = {"sitting", "standing", "parked", "walking", "lying"};
  static const std::vector<std::string> preps = {"on", "in", "near", "under", "behind"};
  static const std::vector<std::string> places = {"street", "grass", "field", "road",  "beach",
                                                  "table",  "bench", "floor", "water", "kitchen"};
  Rng rng(seed);
  std::vector<CaptionSet> out;
  for (int i = 0; i < n; ++i) {
    CaptionSet set;
    set.image_id = "img" + std::to_string(i);
    const std::string& obj = pick(rng, objects);
    int count = 2 + static_cast<int>(rng.below(5));
    for (int c = 0; c < count; ++c) {
      std::string caption = rng.below(2) ? "a " : "the ";
      if (rng.below(2)) caption += pick(rng, adjectives) + " ";
      caption += rng.below(4) ? obj : pick(rng, objects);
      switch (rng.below(4)) {
        case 0:
          break;
        case 1:
          caption += " " + pick(rng, verbs) + " " + pick(rng, preps) + " the " + pick(rng, places);
          break;
        case 2:
          caption += " " + pick(rng, preps) + " a " + pick(rng, adjectives) + " " + pick(rng, places);
          break;
        default:
          caption += " is " + pick(rng, adjectives);
          break;
      }
      if (rng.below(3) == 0) caption += ".";
      if (rng.below(5) == 0) caption[0] = static_cast<char>(caption[0] - 'a' + 'A');
      set.captions.push_back(std::move(caption));
    }
    switch (i % 5) {
      case 3: set.split = Split::val; break;
      case 4: set.split = Split::test; break;
      default: set.split = Split::train;
    }
    out.push_back(std::move(set));
  }
  return out;
}

std::string to_coco_json(const std::vector<CaptionSet>& corpus) {
  nlohmann::ordered_json doc;
  doc["images"] = nlohmann::ordered_json::array();
  doc["annotations"] = nlohmann::ordered_json::array();
  int ann_id = 0;
  for (const auto& set : corpus) {
    doc["images"].push_back({{"id", set.image_id}, {"file_name", set.image_id + ".jpg"}});
    for (const auto& c : set.captions)
      doc["annotations"].push_back({{"id", ann_id++}, {"image_id", set.image_id}, {"caption", c}});
  }
  return doc.dump(1) + "\n";
}

std::string to_split_json(const std::vector<CaptionSet>& corpus) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::object();
  for (const auto& set : corpus) doc[set.image_id] = std::string(to_string(set.split));
  return doc.dump(1) + "\n";
}

}  // namespace capenrich
