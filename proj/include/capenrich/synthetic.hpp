#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "capenrich/corpus.hpp"
#include "capenrich/tinylm.hpp"
#include "capenrich/train.hpp"

namespace capenrich {

/// A toy detail task where the detail is a fixed function of the image.
///
/// Image i has colour i % 8 and place (i / 8) % 8; its visual vector is the
/// concatenation of the two one-hot codes, and its generic caption is
/// "a {object}". Attribute details name the colour, relation details name
/// the place, so the two detail vocabularies are disjoint.
struct DetailTask {
  struct Image {
    std::string id;
    std::string object;
    std::string color;
    std::string place;
    Vec visual;
  };

  std::vector<Image> images;
  Vocab vocab;
  std::vector<std::string> colors;
  std::vector<std::string> places;

  int embed_dim() const { return static_cast<int>(images.front().visual.size()); }

  /// Full clauses ("the cup is red", "the cup in the kitchen") for backbone training.
  std::vector<LMSample> pretrain_samples() const;
  /// Single-token detail: the colour.
  std::vector<LMSample> attr_samples() const;
  /// Single-token detail: the place.
  std::vector<LMSample> rel_samples() const;
};

DetailTask make_detail_task(int n_images = 64);

/// Decoder size used with DetailTask.
TinyLMConfig detail_task_config(const DetailTask& task, std::uint64_t seed);

/// Full-mode training of a fresh backbone on pretrain_samples().
TinyLMParams pretrain_detail_backbone(const DetailTask& task, std::uint64_t seed, int steps = 400);

/// Random caption sets drawn from a small grammar (objects, colours, sizes,
/// verbs, prepositions, places). Each set has 2-6 captions; ids are
/// "img{index}".
std::vector<CaptionSet> random_caption_sets(int n, std::uint64_t seed);

/// COCO-style `{"images":[...],"annotations":[...]}` for a corpus.
std::string to_coco_json(const std::vector<CaptionSet>& corpus);
/// `{"image_id": "train"|"val"|"test", ...}` from each set's split.
std::string to_split_json(const std::vector<CaptionSet>& corpus);

}  // namespace capenrich
