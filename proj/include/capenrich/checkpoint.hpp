#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "capenrich/corpus.hpp"
#include "capenrich/tinylm.hpp"
#include "json.hpp"

namespace capenrich {

/// Backbone, vocabulary and any number of named prompt tables.
///
/// File layout: magic "TLM1", u32 little-endian header length, UTF-8 JSON
/// header (format version, config, vocabulary and its hash, tensor and
/// prompt-table manifests, free-form `train` metadata), then every tensor as
/// little-endian float64 in manifest order: backbone tensors first, then
/// prompt tables.
struct TinyLMCheckpoint {
  TinyLMParams params;
  Vocab vocab;
  std::vector<PromptTable> prompts;
  nlohmann::ordered_json train_info = nlohmann::ordered_json::object();

  const PromptTable* find_prompt(std::string_view name) const;
  /// Replaces a table with the same name or appends a new one.
  void put_prompt(PromptTable table);
};

std::string serialize_checkpoint(const TinyLMCheckpoint& ckpt);
TinyLMCheckpoint deserialize_checkpoint(std::string_view bytes);

void save_checkpoint(const TinyLMCheckpoint& ckpt, const std::filesystem::path& path);
TinyLMCheckpoint load_checkpoint(const std::filesystem::path& path);

/// Backbone tensors as they appear in the file body.
std::string backbone_bytes(const TinyLMParams& params);

}  // namespace capenrich
