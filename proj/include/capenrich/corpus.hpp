#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace capenrich {

enum class Split { train, val, test };

std::string_view to_string(Split split);
Split parse_split(std::string_view text);

/// One image and its reference captions.
struct CaptionSet {
  std::string image_id;
  std::vector<std::string> captions;
  Split split = Split::train;
};

/// Lowercase word tokens with sentence punctuation split off.
using TokenSeq = std::vector<std::string>;

/// Loads a COCO-style caption file and an optional split map.
///
/// Annotations are grouped under their image in the order of the `images`
/// list. Images without annotations are dropped. Throws ParseError on
/// malformed JSON (the message carries line and byte offset) and
/// ValidationError on unknown or duplicate ids.
std::vector<CaptionSet> load_corpus(const std::filesystem::path& captions_path,
                                    const std::optional<std::filesystem::path>& split_path = {});

/// Same as load_corpus but from in-memory JSON text.
std::vector<CaptionSet> parse_corpus(std::string_view captions_json,
                                     std::string_view split_json = {});

TokenSeq tokenize(std::string_view text);

/// Joins tokens with spaces, attaching `, . ! ? ; :` to the preceding token.
std::string detokenize(std::span<const std::string> tokens);

/// tokenize + detokenize with trailing sentence punctuation removed.
std::string normalize_caption(std::string_view text);

class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kSep = 3;
  static constexpr int kMask = 4;
  static constexpr int kNumSpecials = 5;

  Vocab();

  /// Rebuilds from an explicit token list; the first five entries must be the specials.
  static Vocab from_tokens(std::vector<std::string> tokens);

  int size() const { return static_cast<int>(tokens_.size()); }
  bool contains(std::string_view token) const;
  int id_of(std::string_view token) const;  // MASK for unknown tokens
  const std::string& token_of(int id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<int> encode(std::span<const std::string> tokens) const;
  TokenSeq decode(std::span<const int> ids) const;

  /// FNV-1a over the newline-joined token list.
  std::uint64_t hash() const;

  bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

/// Vocabulary over the train split: specials, then tokens with count >=
/// min_count by descending frequency, ties lexicographic.
Vocab build_vocab(std::span<const CaptionSet> corpus, int min_count = 1);

/// Same ordering rule over arbitrary token sequences.
Vocab build_vocab_from_sequences(std::span<const TokenSeq> sequences, int min_count = 1);

}  // namespace capenrich
