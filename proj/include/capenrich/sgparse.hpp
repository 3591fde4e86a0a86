#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "capenrich/corpus.hpp"

namespace capenrich {

enum class Tag { DET, ADJ, NOUN, VERB, PREP, CONJ, COP, PRON, NUM, PUNCT, OTHER };

std::string_view to_string(Tag tag);

/// A set of lowercase tokens read from a one-token-per-line file.
class Lexicon {
 public:
  Lexicon() = default;
  /// Blank lines and `#` comments are skipped; surrounding whitespace is trimmed.
  static Lexicon parse(std::string_view text);
  static Lexicon load(const std::filesystem::path& path);

  bool contains(std::string_view token) const { return words_.count(std::string(token)) > 0; }
  std::size_t size() const { return words_.size(); }

 private:
  std::unordered_set<std::string> words_;
};

/// Rule-based part-of-speech tagger.
///
/// Tags are assigned in a fixed order: punctuation and digit strings, then the
/// closed-class lexicons (determiners, prepositions, copulas, conjunctions,
/// pronouns, numerals), the adjective lexicon, the noun exception list, verb
/// lexicon and -ing/-ed suffixes, -ly adverbs, adjective suffixes
/// (-y, -ful, -ous, -ive), and finally NOUN.
class Tagger {
 public:
  /// Uses the lexicons compiled into the library.
  Tagger();
  /// Loads `<name>.txt` for every lexicon from `dir`.
  static Tagger from_directory(const std::filesystem::path& dir);

  Tag tag(std::string_view token) const;
  std::vector<Tag> tag(std::span<const std::string> seq) const;

 private:
  Lexicon det_, prep_, cop_, conj_, pron_, num_, adj_, noun_, verb_;
};

const Tagger& default_tagger();

std::vector<Tag> pos_tag(std::span<const std::string> seq);

struct Entity {
  std::string head;
  std::vector<std::string> modifiers;  // unique, in order of appearance
  std::size_t begin = 0;               // token span [begin, end)
  std::size_t end = 0;

  bool operator==(const Entity&) const = default;
};

struct Relation {
  std::string subject;
  std::string predicate;  // verb, verb + preposition, or preposition(s); space separated
  std::string object;

  bool operator==(const Relation&) const = default;
};

struct SceneGraph {
  std::vector<Entity> entities;
  std::vector<Relation> relations;
  TokenSeq source;
};

/// Maximal matches of `(DET)? (NUM|ADJ)* (NOUN)+`, scanned left to right.
std::vector<Entity> chunk_entities(std::span<const std::string> seq, std::span<const Tag> tags);

/// Entities plus relation and copula patterns:
///   E1 (COP)? VERB (PREP)? E2   -> (E1, verb[+prep], E2)
///   E1 (COP)? PREP{1,2} E2      -> (E1, prep, E2)
///   E COP ADJ+                  -> ADJs added to E's modifiers
/// An object entity may start the next match.
SceneGraph parse(std::span<const std::string> seq);
SceneGraph parse(std::span<const std::string> seq, const Tagger& tagger);

/// At least one NOUN, and the last non-punctuation tag is not DET, PREP, CONJ
/// or COP. A trailing ADJ is accepted only as a predicate adjective (directly
/// after a copula, possibly in a run of adjectives).
bool is_structurally_complete(std::span<const std::string> seq);

}  // namespace capenrich
