#include "capenrich/sgparse.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "capenrich/error.hpp"
#include "capenrich/lexicon_data.hpp"

namespace capenrich {

namespace {

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

bool all_punct(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
    auto u = static_cast<unsigned char>(c);
    return u < 128 && std::ispunct(u);
  });
}

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

Lexicon builtin(std::string_view name) {
  std::string_view text = detail::builtin_lexicon(name);
  if (text.empty()) throw ValidationError("missing builtin lexicon '" + std::string(name) + "'");
  return Lexicon::parse(text);
}

void add_modifier(Entity& e, const std::string& mod) {
  if (std::find(e.modifiers.begin(), e.modifiers.end(), mod) == e.modifiers.end())
    e.modifiers.push_back(mod);
}

}  // namespace

std::string_view to_string(Tag tag) {
  switch (tag) {
    case Tag::DET: return "DET";
    case Tag::ADJ: return "ADJ";
    case Tag::NOUN: return "NOUN";
    case Tag::VERB: return "VERB";
    case Tag::PREP: return "PREP";
    case Tag::CONJ: return "CONJ";
    case Tag::COP: return "COP";
    case Tag::PRON: return "PRON";
    case Tag::NUM: return "NUM";
    case Tag::PUNCT: return "PUNCT";
    case Tag::OTHER: return "OTHER";
  }
  return "OTHER";
}

Lexicon Lexicon::parse(std::string_view text) {
  Lexicon lex;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    auto e = line.find_last_not_of(" \t\r");
    lex.words_.insert(line.substr(b, e - b + 1));
  }
  return lex;
}

Lexicon Lexicon::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open lexicon " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

Tagger::Tagger()
    : det_(builtin("determiners")),
      prep_(builtin("prepositions")),
      cop_(builtin("copulas")),
      conj_(builtin("conjunctions")),
      pron_(builtin("pronouns")),
      num_(builtin("numerals")),
      adj_(builtin("adjectives")),
      noun_(builtin("nouns")),
      verb_(builtin("verbs")) {}

Tagger Tagger::from_directory(const std::filesystem::path& dir) {
  Tagger t;
  t.det_ = Lexicon::load(dir / "determiners.txt");
  t.prep_ = Lexicon::load(dir / "prepositions.txt");
  t.cop_ = Lexicon::load(dir / "copulas.txt");
  t.conj_ = Lexicon::load(dir / "conjunctions.txt");
  t.pron_ = Lexicon::load(dir / "pronouns.txt");
  t.num_ = Lexicon::load(dir / "numerals.txt");
  t.adj_ = Lexicon::load(dir / "adjectives.txt");
  t.noun_ = Lexicon::load(dir / "nouns.txt");
  t.verb_ = Lexicon::load(dir / "verbs.txt");
  return t;
}

Tag Tagger::tag(std::string_view tok) const {
  if (all_punct(tok)) return Tag::PUNCT;
  if (all_digits(tok)) return Tag::NUM;
  if (det_.contains(tok)) return Tag::DET;
  if (prep_.contains(tok)) return Tag::PREP;
  if (cop_.contains(tok)) return Tag::COP;
  if (conj_.contains(tok)) return Tag::CONJ;
  if (pron_.contains(tok)) return Tag::PRON;
  if (num_.contains(tok)) return Tag::NUM;
  if (adj_.contains(tok)) return Tag::ADJ;
  if (noun_.contains(tok)) return Tag::NOUN;
  if (verb_.contains(tok)) return Tag::VERB;
  if (tok.size() >= 5 && (ends_with(tok, "ing") || ends_with(tok, "ed"))) return Tag::VERB;
  if (tok.size() >= 5 && ends_with(tok, "ly")) return Tag::OTHER;
  if (tok.size() >= 4 && ends_with(tok, "y") && !ends_with(tok, "ey") && !ends_with(tok, "ay") &&
      !ends_with(tok, "oy"))
    return Tag::ADJ;
  if (tok.size() >= 5 && (ends_with(tok, "ful") || ends_with(tok, "ous") || ends_with(tok, "ive")))
    return Tag::ADJ;
  return Tag::NOUN;
}

std::vector<Tag> Tagger::tag(std::span<const std::string> seq) const {
  std::vector<Tag> tags;
  tags.reserve(seq.size());
  for (const auto& t : seq) tags.push_back(tag(t));
  return tags;
}

const Tagger& default_tagger() {
  static const Tagger tagger;
  return tagger;
}

std::vector<Tag> pos_tag(std::span<const std::string> seq) { return default_tagger().tag(seq); }

std::vector<Entity> chunk_entities(std::span<const std::string> seq, std::span<const Tag> tags) {
  if (tags.size() != seq.size()) throw ValidationError("chunk_entities: tags not aligned with tokens");
  std::vector<Entity> out;
  std::size_t i = 0;
  const std::size_t n = seq.size();
  while (i < n) {
    std::size_t j = i;
    if (tags[j] == Tag::DET) ++j;
    while (j < n && (tags[j] == Tag::NUM || tags[j] == Tag::ADJ)) ++j;
    std::size_t noun_begin = j;
    while (j < n && tags[j] == Tag::NOUN) ++j;
    if (j == noun_begin) {
      ++i;
      continue;
    }
    Entity e;
    e.head = seq[j - 1];
    e.begin = i;
    e.end = j;
    for (std::size_t k = i; k < noun_begin; ++k)
      if (tags[k] == Tag::ADJ) add_modifier(e, seq[k]);
    out.push_back(std::move(e));
    i = j;
  }
  return out;
}

SceneGraph parse(std::span<const std::string> seq) { return parse(seq, default_tagger()); }

SceneGraph parse(std::span<const std::string> seq, const Tagger& tagger) {
  SceneGraph g;
  g.source.assign(seq.begin(), seq.end());
  std::vector<Tag> tags = tagger.tag(seq);
  g.entities = chunk_entities(seq, tags);

  // entity_at[k] = index of the entity starting at token k, or -1.
  std::vector<int> entity_at(seq.size(), -1);
  for (std::size_t e = 0; e < g.entities.size(); ++e) entity_at[g.entities[e].begin] = static_cast<int>(e);

  const std::size_t n = seq.size();
  for (std::size_t e = 0; e < g.entities.size(); ++e) {
    std::size_t k = g.entities[e].end;
    if (k >= n) continue;
    if (tags[k] == Tag::COP) {
      std::size_t a = k + 1;
      std::size_t adj_begin = a;
      while (a < n && tags[a] == Tag::ADJ) ++a;
      bool predicate_adj = a > adj_begin && (a == n || entity_at[adj_begin] < 0);
      if (predicate_adj) {
        for (std::size_t m = adj_begin; m < a; ++m) add_modifier(g.entities[e], seq[m]);
        continue;
      }
      ++k;
      if (k >= n) continue;
    }
    std::string predicate;
    if (tags[k] == Tag::VERB) {
      predicate = seq[k++];
      if (k < n && tags[k] == Tag::PREP) {
        predicate += " " + seq[k++];
        while (k < n && tags[k] == Tag::PREP) ++k;  // capped at verb + one preposition
      }
    } else if (tags[k] == Tag::PREP) {
      predicate = seq[k++];
      if (k < n && tags[k] == Tag::PREP) predicate += " " + seq[k++];
    } else {
      continue;
    }
    if (k < n && entity_at[k] >= 0) {
      g.relations.push_back(Relation{g.entities[e].head, predicate, g.entities[entity_at[k]].head});
    }
  }
  return g;
}

bool is_structurally_complete(std::span<const std::string> seq) {
  std::vector<Tag> tags = pos_tag(seq);
  if (std::find(tags.begin(), tags.end(), Tag::NOUN) == tags.end()) return false;
  std::size_t last = tags.size();
  while (last > 0 && tags[last - 1] == Tag::PUNCT) --last;
  if (last == 0) return false;
  switch (tags[last - 1]) {
    case Tag::DET:
    case Tag::PREP:
    case Tag::CONJ:
    case Tag::COP:
      return false;
    case Tag::ADJ: {
      std::size_t k = last - 1;
      while (k > 0 && tags[k - 1] == Tag::ADJ) --k;
      return k > 0 && tags[k - 1] == Tag::COP;
    }
    default:
      return true;
  }
}

}  // namespace capenrich
