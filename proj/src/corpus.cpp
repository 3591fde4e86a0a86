#include "capenrich/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_set>

#include "capenrich/error.hpp"
#include "json.hpp"

namespace capenrich {

namespace {

using nlohmann::json;

bool is_split_punct(char c) {
  return c == ',' || c == '.' || c == '!' || c == '?' || c == ';' || c == ':';
}

bool is_ascii_punct(unsigned char c) { return c < 128 && std::ispunct(c); }

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json parse_json(std::string_view text, std::string_view what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t offset = e.byte == 0 ? 0 : e.byte - 1;
    std::size_t line = 1 + std::count(text.begin(), text.begin() + std::min(offset, text.size()), '\n');
    throw ParseError(std::string(what) + ": parse error at line " + std::to_string(line) +
                     ", byte " + std::to_string(e.byte) + ": " + e.what());
  }
}

std::string id_string(const json& id, std::string_view where) {
  if (id.is_string()) return id.get<std::string>();
  if (id.is_number_integer()) return std::to_string(id.get<long long>());
  throw ParseError(std::string(where) + ": id must be an integer or string");
}

}  // namespace

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "train";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::train;
  if (text == "val") return Split::val;
  if (text == "test") return Split::test;
  throw ValidationError("unknown split '" + std::string(text) + "'");
}

std::vector<CaptionSet> parse_corpus(std::string_view captions_json, std::string_view split_json) {
  json doc = parse_json(captions_json, "captions");
  if (!doc.is_object()) throw ParseError("captions: top level must be an object");

  std::vector<CaptionSet> sets;
  std::unordered_map<std::string, std::size_t> index;
  if (doc.contains("images")) {
    const json& images = doc.at("images");
    if (!images.is_array()) throw ParseError("captions: 'images' must be an array");
    for (const json& img : images) {
      if (!img.is_object() || !img.contains("id")) throw ParseError("captions: image entry without 'id'");
      std::string id = id_string(img.at("id"), "images");
      if (index.count(id)) throw ValidationError("duplicate image id '" + id + "'");
      index.emplace(id, sets.size());
      sets.push_back(CaptionSet{id, {}, Split::train});
    }
  }
  if (doc.contains("annotations")) {
    const json& anns = doc.at("annotations");
    if (!anns.is_array()) throw ParseError("captions: 'annotations' must be an array");
    for (const json& ann : anns) {
      if (!ann.is_object() || !ann.contains("image_id") || !ann.contains("caption"))
        throw ParseError("captions: annotation needs 'image_id' and 'caption'");
      std::string id = id_string(ann.at("image_id"), "annotations");
      auto it = index.find(id);
      if (it == index.end()) throw ValidationError("annotation references unknown image_id '" + id + "'");
      if (!ann.at("caption").is_string()) throw ParseError("captions: 'caption' must be a string");
      std::string caption = ann.at("caption").get<std::string>();
      if (caption.find_first_not_of(" \t\r\n") == std::string::npos)
        throw ValidationError("empty caption for image_id '" + id + "'");
      sets[it->second].captions.push_back(std::move(caption));
    }
  }

  if (!split_json.empty()) {
    json splits = parse_json(split_json, "split");
    if (!splits.is_object()) throw ParseError("split: top level must be an object");
    for (const auto& [id, value] : splits.items()) {
      if (!value.is_string()) throw ParseError("split: value for '" + id + "' must be a string");
      auto it = index.find(id);
      if (it != index.end()) sets[it->second].split = parse_split(value.get<std::string>());
    }
  }

  std::erase_if(sets, [](const CaptionSet& s) { return s.captions.empty(); });
  return sets;
}

std::vector<CaptionSet> load_corpus(const std::filesystem::path& captions_path,
                                    const std::optional<std::filesystem::path>& split_path) {
  std::string captions = read_file(captions_path);
  std::string splits = split_path ? read_file(*split_path) : std::string();
  return parse_corpus(captions, splits);
}

TokenSeq tokenize(std::string_view text) {
  TokenSeq out;
  std::string word;
  auto flush = [&] {
    std::size_t b = 0, e = word.size();
    while (b < e && is_ascii_punct(static_cast<unsigned char>(word[b]))) ++b;
    while (e > b && is_ascii_punct(static_cast<unsigned char>(word[e - 1]))) --e;
    if (e > b) out.emplace_back(word.substr(b, e - b));
    word.clear();
  };
  for (char raw : text) {
    unsigned char c = static_cast<unsigned char>(raw);
    if (std::isspace(c)) {
      flush();
    } else if (is_split_punct(raw)) {
      flush();
      out.emplace_back(1, raw);
    } else {
      word.push_back(c < 128 ? static_cast<char>(std::tolower(c)) : raw);
    }
  }
  flush();
  return out;
}

std::string detokenize(std::span<const std::string> tokens) {
  std::string out;
  for (const auto& tok : tokens) {
    bool attach = tok.size() == 1 && is_split_punct(tok[0]);
    if (!out.empty() && !attach) out.push_back(' ');
    out += tok;
  }
  return out;
}

std::string normalize_caption(std::string_view text) {
  TokenSeq toks = tokenize(text);
  while (!toks.empty() && toks.back().size() == 1 && is_split_punct(toks.back()[0])) toks.pop_back();
  return detokenize(toks);
}

Vocab::Vocab() : tokens_{"<pad>", "<bos>", "<eos>", "<sep>", "<mask>"} {
  for (int i = 0; i < size(); ++i) ids_.emplace(tokens_[i], i);
}

Vocab Vocab::from_tokens(std::vector<std::string> tokens) {
  static const char* kSpecials[] = {"<pad>", "<bos>", "<eos>", "<sep>", "<mask>"};
  if (tokens.size() < kNumSpecials) throw ValidationError("vocab: missing special tokens");
  for (int i = 0; i < kNumSpecials; ++i)
    if (tokens[i] != kSpecials[i]) throw ValidationError("vocab: special token mismatch at id " + std::to_string(i));
  Vocab v;
  v.tokens_ = std::move(tokens);
  v.ids_.clear();
  for (int i = 0; i < v.size(); ++i) {
    if (!v.ids_.emplace(v.tokens_[i], i).second)
      throw ValidationError("vocab: duplicate token '" + v.tokens_[i] + "'");
  }
  return v;
}

bool Vocab::contains(std::string_view token) const { return ids_.count(std::string(token)) > 0; }

int Vocab::id_of(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kMask : it->second;
}

const std::string& Vocab::token_of(int id) const {
  if (id < 0 || id >= size()) throw ValidationError("vocab: id out of range: " + std::to_string(id));
  return tokens_[id];
}

std::vector<int> Vocab::encode(std::span<const std::string> tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id_of(t));
  return ids;
}

TokenSeq Vocab::decode(std::span<const int> ids) const {
  TokenSeq out;
  out.reserve(ids.size());
  for (int id : ids) out.push_back(token_of(id));
  return out;
}

std::uint64_t Vocab::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& t : tokens_) {
    for (unsigned char c : t) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    h ^= static_cast<unsigned char>('\n');
    h *= 1099511628211ULL;
  }
  return h;
}

Vocab build_vocab_from_sequences(std::span<const TokenSeq> sequences, int min_count) {
  if (min_count < 1) throw ValidationError("build_vocab: min_count must be >= 1");
  std::map<std::string, int> counts;
  for (const auto& seq : sequences)
    for (const auto& t : seq) ++counts[t];
  std::vector<std::pair<std::string, int>> items;
  for (auto& [tok, n] : counts) {
    if (n >= min_count && !tok.empty() && tok.front() != '<') items.emplace_back(tok, n);
  }
  std::stable_sort(items.begin(), items.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens = Vocab().tokens();
  for (auto& [tok, n] : items) tokens.push_back(tok);
  return Vocab::from_tokens(std::move(tokens));
}

Vocab build_vocab(std::span<const CaptionSet> corpus, int min_count) {
  std::vector<TokenSeq> seqs;
  for (const auto& set : corpus) {
    if (set.split != Split::train) continue;
    for (const auto& c : set.captions) seqs.push_back(tokenize(c));
  }
  if (seqs.empty()) throw ValidationError("build_vocab: empty train split");
  return build_vocab_from_sequences(seqs, min_count);
}

}  // namespace capenrich
