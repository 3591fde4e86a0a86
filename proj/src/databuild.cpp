#include "capenrich/databuild.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>

#include "capenrich/error.hpp"
#include "json.hpp"

namespace capenrich {

namespace {

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

}  // namespace

std::string_view to_string(DetailKind kind) {
  switch (kind) {
    case DetailKind::ATTR: return "ATTR";
    case DetailKind::REL: return "REL";
    case DetailKind::MIXED: return "MIXED";
  }
  return "MIXED";
}

DetailKind parse_detail_kind(std::string_view text) {
  if (text == "ATTR") return DetailKind::ATTR;
  if (text == "REL") return DetailKind::REL;
  if (text == "MIXED") return DetailKind::MIXED;
  throw ValidationError("unknown detail kind '" + std::string(text) + "'");
}

const std::string& select_generic(std::span<const std::string> captions) {
  if (captions.empty()) throw ValidationError("select_generic: no captions");
  std::size_t best = 0;
  std::size_t best_len = tokenize(captions[0]).size();
  for (std::size_t i = 1; i < captions.size(); ++i) {
    std::size_t len = tokenize(captions[i]).size();
    if (len < best_len || (len == best_len && captions[i] < captions[best])) {
      best = i;
      best_len = len;
    }
  }
  return captions[best];
}

std::string lemma(std::string_view token) {
  std::string t(token);
  if (t.size() > 5 && ends_with(t, "ing")) return t.substr(0, t.size() - 3);
  if (t.size() > 3 && ends_with(t, "s")) {
    if (ends_with(t, "ss") || ends_with(t, "us") || ends_with(t, "is")) return t;
    if (t.size() > 4 && ends_with(t, "ies")) return t.substr(0, t.size() - 3) + "y";
    if (ends_with(t, "ches") || ends_with(t, "shes") || ends_with(t, "sses") || ends_with(t, "xes") ||
        ends_with(t, "zes"))
      return t.substr(0, t.size() - 2);
    return t.substr(0, t.size() - 1);
  }
  return t;
}

std::set<std::string> lemma_set(std::span<const std::string> tokens) {
  std::set<std::string> out;
  for (const auto& t : tokens) out.insert(lemma(t));
  return out;
}

std::vector<DetailCandidate> extract_candidates(const SceneGraph& graph, int source_index) {
  std::vector<DetailCandidate> out;
  for (const auto& e : graph.entities) {
    for (const auto& m : e.modifiers) {
      DetailCandidate c;
      c.kind = DetailKind::ATTR;
      c.text = "the " + e.head + " is " + m;
      c.content_lemmas = {lemma(e.head), lemma(m)};
      c.source_index = source_index;
      out.push_back(std::move(c));
    }
  }
  for (const auto& r : graph.relations) {
    DetailCandidate c;
    c.kind = DetailKind::REL;
    c.text = "the " + r.subject + " " + r.predicate + " the " + r.object;
    c.content_lemmas = {lemma(r.subject), lemma(r.object)};
    for (const auto& p : tokenize(r.predicate)) c.content_lemmas.insert(lemma(p));
    c.source_index = source_index;
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<EnrichSample> build_samples(const CaptionSet& caption_set, int max_details) {
  if (max_details < 1) throw ValidationError("build_samples: max_details must be >= 1");
  const auto& caps = caption_set.captions;
  if (caps.size() < 2) return {};

  const std::string& generic = select_generic(caps);
  std::size_t generic_index = static_cast<std::size_t>(&generic - caps.data());
  TokenSeq generic_tokens = tokenize(generic);
  std::set<std::string> generic_lemmas = lemma_set(generic_tokens);

  std::vector<DetailCandidate> kept;
  std::vector<std::set<std::string>> seen;
  for (std::size_t i = 0; i < caps.size(); ++i) {
    if (i == generic_index) continue;
    TokenSeq toks = tokenize(caps[i]);
    for (auto& c : extract_candidates(parse(toks), static_cast<int>(i))) {
      bool novel = !std::includes(generic_lemmas.begin(), generic_lemmas.end(), c.content_lemmas.begin(),
                                  c.content_lemmas.end());
      if (!novel) continue;
      if (std::find(seen.begin(), seen.end(), c.content_lemmas) != seen.end()) continue;
      seen.push_back(c.content_lemmas);
      kept.push_back(std::move(c));
    }
  }

  std::vector<EnrichSample> out;
  for (DetailKind kind : {DetailKind::ATTR, DetailKind::REL}) {
    EnrichSample s;
    s.image_id = caption_set.image_id;
    s.generic = normalize_caption(generic);
    s.kind = kind;
    for (const auto& c : kept) {
      if (c.kind != kind) continue;
      if (static_cast<int>(s.details.size()) >= max_details) break;
      s.details.push_back(c.text);
    }
    if (!s.details.empty()) out.push_back(std::move(s));
  }
  return out;
}

std::string render_target(std::string_view generic, std::span<const std::string> details) {
  if (details.empty()) throw ValidationError("render_target: sample has no details");
  std::string out(generic);
  for (const auto& d : details) {
    out += ", ";
    out += d;
  }
  return out;
}

std::string render_target(const EnrichSample& sample) { return render_target(sample.generic, sample.details); }

void write_samples_jsonl(std::ostream& out, std::span<const EnrichSample> samples) {
  for (const auto& s : samples) {
    nlohmann::ordered_json j;
    j["image_id"] = s.image_id;
    j["generic"] = s.generic;
    j["details"] = s.details;
    j["kind"] = std::string(to_string(s.kind));
    out << j.dump() << '\n';
  }
}

std::vector<EnrichSample> read_samples_jsonl(std::istream& in) {
  std::vector<EnrichSample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      EnrichSample s;
      s.image_id = j.at("image_id").is_string() ? j.at("image_id").get<std::string>()
                                                : std::to_string(j.at("image_id").get<long long>());
      s.generic = j.at("generic").get<std::string>();
      s.details = j.at("details").get<std::vector<std::string>>();
      s.kind = parse_detail_kind(j.at("kind").get<std::string>());
      if (s.details.empty()) throw ValidationError("sample without details");
      out.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("samples line " + std::to_string(lineno) + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError("samples line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<EnrichSample> load_samples(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  return read_samples_jsonl(in);
}

}  // namespace capenrich
